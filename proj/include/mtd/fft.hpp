#pragma once
// Thin RAII wrappers over FFTW for the two transform shapes used here:
// real 2-D power/autocorrelation and complex 2-D transforms for phase
// retrieval. Plans use FFTW_ESTIMATE so planning is deterministic, and plan
// creation/destruction is serialized (FFTW's planner is not thread-safe).

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace mtd {

inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

// Fixed-size real 2-D transform pair. circular_autocorr() replaces the
// contents of in() with the circular autocorrelation of in(), normalized so
// that entry (0,0) equals sum of squares.
class fft2_real {
  public:
    fft2_real(int h, int w) : h_(h), w_(w), wc_(w / 2 + 1) {
        in_.assign(static_cast<size_t>(h_) * w_, 0.0);
        spec_.assign(static_cast<size_t>(h_) * wc_, {0.0, 0.0});
        std::lock_guard<std::mutex> lk(fftw_plan_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(h_, w_, in_.data(),
                                    reinterpret_cast<fftw_complex*>(spec_.data()),
                                    FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(h_, w_,
                                    reinterpret_cast<fftw_complex*>(spec_.data()),
                                    in_.data(), FFTW_ESTIMATE);
    }
    ~fft2_real() {
        std::lock_guard<std::mutex> lk(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    fft2_real(const fft2_real&) = delete;
    fft2_real& operator=(const fft2_real&) = delete;

    int h() const { return h_; }
    int w() const { return w_; }
    std::vector<double>& in() { return in_; }

    void circular_autocorr() {
        fftw_execute(fwd_);
        for (auto& z : spec_) z = {std::norm(z), 0.0};
        fftw_execute(bwd_);
        double n = static_cast<double>(h_) * w_;
        for (double& v : in_) v /= n;
    }

  private:
    int h_, w_, wc_;
    std::vector<double> in_;
    std::vector<std::complex<double>> spec_;
    fftw_plan fwd_, bwd_;
};

// Fixed-size in-place complex 2-D transform pair (square n x n), both
// directions unnormalized.
class fft2_complex {
  public:
    explicit fft2_complex(int n) : n_(n) {
        buf_.assign(static_cast<size_t>(n_) * n_, {0.0, 0.0});
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        std::lock_guard<std::mutex> lk(fftw_plan_mutex());
        fwd_ = fftw_plan_dft_2d(n_, n_, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n_, n_, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~fft2_complex() {
        std::lock_guard<std::mutex> lk(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    fft2_complex(const fft2_complex&) = delete;
    fft2_complex& operator=(const fft2_complex&) = delete;

    int n() const { return n_; }
    std::vector<std::complex<double>>& buf() { return buf_; }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }

  private:
    int n_;
    std::vector<std::complex<double>> buf_;
    fftw_plan fwd_, bwd_;
};

}  // namespace mtd
