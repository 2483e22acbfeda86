#pragma once
// Streaming accumulation of empirical autocorrelations up to order 3.
//
// An accumulator is a monoid element: segments are fed in stream order,
// partial accumulators over adjacent spans combine associatively, and the
// final moments are the sums divided by the total sample count M (full-length
// normalization):
//   a1       = (1/M) sum_i y[i]
//   a2[l]    = (1/M) sum_i y[i]*y[i+l]
//   a3[l1,l2]= (1/M) sum_i y[i]*y[i+l1]*y[i+l2]   (canonical triangle)
//
// Products that straddle a segment boundary involve at most the last L-1
// samples before it and the first L-1 after it. Each accumulator therefore
// carries its stream's first and last L-1 samples; under the 'exact' junction
// policy the straddling products are added explicitly (on the next segment,
// or inside combine()), so any segmentation and any combine tree reproduce
// the single-pass sums. The 'truncate' policy drops straddling products,
// losing at most (L-1)*max|y|^(order) per junction before normalization.
//
// All bins use Kahan compensated sums; the third-order kernel fixes l1,
// builds the lagged product p[i] = y[i]*y[i+l1] once, and sweeps l2 <= l1,
// giving O(N*L^2) work.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/fft.hpp"
#include "mtd/kahan.hpp"

namespace mtd {

enum class junction_policy { exact, truncate };

inline std::string to_string(junction_policy p) {
    return p == junction_policy::exact ? "exact" : "truncate";
}
inline junction_policy junction_from_string(const std::string& s) {
    if (s == "exact") return junction_policy::exact;
    if (s == "truncate") return junction_policy::truncate;
    throw validation_error("unknown junction policy: " + s);
}

class accumulator {
  public:
    accumulator() = default;  // identity element
    explicit accumulator(int len, int order = 3,
                         junction_policy pol = junction_policy::exact)
        : len_(len), order_(order), pol_(pol) {
        if (len < 1) throw validation_error("accumulator: len must be >= 1");
        if (order < 2 || order > 3)
            throw validation_error("accumulator: order must be 2 or 3");
        a2_.assign(len, kahan{});
        if (order >= 3) a3_.assign(autocorr_set::tri_size(len), kahan{});
    }

    int len() const { return len_; }
    int order() const { return order_; }
    junction_policy policy() const { return pol_; }
    std::uint64_t n_samples() const { return n_; }

    void accumulate_segment(const std::vector<double>& seg) {
        accumulate_segment(seg.data(), static_cast<std::int64_t>(seg.size()));
    }

    void accumulate_segment(const double* y, std::int64_t n) {
        if (len_ == 0) throw validation_error("accumulator: not configured");
        if (n < len_)
            throw validation_error("segment of " + std::to_string(n) +
                                   " samples is shorter than the signal length " +
                                   std::to_string(len_));
        if (pol_ == junction_policy::exact && n_ > 0 && len_ > 1)
            add_junction(tail_.data(), y);
        {
            kahan k = a1_;
            for (std::int64_t i = 0; i < n; ++i) k.add(y[i]);
            a1_ = k;
        }
        for (int l = 0; l < len_; ++l) {
            kahan k = a2_[l];
            const double* a = y;
            const double* b = y + l;
            for (std::int64_t i = n - l; i > 0; --i) k.add(*a++ * *b++);
            a2_[l] = k;
        }
        if (order_ >= 3) {
            if (static_cast<std::int64_t>(scratch_.size()) < n) scratch_.resize(n);
            double* p = scratch_.data();
            for (int l1 = 0; l1 < len_; ++l1) {
                const std::int64_t m = n - l1;
                const double* hi = y + l1;
                for (std::int64_t i = 0; i < m; ++i) p[i] = y[i] * hi[i];
                for (int l2 = 0; l2 <= l1; ++l2) {
                    kahan k = a3_[autocorr_set::tri_index(l1, l2)];
                    const double* a = p;
                    const double* b = y + l2;
                    for (std::int64_t i = m; i > 0; --i) k.add(*a++ * *b++);
                    a3_[autocorr_set::tri_index(l1, l2)] = k;
                }
            }
        }
        if (n_ == 0 && len_ > 1) head_.assign(y, y + len_ - 1);
        if (len_ > 1) tail_.assign(y + n - (len_ - 1), y + n);
        n_ += static_cast<std::uint64_t>(n);
        nseg_ += 1;
    }

    // 'o' must hold the samples immediately following this accumulator's span.
    void combine(const accumulator& o) {
        if (o.n_ == 0) return;  // right unit
        if (n_ == 0) {          // left unit
            if (len_ != 0 && !same_config(o))
                throw validation_error("combine: accumulator configurations differ");
            *this = o;
            return;
        }
        if (!same_config(o))
            throw validation_error("combine: accumulator configurations differ");
        if (pol_ == junction_policy::exact && len_ > 1)
            add_junction(tail_.data(), o.head_.data());
        a1_.merge(o.a1_);
        for (int i = 0; i < len_; ++i) a2_[i].merge(o.a2_[i]);
        for (size_t i = 0; i < a3_.size(); ++i) a3_[i].merge(o.a3_[i]);
        n_ += o.n_;
        nseg_ += o.nseg_;
        tail_ = o.tail_;
    }

    autocorr_set finalize() const {
        if (n_ == 0) throw validation_error("finalize: no samples accumulated");
        autocorr_set ac = autocorr_set::make_1d(len_, order_);
        double m = static_cast<double>(n_);
        ac.a1 = a1_.value() / m;
        for (int i = 0; i < len_; ++i) ac.a2[i] = a2_[i].value() / m;
        for (size_t i = 0; i < a3_.size(); ++i) ac.a3[i] = a3_[i].value() / m;
        ac.n_samples = n_;
        ac.n_segments = nseg_;
        ac.junction = to_string(pol_);
        return ac;
    }

  private:
    bool same_config(const accumulator& o) const {
        return len_ == o.len_ && order_ == o.order_ && pol_ == o.pol_;
    }

    // Add every product window straddling the junction between tail t
    // (the L-1 samples before it) and prefix p (the L-1 samples after).
    // A window of span l1 <= L-1 crosses at most this one junction.
    void add_junction(const double* t, const double* p) {
        const int m = len_ - 1;
        for (int l = 1; l < len_; ++l) {
            double s = 0.0;
            for (int j = 0; j < l; ++j) s += t[m - l + j] * p[j];
            a2_[l].add(s);
        }
        if (order_ < 3) return;
        for (int l1 = 1; l1 < len_; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                double s = 0.0;
                for (int j = 0; j < l1; ++j) {
                    int mid = m - l1 + j + l2;
                    double x1 = mid < m ? t[mid] : p[mid - m];
                    s += t[m - l1 + j] * x1 * p[j];
                }
                a3_[autocorr_set::tri_index(l1, l2)].add(s);
            }
    }

    int len_ = 0, order_ = 3;
    junction_policy pol_ = junction_policy::exact;
    kahan a1_;
    std::vector<kahan> a2_, a3_;
    std::uint64_t n_ = 0, nseg_ = 0;
    std::vector<double> head_, tail_;
    std::vector<double> scratch_;
};

// 2-D accumulation runs per observation: each observation's linear
// autocorrelation over |shift| <= L-1 per axis is computed by zero-padded
// FFT, normalized per pixel, and averaged over observations. Observations
// are independent, so combining needs no junction handling. Only orders 1-2
// are supported in 2-D.
class accumulator2d {
  public:
    accumulator2d() = default;
    explicit accumulator2d(int len, int order = 2) : len_(len), order_(order) {
        if (len < 1) throw validation_error("accumulator2d: len must be >= 1");
        if (order >= 3)
            throw unimplemented_error(
                "third-order accumulation for 2-D observations is unimplemented");
        if (order != 2) throw validation_error("accumulator2d: order must be 2");
        a2_.assign(autocorr_set::a2_grid_size(len), kahan{});
    }

    int len() const { return len_; }
    std::uint64_t n_observations() const { return nobs_; }

    void accumulate_observation(const double* img, int h, int w) {
        if (len_ == 0) throw validation_error("accumulator2d: not configured");
        if (h < len_ || w < len_)
            throw validation_error("observation smaller than the shift range");
        if (nobs_ == 0) {
            h_ = h;
            w_ = w;
        } else if (h != h_ || w != w_) {
            throw validation_error("observation shape changed mid-accumulation");
        }
        int hp = h + len_ - 1, wp = w + len_ - 1;
        if (!fft_ || fft_->h() != hp || fft_->w() != wp)
            fft_ = std::make_unique<fft2_real>(hp, wp);
        auto& buf = fft_->in();
        std::fill(buf.begin(), buf.end(), 0.0);
        double total = 0.0;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                double v = img[static_cast<size_t>(r) * w + c];
                buf[static_cast<size_t>(r) * wp + c] = v;
                total += v;
            }
        fft_->circular_autocorr();
        double npix = static_cast<double>(h) * w;
        a1_.add(total / npix);
        for (int lr = 0; lr < len_; ++lr)
            for (int lc = (lr == 0 ? 0 : -(len_ - 1)); lc <= len_ - 1; ++lc) {
                int cc = lc < 0 ? wp + lc : lc;
                a2_[autocorr_set::a2_index_2d(len_, lr, lc)].add(
                    buf[static_cast<size_t>(lr) * wp + cc] / npix);
            }
        nobs_ += 1;
        npix_ += static_cast<std::uint64_t>(h) * w;
    }

    void combine(const accumulator2d& o) {
        if (o.nobs_ == 0) return;
        if (nobs_ == 0) {
            if (len_ != 0 && (len_ != o.len_ || order_ != o.order_))
                throw validation_error("combine: accumulator configurations differ");
            len_ = o.len_;
            order_ = o.order_;
            h_ = o.h_;
            w_ = o.w_;
            a1_ = o.a1_;
            a2_ = o.a2_;
            nobs_ = o.nobs_;
            npix_ = o.npix_;
            return;
        }
        if (len_ != o.len_ || order_ != o.order_ || h_ != o.h_ || w_ != o.w_)
            throw validation_error("combine: accumulator configurations differ");
        a1_.merge(o.a1_);
        for (size_t i = 0; i < a2_.size(); ++i) a2_[i].merge(o.a2_[i]);
        nobs_ += o.nobs_;
        npix_ += o.npix_;
    }

    autocorr_set finalize() const {
        if (nobs_ == 0) throw validation_error("finalize: no observations accumulated");
        autocorr_set ac = autocorr_set::make_2d(len_);
        double m = static_cast<double>(nobs_);
        ac.a1 = a1_.value() / m;
        for (size_t i = 0; i < a2_.size(); ++i) ac.a2[i] = a2_[i].value() / m;
        ac.n_samples = npix_;
        ac.n_segments = nobs_;
        ac.src_h = h_;
        ac.src_w = w_;
        return ac;
    }

  private:
    int len_ = 0, order_ = 2;
    int h_ = 0, w_ = 0;
    kahan a1_;
    std::vector<kahan> a2_;
    std::uint64_t nobs_ = 0, npix_ = 0;
    std::unique_ptr<fft2_real> fft_;
};

}  // namespace mtd
