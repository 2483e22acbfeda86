#pragma once
// Recovery of a 2-D signal from its second-order autocorrelation by iterative
// phase retrieval.
//
// The centred (2W-1)^2 autocorrelation grid of a W x W signal, wrapped onto
// the (2W-1)-periodic lattice, has a DFT equal to the squared DFT magnitudes
// of the zero-padded signal.  Recovering the signal is then a classic
// oversampled phase-retrieval problem: find a field matching those magnitudes
// (constraint set A) whose support lies in the W x W corner (constraint set
// B).  We iterate relaxed-reflect-reflect,
//     u <- u + beta * ( P_B(2 P_A(u) - u) - P_A(u) ),
// restarting from fresh noise when the residual ||P_B - P_A|| plateaus, and
// report the support crop of the best iterate.  The result is determined up
// to sign and point reflection, which align_2d resolves against a reference.
//
// Signals are taken mean-zero, so the DC magnitude is pinned to zero; this
// also absorbs the (unknowable) mean when the autocorrelation grid comes from
// noisy data.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/fft.hpp"
#include "mtd/rng.hpp"

namespace mtd {

struct phase_problem {
    int w = 0;                // support side
    int ow = 0;               // oversampled side, 2w-1
    std::vector<double> mag;  // ow*ow target DFT magnitudes, frequency layout
};

// ax2_grid: centred (2w-1)^2 grid of the per-pixel-normalised signal
// autocorrelation, row-major with (0,0) in the middle (direct_ac2_2d layout).
inline phase_problem make_phase_problem(const std::vector<double>& ax2_grid, int w) {
    if (w < 2) throw validation_error("support side must be at least 2");
    const int ow = 2 * w - 1;
    if (ax2_grid.size() != static_cast<std::size_t>(ow) * ow)
        throw validation_error("autocorrelation grid has the wrong size");
    phase_problem p;
    p.w = w;
    p.ow = ow;
    fft2_complex fft(ow);
    auto& buf = fft.buf();
    const double npix = static_cast<double>(w) * w;
    for (int dr = -(w - 1); dr <= w - 1; ++dr)
        for (int dc = -(w - 1); dc <= w - 1; ++dc) {
            int wr = (dr + ow) % ow, wc = (dc + ow) % ow;
            buf[static_cast<std::size_t>(wr) * ow + wc] =
                npix * ax2_grid[static_cast<std::size_t>(dr + w - 1) * ow + (dc + w - 1)];
        }
    fft.forward();
    p.mag.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        p.mag[i] = std::sqrt(std::max(0.0, buf[i].real()));
    p.mag[0] = 0.0;  // mean-zero pin
    return p;
}

// Centred signal-autocorrelation grid from observed 2-D statistics:
// (a_y2 - sigma^2 delta) / gamma.
inline std::vector<double> extract_image_ac2(const autocorr_set& ac, double gamma,
                                             double sigma2) {
    if (ac.dim != 2) throw validation_error("2-D autocorrelations required");
    if (gamma <= 0.0) throw validation_error("density must be positive");
    const int w = ac.len, side = 2 * w - 1;
    std::vector<double> grid(static_cast<std::size_t>(side) * side);
    for (int dr = -(w - 1); dr <= w - 1; ++dr)
        for (int dc = -(w - 1); dc <= w - 1; ++dc) {
            double v = ac.a2_at_2d(dr, dc);
            if (dr == 0 && dc == 0) v -= sigma2;
            grid[static_cast<std::size_t>(dr + w - 1) * side + (dc + w - 1)] = v / gamma;
        }
    return grid;
}

struct rrr_options {
    double beta = 0.5;
    int max_iter = 100000;
    int restart_window = 1000;     // iterations without progress before reseeding
    double target_residual = 1e-12;
    std::uint64_t seed = 0;
};

struct rrr_result {
    signal x;  // dim 2, side w: support crop of the best iterate
    double residual = 0.0;
    int iterations = 0;
    int restarts = 0;
};

inline rrr_result rrr_phase_retrieval(const phase_problem& prob, const rrr_options& opt) {
    const int ow = prob.ow, w = prob.w;
    const std::size_t n = static_cast<std::size_t>(ow) * ow;
    fft2_complex fft(ow);
    auto& buf = fft.buf();
    counter_rng gen(opt.seed, rng_stream::retrieval);

    double mag_norm = 0.0;
    for (double m : prob.mag) mag_norm += m * m;
    // Parseval: the signal 2-norm equals ||mag|| / ow.
    const double x_scale = std::max(std::sqrt(mag_norm) / ow, 1e-300);

    std::vector<double> u(n), pa(n), pb(n), best(n);
    auto reseed = [&](int restart_idx) {
        std::uint64_t base = static_cast<std::uint64_t>(restart_idx) << 40;
        for (std::size_t i = 0; i < n; ++i)
            u[i] = gen.gaussian(base + i) * x_scale / ow;
    };
    auto project_a = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = in[i];
        fft.forward();
        for (std::size_t i = 0; i < n; ++i) {
            double az = std::abs(buf[i]);
            buf[i] = az > 0.0 ? buf[i] * (prob.mag[i] / az)
                              : std::complex<double>(prob.mag[i], 0.0);
        }
        fft.backward();
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() * inv_n;
    };
    auto in_support = [&](std::size_t i) {
        return static_cast<int>(i) / ow < w && static_cast<int>(i) % ow < w;
    };

    rrr_result res;
    reseed(0);
    double best_res = std::numeric_limits<double>::infinity();
    double window_ref = best_res;
    int window_ref_it = 0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        project_a(u, pa);
        double diff2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double refl = 2.0 * pa[i] - u[i];
            pb[i] = in_support(i) ? refl : 0.0;
            double d = pb[i] - pa[i];
            diff2 += d * d;
        }
        double rel = std::sqrt(diff2) / x_scale;
        if (rel < best_res) {
            best_res = rel;
            best = pb;
        }
        if (best_res <= opt.target_residual) {
            ++it;
            break;
        }
        if (rel < 0.999 * window_ref) {
            window_ref = rel;
            window_ref_it = it;
        } else if (it - window_ref_it >= opt.restart_window) {
            ++res.restarts;
            reseed(res.restarts);
            window_ref = std::numeric_limits<double>::infinity();
            window_ref_it = it;
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) u[i] += opt.beta * (pb[i] - pa[i]);
    }
    res.iterations = it;
    res.residual = best_res;
    res.x.dim = 2;
    res.x.len = w;
    res.x.values.resize(static_cast<std::size_t>(w) * w);
    for (int r = 0; r < w; ++r)
        for (int c = 0; c < w; ++c)
            res.x.values[static_cast<std::size_t>(r) * w + c] =
                best[static_cast<std::size_t>(r) * ow + c];
    return res;
}

struct align2d_result {
    double rel_error = 0.0;
    int sign = 1;
    bool reflected = false;
};

// Resolves the phase-retrieval ambiguity group {+1,-1} x {identity, point
// reflection} against a reference and reports the relative 2-norm error.
inline align2d_result align_2d(const signal& est, const signal& truth) {
    if (est.dim != 2 || truth.dim != 2 || est.len != truth.len)
        throw validation_error("2-D signals of equal side required");
    const int w = est.len;
    double tn = 0.0;
    for (double v : truth.values) tn += v * v;
    tn = std::sqrt(tn);
    align2d_result out;
    out.rel_error = std::numeric_limits<double>::infinity();
    for (int refl = 0; refl < 2; ++refl)
        for (int sgn : {1, -1}) {
            double d2 = 0.0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    int sr = refl ? w - 1 - r : r, sc = refl ? w - 1 - c : c;
                    double e = sgn * est.values[static_cast<std::size_t>(sr) * w + sc] -
                               truth.values[static_cast<std::size_t>(r) * w + c];
                    d2 += e * e;
                }
            double rel = std::sqrt(d2) / (tn > 0.0 ? tn : 1.0);
            if (rel < out.rel_error) {
                out.rel_error = rel;
                out.sign = sgn;
                out.reflected = refl != 0;
            }
        }
    return out;
}

}  // namespace mtd
