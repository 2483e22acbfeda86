#pragma once
// Weighted least-squares fit of K length-L signals (and optionally their
// densities) to first-, second-, and third-order autocorrelation targets.
//
// Model values, for component signals x_k on a working window of width W >= L
// and densities gamma_k:
//   m1          = sum_k gamma_k/L * sum_j x_k[j]
//   m2[l]       = sum_k gamma_k/L * sum_j x_k[j] x_k[j+l]
//   m3[l1,l2]   = sum_k gamma_k/L * sum_j x_k[j] x_k[j+l1] x_k[j+l2]
// The 1/L normalisation uses the declared signal length L even when W > L, so
// a ground-truth signal embedded anywhere in the wide window reproduces the
// targets exactly.
//
// The objective is || r ||^2 where each residual row is
// sqrt(w_q) * (target - model), with w_1 = 1/2 and w_2, w_3 equal to
// 1/(2 n_2), 1/(2 n_3) for n_q target rows of order q.  For the sigma-free
// target set (a1, a2 at lags 1..L-1, and third-order cells with
// 2 <= l1 <= L-1, 1 <= l2 <= l1-1) this reduces to weights 1/2, 1/(2(L-1)),
// 1/((L-1)(L-2)).
//
// Free densities are parameterised as gamma_k = exp(t_k) so they stay
// positive; the parameter vector is [x_1 (W), ..., x_K (W), t_1..t_K], with
// the trailing block omitted when densities are fixed.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/forward.hpp"
#include "mtd/rng.hpp"

namespace mtd {

struct nls_problem {
    int k = 1;
    int l = 0;  // declared signal length (model normalisation)
    int w = 0;  // working window width, >= l
    double w1 = 0.0, w2 = 0.0, w3 = 0.0;
    double target_a1 = 0.0;
    std::vector<std::pair<int, double>> target_a2;              // (l, value), l >= 1
    std::vector<std::tuple<int, int, double>> target_a3;        // (l1, l2, value), l1 >= l2
    std::vector<double> fixed_gammas;                           // size k, or empty = free

    bool gammas_free() const { return fixed_gammas.empty(); }
    int n_params() const { return k * w + (gammas_free() ? k : 0); }
    int n_residuals() const {
        return 1 + static_cast<int>(target_a2.size()) + static_cast<int>(target_a3.size());
    }

    void set_weights() {
        w1 = 0.5;
        w2 = target_a2.empty() ? 0.0 : 0.5 / static_cast<double>(target_a2.size());
        w3 = target_a3.empty() ? 0.0 : 0.5 / static_cast<double>(target_a3.size());
    }

    // Targets restricted to noise-insensitive statistics.  For well-separated
    // placements the contaminated entries of the observed autocorrelations are
    // simply skipped; for Poisson placements the mean-induced terms are first
    // removed (which needs no knowledge of sigma).
    static nls_problem sigma_free(const autocorr_set& acy, placement_kind kind, int k, int w) {
        if (acy.order < 3) throw validation_error("third-order autocorrelations required");
        nls_problem p;
        p.k = k;
        p.l = acy.len;
        p.w = w;
        debiased d = debias(acy, std::nullopt, kind);
        p.target_a1 = d.a1_known ? d.gax.a1 : acy.a1;
        for (int l = 1; l < acy.len; ++l)
            p.target_a2.emplace_back(l, d.gax.a2[static_cast<std::size_t>(l)]);
        for (int l1 = 2; l1 < acy.len; ++l1)
            for (int l2 = 1; l2 < l1; ++l2)
                p.target_a3.emplace_back(
                    l1, l2, d.gax.a3[autocorr_set::tri_index(l1, l2)]);
        p.set_weights();
        return p;
    }

    // All debiased entries, for use when sigma^2 is known.
    static nls_problem from_debiased(const debiased& d, int len, int k, int w) {
        nls_problem p;
        p.k = k;
        p.l = len;
        p.w = w;
        p.target_a1 = d.gax.a1;
        for (int l = 0; l < len; ++l)
            if (d.a2_known[static_cast<std::size_t>(l)])
                p.target_a2.emplace_back(l, d.gax.a2[static_cast<std::size_t>(l)]);
        for (int l1 = 0; l1 < len; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                std::size_t t = autocorr_set::tri_index(l1, l2);
                if (d.a3_known[t]) p.target_a3.emplace_back(l1, l2, d.gax.a3[t]);
            }
        p.set_weights();
        return p;
    }

    // Sigma-free target set straight from density-weighted signal moments
    // gax = sum_k gamma_k a^q(x_k); used for exact-moment studies.
    static nls_problem from_moments(const signal_moments& gax, int k, int w) {
        nls_problem p;
        p.k = k;
        p.l = gax.len;
        p.w = w;
        p.target_a1 = gax.a1;
        for (int l = 1; l < gax.len; ++l)
            p.target_a2.emplace_back(l, gax.a2[static_cast<std::size_t>(l)]);
        for (int l1 = 2; l1 < gax.len; ++l1)
            for (int l2 = 1; l2 < l1; ++l2)
                p.target_a3.emplace_back(
                    l1, l2, gax.a3[autocorr_set::tri_index(l1, l2)]);
        p.set_weights();
        return p;
    }
};

// Residual vector and Jacobian at parameter vector p (layout above).
inline void nls_residuals(const nls_problem& prob, const Eigen::VectorXd& p,
                          Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    const int k = prob.k, w = prob.w, np = prob.n_params();
    const int m = prob.n_residuals();
    const bool free_g = prob.gammas_free();
    if (static_cast<int>(p.size()) != np)
        throw validation_error("parameter vector has the wrong size");
    r.resize(m);
    jac.setZero(m, np);
    const double inv_l = 1.0 / static_cast<double>(prob.l);
    std::vector<double> gamma(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c)
        gamma[static_cast<std::size_t>(c)] =
            free_g ? std::exp(p[k * w + c]) : prob.fixed_gammas[static_cast<std::size_t>(c)];

    const double s1 = std::sqrt(prob.w1);
    const double s2 = std::sqrt(prob.w2);
    const double s3 = std::sqrt(prob.w3);

    // Row 0: first order.
    {
        double model = 0.0;
        for (int c = 0; c < k; ++c) {
            const double* x = p.data() + c * w;
            double sum = 0.0;
            for (int j = 0; j < w; ++j) sum += x[j];
            double gc = gamma[static_cast<std::size_t>(c)];
            model += gc * inv_l * sum;
            for (int j = 0; j < w; ++j) jac(0, c * w + j) = -s1 * gc * inv_l;
            if (free_g) jac(0, k * w + c) = -s1 * gc * inv_l * sum;
        }
        r[0] = s1 * (prob.target_a1 - model);
    }

    int row = 1;
    for (const auto& [lag, value] : prob.target_a2) {
        double model = 0.0;
        for (int c = 0; c < k; ++c) {
            const double* x = p.data() + c * w;
            double gc = gamma[static_cast<std::size_t>(c)];
            double sum = 0.0;
            for (int j = 0; j + lag < w; ++j) sum += x[j] * x[j + lag];
            model += gc * inv_l * sum;
            const double f = -s2 * gc * inv_l;
            for (int j = 0; j < w; ++j) {
                double d = 0.0;
                if (j + lag < w) d += x[j + lag];
                if (j - lag >= 0) d += x[j - lag];
                if (lag == 0) d = 2.0 * x[j];
                jac(row, c * w + j) = f * d;
            }
            if (free_g) jac(row, k * w + c) = -s2 * gc * inv_l * sum;
        }
        r[row] = s2 * (value - model);
        ++row;
    }

    for (const auto& [l1, l2, value] : prob.target_a3) {
        double model = 0.0;
        for (int c = 0; c < k; ++c) {
            const double* x = p.data() + c * w;
            double gc = gamma[static_cast<std::size_t>(c)];
            double sum = 0.0;
            for (int j = 0; j + l1 < w; ++j) sum += x[j] * x[j + l1] * x[j + l2];
            model += gc * inv_l * sum;
            const double f = -s3 * gc * inv_l;
            for (int j = 0; j < w; ++j) {
                double d = 0.0;
                // x[j] appears as the base of the window starting at j, as the
                // l1-offset of the window at j-l1, and as the l2-offset of the
                // window at j-l2 (degenerate lags fold naturally below).
                if (l1 == l2) {
                    if (l1 == 0) {
                        d = 3.0 * x[j] * x[j];
                    } else {
                        if (j + l1 < w) d += x[j + l1] * x[j + l1];
                        if (j - l1 >= 0) d += 2.0 * x[j - l1] * x[j];
                    }
                } else if (l2 == 0) {
                    if (j + l1 < w) d += 2.0 * x[j] * x[j + l1];
                    if (j - l1 >= 0) d += x[j - l1] * x[j - l1];
                } else {
                    if (j + l1 < w) d += x[j + l1] * x[j + l2];
                    if (j - l1 >= 0) d += x[j - l1] * x[j - l1 + l2];
                    if (j - l2 >= 0 && j - l2 + l1 < w) d += x[j - l2] * x[j - l2 + l1];
                }
                jac(row, c * w + j) = f * d;
            }
            if (free_g) jac(row, k * w + c) = -s3 * gc * inv_l * sum;
        }
        r[row] = s3 * (value - model);
        ++row;
    }
}

inline double nls_cost_and_gradient(const nls_problem& prob, const Eigen::VectorXd& p,
                                    Eigen::VectorXd* grad = nullptr) {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    nls_residuals(prob, p, r, jac);
    if (grad) *grad = 2.0 * (jac.transpose() * r);
    return r.squaredNorm();
}

// Random multi-start initial point: signal entries standard normal, free
// density parameters t = 0 (gamma = 1).  Counters are partitioned by start
// index so starts are independent and order-free.
inline Eigen::VectorXd nls_random_start(const nls_problem& prob, std::uint64_t seed,
                                        int start_index) {
    counter_rng gen(seed, rng_stream::starts);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(prob.n_params());
    std::uint64_t base = static_cast<std::uint64_t>(start_index) << 24;
    for (int i = 0; i < prob.k * prob.w; ++i)
        p[i] = gen.gaussian(base + static_cast<std::uint64_t>(i));
    return p;
}

// Packs a parameter vector into component signals + densities.  The window
// width of the problem must equal the declared length for this to make sense.
inline mixture_model nls_unpack(const nls_problem& prob, const Eigen::VectorXd& p,
                                double noise_sigma) {
    if (prob.w != prob.l)
        throw validation_error("cannot unpack a wide-window parameter vector");
    mixture_model m;
    m.noise_sigma = noise_sigma;
    for (int c = 0; c < prob.k; ++c) {
        signal s;
        s.dim = 1;
        s.len = prob.l;
        s.values.assign(p.data() + c * prob.w, p.data() + (c + 1) * prob.w);
        m.signals.push_back(std::move(s));
        m.densities.push_back(prob.gammas_free()
                                  ? std::exp(p[prob.k * prob.w + c])
                                  : prob.fixed_gammas[static_cast<std::size_t>(c)]);
    }
    return m;
}

}  // namespace mtd
