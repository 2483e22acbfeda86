#pragma once
// Closed-form recovery for homogeneous (single-signal) observations.
//
// Signal from gamma-scaled moments: only i = 0 contributes to the extreme
// ratio, so g3[k, L-1] / g2[L-1] = x[k] (any common scale on the inputs
// cancels). When g2[L-1] is numerically zero the signal's support is shorter
// than its window; L shrinks until the extreme entry is nonzero, and the
// ratio then yields the shifted support.
//
// Density/noise for well-separated streams with E3 = a2_y[0] + 2*sum a2_y[l]:
//   known sigma:  gamma = L*a1_y^2 / (E3 - sigma^2)
//   both unknown: beta = gamma/L is a common root of two quadratics built
//     from the moment contractions E1..E5 below; sigma^2 = E3 - a1_y^2/beta.
// Poisson streams invert explicitly: the third-order debias needs no sigma,
// gamma = L * a1_y * g2[1] / S with
//   S = sum_{l=0..L-1} g3[1,l] + sum_{l=1..L-2} g3[l,l+1]
// (the double sum telescopes to (sum x)*A2[1]), and sigma^2 then follows from
// the second-order row.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/forward.hpp"

namespace mtd {

struct homo_result {
    signal x;
    double gamma = 0.0;
    double sigma2 = 0.0;
    int shrink_count = 0;
    double root_residual = 0.0;  // gap to the other quadratic's nearest root
                                 // (-1: that quadratic had no admissible root)
    std::string method;
    std::vector<std::string> notes;
};

inline signal recover_signal_direct(const std::vector<double>& g2,
                                    const std::vector<double>& g3,
                                    int* shrink_count = nullptr) {
    int l0 = static_cast<int>(g2.size());
    if (l0 < 1 || g3.size() != static_cast<size_t>(autocorr_set::tri_size(l0)))
        throw validation_error("recover_signal_direct: moment sizes inconsistent");
    double amax = 0.0;
    for (double v : g2) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) throw solve_error("all second-order moments vanish");
    int l = l0;
    while (l > 1 && std::abs(g2[l - 1]) <= 1e-10 * amax) --l;
    if (l == 1)
        throw solve_error("signal support could not be resolved (window shrank to 1)");
    if (shrink_count) *shrink_count = l0 - l;
    double denom = g2[l - 1];
    signal x;
    x.dim = 1;
    x.len = l;
    x.values.resize(l);
    for (int k = 0; k < l; ++k)
        x.values[k] = g3[autocorr_set::tri_index(l - 1, k)] / denom;
    return x;
}

namespace homo_detail {

inline double e3_total(const autocorr_set& acy) {
    double e3 = acy.a2[0];
    for (int l = 1; l < acy.len; ++l) e3 += 2.0 * acy.a2[l];
    return e3;
}

inline void require_nonzero_mean(const autocorr_set& acy) {
    double scale = std::sqrt(std::max(std::abs(acy.a2[0]), 1e-300));
    if (std::abs(acy.a1) < 1e-12 * scale)
        throw solve_error(
            "observation mean is numerically zero; the density is not "
            "identifiable from these moments");
}

inline std::vector<double> real_roots_quadratic(double a, double b, double c) {
    double scale = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (scale == 0.0) return {};
    if (std::abs(a) <= 1e-14 * scale) {
        if (std::abs(b) <= 1e-14 * scale) return {};
        return {-c / b};
    }
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
        if (disc > -1e-12 * (b * b + std::abs(4.0 * a * c))) return {-b / (2.0 * a)};
        return {};
    }
    double q = -0.5 * (b + (b >= 0.0 ? 1.0 : -1.0) * std::sqrt(disc));
    if (q == 0.0) return {0.0};
    return {q / a, c / q};
}

// Moments of a recovered (possibly shrunk) signal renormalized to the
// declared window length: zero-pad and take per-L sums. Shift invariance of
// zero-padded correlations makes the placement irrelevant.
inline signal_moments padded_ac(const signal& x, int len) {
    signal xp;
    xp.dim = 1;
    xp.len = len;
    xp.values.assign(len, 0.0);
    for (int i = 0; i < x.len; ++i) xp.values[i] = x.values[i];
    return signal_ac(xp);
}

}  // namespace homo_detail

inline double gamma_from_sigma(const autocorr_set& acy, double sigma2) {
    if (acy.dim != 1) throw validation_error("gamma_from_sigma: 1-D moments expected");
    homo_detail::require_nonzero_mean(acy);
    double denom = homo_detail::e3_total(acy) - sigma2;
    if (!(denom > 0.0))
        throw solve_error("E3 - sigma^2 is not positive; moments are inconsistent "
                          "with the given noise level");
    return acy.len * acy.a1 * acy.a1 / denom;
}

inline double sigma2_from_gamma(const autocorr_set& acy, double gamma) {
    if (acy.dim != 1) throw validation_error("sigma2_from_gamma: 1-D moments expected");
    if (!(gamma > 0.0)) throw validation_error("gamma must be > 0");
    double s2 = homo_detail::e3_total(acy) - acy.len * acy.a1 * acy.a1 / gamma;
    double tol = 1e-8 * std::abs(acy.a2[0]);
    if (s2 < -tol)
        throw solve_error("estimated noise variance is negative beyond tolerance");
    return std::max(s2, 0.0);
}

struct gamma_sigma_estimate {
    double gamma = 0.0;
    double sigma2 = 0.0;
    double root_residual = 0.0;
    std::vector<std::string> notes;
};

inline gamma_sigma_estimate solve_gamma_sigma_separated(const autocorr_set& acy) {
    if (acy.dim != 1 || acy.order < 3)
        throw validation_error("solve_gamma_sigma_separated: 1-D order-3 moments expected");
    int l = acy.len;
    if (l < 3)
        throw validation_error("solve_gamma_sigma_separated: needs L >= 3");
    homo_detail::require_nonzero_mean(acy);
    double a1 = acy.a1;
    double e1 = a1 * acy.a2[0];
    double e2 = acy.a3_at(0, 0), e5 = acy.a3_at(0, 0);
    for (int j = 1; j < l; ++j) {
        double s = acy.a3_at(j, j) + acy.a3_at(0, j);
        e2 += s;
        e5 += 3.0 * s;
    }
    for (int i = 1; i < l; ++i)
        for (int j = i + 1; j < l; ++j) e5 += 6.0 * acy.a3_at(i, j);
    double e3 = homo_detail::e3_total(acy);
    double e4 = a1 * a1 * a1 / l;
    double qa = e2 - (2.0 * l + 1.0) * a1 * e3;
    double qb = -e1 + (2.0 * l + 1.0) * a1 * a1 * a1 + a1 * e3;
    double qc = -a1 * a1 * a1;
    double qd = e3 - e5 / ((6.0 * l - 3.0) * a1);
    double qe = -a1 * a1;
    double qf = l * e4 / ((6.0 * l - 3.0) * a1);
    auto r1 = homo_detail::real_roots_quadratic(qa, qb, qc);
    auto r2 = homo_detail::real_roots_quadratic(qd, qe, qf);

    // On exact moments the quadratics share a root; on sampled moments the
    // shared root splits by the sampling error, so no fixed agreement gate can
    // work.  Every admissible root of either quadratic is a candidate, the
    // forward residual of its fully reconstructed model ranks them, and the
    // gap to the other quadratic's nearest root is reported as a diagnostic.
    gamma_sigma_estimate best;
    double best_resid = -1.0;
    double s2_tol = 1e-8 * std::abs(acy.a2[0]);
    auto consider = [&](double beta, const std::vector<double>& other) {
        if (!(beta > 0.0)) return;
        double gamma = l * beta;
        double s2 = e3 - a1 * a1 / beta;
        if (s2 < -s2_tol) return;
        s2 = std::max(s2, 0.0);
        double resid = 0.0;
        try {
            debiased d = debias(acy, s2, placement_kind::well_separated);
            signal x = recover_signal_direct(d.gax.a2, d.gax.a3);
            autocorr_set pred = forward_separated(
                homo_detail::padded_ac(x, l), std::min(gamma, separated_density_cap(l)),
                std::sqrt(s2));
            resid = (pred.a1 - acy.a1) * (pred.a1 - acy.a1);
            for (int i = 0; i < l; ++i) {
                double dv = pred.a2[i] - acy.a2[i];
                resid += dv * dv;
            }
            for (size_t i = 0; i < pred.a3.size(); ++i) {
                double dv = pred.a3[i] - acy.a3[i];
                resid += dv * dv;
            }
        } catch (const std::exception&) {
            resid = 1e300;
        }
        if (best_resid >= 0.0 && resid >= best_resid) return;
        best_resid = resid;
        best.gamma = gamma;
        best.sigma2 = s2;
        best.root_residual = -1.0;
        for (double b : other)
            if (best.root_residual < 0.0 || std::abs(beta - b) < best.root_residual)
                best.root_residual = std::abs(beta - b);
    };
    for (double b : r1) consider(b, r2);
    for (double b : r2) consider(b, r1);
    if (best_resid < 0.0)
        throw solve_error(
            "neither moment quadratic has an admissible positive root; the "
            "moments are not consistent with a well-separated homogeneous model");
    if (best.root_residual < 0.0)
        best.notes.push_back(
            "the second moment quadratic had no admissible root; the density "
            "estimate rests on one quadratic only");
    else if (best.root_residual > 1e-3 * best.gamma / l)
        best.notes.push_back(
            "the moment quadratics agree only loosely; treat gamma and sigma^2 "
            "as sampling-noise limited");
    if (best.gamma > separated_density_cap(l) + 1e-9)
        best.notes.push_back("estimated density exceeds the well-separated cap");
    return best;
}

// Full homogeneous pipeline: estimate (gamma, sigma^2) as needed, debias,
// and read the signal off the moment ratios.
inline homo_result solve_homo(const autocorr_set& acy, placement_kind kind,
                              std::optional<double> sigma2_known = std::nullopt) {
    if (acy.dim != 1 || acy.order < 3)
        throw validation_error("solve_homo: 1-D order-3 moments expected");
    int l = acy.len;
    homo_result out;
    if (kind == placement_kind::well_separated) {
        if (sigma2_known) {
            out.sigma2 = *sigma2_known;
            out.gamma = gamma_from_sigma(acy, out.sigma2);
            out.method = "separated, sigma given";
        } else {
            auto gs = solve_gamma_sigma_separated(acy);
            out.gamma = gs.gamma;
            out.sigma2 = gs.sigma2;
            out.root_residual = gs.root_residual;
            out.notes = gs.notes;
            out.method = "separated, quadratic common root";
        }
        debiased d = debias(acy, out.sigma2, kind);
        out.x = recover_signal_direct(d.gax.a2, d.gax.a3, &out.shrink_count);
        return out;
    }
    // Poisson: explicit inversion, sigma-free where possible.
    homo_detail::require_nonzero_mean(acy);
    if (l < 2) throw validation_error("poisson inversion needs L >= 2");
    double m = acy.a1;
    debiased d0 = debias(acy, std::nullopt, kind);  // fills a3 fully, a2 for l >= 1
    const std::vector<double>& g3 = d0.gax.a3;
    std::vector<double> g2 = d0.gax.a2;
    auto g3_at = [&](int l1, int l2) {
        auto [b, a] = acy.canonical_pair(l1, l2);
        return g3[autocorr_set::tri_index(b, a)];
    };
    double s = 0.0;
    for (int t = 0; t < l; ++t) s += g3_at(1, t);
    for (int t = 1; t + 1 < l; ++t) s += g3_at(t, t + 1);
    double g2_1 = g2[1];
    if (std::abs(s) < 1e-14 * std::max(1.0, std::abs(m)))
        throw solve_error("third-order contraction vanishes; density not identifiable");
    out.gamma = l * m * g2_1 / s;
    if (!(out.gamma > 0.0))
        throw solve_error("estimated density is not positive; moments inconsistent");
    if (sigma2_known) {
        out.sigma2 = *sigma2_known;
        out.method = "poisson explicit, sigma given";
    } else {
        double e3 = homo_detail::e3_total(acy);
        double s2 = e3 - l * m * m / out.gamma - (2.0 * l - 1.0) * m * m;
        double tol = 1e-8 * std::abs(acy.a2[0]);
        if (s2 < -tol)
            throw solve_error("estimated noise variance is negative beyond tolerance");
        out.sigma2 = std::max(s2, 0.0);
        out.method = "poisson explicit";
    }
    g2[0] = acy.a2[0] - m * m - out.sigma2;
    out.x = recover_signal_direct(g2, g3, &out.shrink_count);
    return out;
}

inline void to_json(json& j, const homo_result& r) {
    j = json{{"format", "mtd.homo"},       {"format_version", 1},
             {"x", r.x},                   {"gamma", r.gamma},
             {"sigma2", r.sigma2},         {"shrink_count", r.shrink_count},
             {"root_residual", r.root_residual}, {"method", r.method},
             {"notes", r.notes}};
}

}  // namespace mtd
