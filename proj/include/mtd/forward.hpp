#pragma once
// Population autocorrelations: per-signal moments a^q(x) (normalized by the
// signal length), mixture weighting, forward maps from a mixture model to the
// observation moments, and the debias inversions back to gamma-scaled signal
// moments.
//
// Well-separated observations (zero-padded convention, gamma = density):
//   a1_y          = gamma*a1_x
//   a2_y[l]       = gamma*a2_x[l] + sigma^2*d[l]
//   a3_y[l1,l2]   = gamma*a3_x[l1,l2] + sigma^2*gamma*a1_x*(d[l1]+d[l2]+d[l1-l2])
// Poisson placements add the mean terms (m = gamma*a1_x):
//   a2_y[l]      += m^2
//   a3_y[l1,l2]  += m^3 + m*(gamma*a2_x[l1] + gamma*a2_x[l2] + gamma*a2_x[l1-l2])
// In the Poisson third-order debias the sigma^2 deltas cancel exactly once the
// raw observed a2_y values are used, so that inversion needs no sigma.

#include <optional>
#include <vector>

#include "mtd/core.hpp"

namespace mtd {

struct signal_moments {
    int len = 0;
    double a1 = 0.0;
    std::vector<double> a2;  // l = 0..len-1
    std::vector<double> a3;  // canonical triangle, empty if order < 3
};

inline signal_moments signal_ac(const signal& x, int order = 3) {
    if (x.dim != 1) throw validation_error("signal_ac expects a 1-D signal");
    int l = x.len;
    const double* v = x.values.data();
    signal_moments m;
    m.len = l;
    double s = 0.0;
    for (int i = 0; i < l; ++i) s += v[i];
    m.a1 = s / l;
    m.a2.assign(l, 0.0);
    for (int d = 0; d < l; ++d) {
        double acc = 0.0;
        for (int i = 0; i + d < l; ++i) acc += v[i] * v[i + d];
        m.a2[d] = acc / l;
    }
    if (order >= 3) {
        m.a3.assign(autocorr_set::tri_size(l), 0.0);
        for (int l1 = 0; l1 < l; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                double acc = 0.0;
                for (int i = 0; i + l1 < l; ++i) acc += v[i] * v[i + l1] * v[i + l2];
                m.a3[autocorr_set::tri_index(l1, l2)] = acc / l;
            }
    }
    return m;
}

// Mixture moments are the pi-weighted component moments.
inline signal_moments mix_ac(const std::vector<double>& weights,
                             const std::vector<signal_moments>& comps) {
    if (weights.size() != comps.size() || comps.empty())
        throw validation_error("mix_ac: weights and components must match and be nonempty");
    signal_moments m;
    m.len = comps[0].len;
    m.a2.assign(comps[0].a2.size(), 0.0);
    m.a3.assign(comps[0].a3.size(), 0.0);
    for (size_t k = 0; k < comps.size(); ++k) {
        const signal_moments& c = comps[k];
        if (c.len != m.len || c.a2.size() != m.a2.size() || c.a3.size() != m.a3.size())
            throw validation_error("mix_ac: component moment shapes differ");
        double w = weights[k];
        m.a1 += w * c.a1;
        for (size_t i = 0; i < m.a2.size(); ++i) m.a2[i] += w * c.a2[i];
        for (size_t i = 0; i < m.a3.size(); ++i) m.a3[i] += w * c.a3[i];
    }
    return m;
}

inline signal_moments model_mixture_ac(const mixture_model& m, int order = 3) {
    std::vector<signal_moments> comps;
    comps.reserve(m.signals.size());
    for (const auto& s : m.signals) comps.push_back(signal_ac(s, order));
    return mix_ac(m.mixing_weights(), comps);
}

// Number of delta terms hitting the canonical cell (l1 >= l2):
// d[l1] + d[l2] + d[l1-l2].
inline int delta_count(int l1, int l2) {
    if (l1 == 0 && l2 == 0) return 3;
    return (l2 == 0 || l1 == l2) ? 1 : 0;
}

inline autocorr_set forward_separated(const signal_moments& ax, double gamma, double sigma) {
    int l = ax.len;
    if (!(gamma > 0.0) || gamma > separated_density_cap(l) + 1e-12)
        throw validation_error("forward_separated: gamma must lie in (0, L/(2L-1)]");
    autocorr_set ac = autocorr_set::make_1d(l, ax.a3.empty() ? 2 : 3);
    double s2 = sigma * sigma;
    ac.a1 = gamma * ax.a1;
    for (int d = 0; d < l; ++d) ac.a2[d] = gamma * ax.a2[d] + (d == 0 ? s2 : 0.0);
    for (int l1 = 0; l1 < l && !ax.a3.empty(); ++l1)
        for (int l2 = 0; l2 <= l1; ++l2) {
            int t = autocorr_set::tri_index(l1, l2);
            ac.a3[t] = gamma * ax.a3[t] + s2 * gamma * ax.a1 * delta_count(l1, l2);
        }
    return ac;
}

inline autocorr_set forward_poisson(const signal_moments& ax, double gamma, double sigma) {
    int l = ax.len;
    if (!(gamma > 0.0)) throw validation_error("forward_poisson: gamma must be > 0");
    autocorr_set ac = autocorr_set::make_1d(l, ax.a3.empty() ? 2 : 3);
    double s2 = sigma * sigma;
    double m = gamma * ax.a1;
    ac.a1 = m;
    for (int d = 0; d < l; ++d)
        ac.a2[d] = gamma * ax.a2[d] + m * m + (d == 0 ? s2 : 0.0);
    for (int l1 = 0; l1 < l && !ax.a3.empty(); ++l1)
        for (int l2 = 0; l2 <= l1; ++l2) {
            int t = autocorr_set::tri_index(l1, l2);
            ac.a3[t] = gamma * ax.a3[t] + m * m * m +
                       m * gamma * (ax.a2[l1] + ax.a2[l2] + ax.a2[l1 - l2]) +
                       s2 * m * delta_count(l1, l2);
        }
    return ac;
}

// Debias result: gamma-scaled mixture moments plus knowledge flags. Entries
// whose noise bias cannot be removed without sigma keep the raw observed
// value and are flagged unknown.
struct debiased {
    signal_moments gax;
    bool a1_known = true;
    std::vector<char> a2_known;
    std::vector<char> a3_known;
    bool sigma_known = false;
    double sigma2 = 0.0;
};

inline debiased debias(const autocorr_set& acy, std::optional<double> sigma2,
                       placement_kind kind) {
    if (acy.dim != 1) throw validation_error("debias: 1-D autocorrelations expected");
    int l = acy.len;
    debiased d;
    d.sigma_known = sigma2.has_value();
    d.sigma2 = sigma2.value_or(0.0);
    if (d.sigma2 < 0.0) throw validation_error("debias: sigma^2 must be >= 0");
    d.gax.len = l;
    d.gax.a2.assign(l, 0.0);
    d.a2_known.assign(l, 1);
    bool has3 = acy.order >= 3 && !acy.a3.empty();
    if (has3) {
        d.gax.a3.assign(autocorr_set::tri_size(l), 0.0);
        d.a3_known.assign(d.gax.a3.size(), 1);
    }
    d.gax.a1 = acy.a1;
    if (kind == placement_kind::well_separated) {
        for (int i = 0; i < l; ++i) d.gax.a2[i] = acy.a2[i];
        if (d.sigma_known)
            d.gax.a2[0] -= d.sigma2;
        else
            d.a2_known[0] = 0;
        for (int l1 = 0; l1 < l && has3; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                int t = autocorr_set::tri_index(l1, l2);
                int c = delta_count(l1, l2);
                d.gax.a3[t] = acy.a3[t];
                if (c > 0) {
                    if (d.sigma_known)
                        d.gax.a3[t] -= d.sigma2 * acy.a1 * c;
                    else
                        d.a3_known[t] = 0;
                }
            }
    } else {
        double m = acy.a1;  // gamma * a1_x
        for (int i = 0; i < l; ++i) d.gax.a2[i] = acy.a2[i] - m * m;
        if (d.sigma_known)
            d.gax.a2[0] -= d.sigma2;
        else
            d.a2_known[0] = 0;
        // Third order: sigma cancels when raw a2_y values are used.
        for (int l1 = 0; l1 < l && has3; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                int t = autocorr_set::tri_index(l1, l2);
                d.gax.a3[t] = acy.a3[t] - m * m * m -
                              m * (acy.a2[l1] + acy.a2[l2] + acy.a2[l1 - l2] - 3.0 * m * m);
            }
    }
    return d;
}

// ------------------------------------------------------------------- 2-D --

// Direct (reference) linear autocorrelation of an h x w image over shifts
// |lr|,|lc| <= lmax-1, returned as an unnormalized (2*lmax-1)^2 grid in
// row-major order with (lr,lc) at ((lr+lmax-1)*(2*lmax-1) + lc+lmax-1).
inline std::vector<double> direct_ac2_2d(const double* img, int h, int w, int lmax) {
    int side = 2 * lmax - 1;
    std::vector<double> grid(static_cast<size_t>(side) * side, 0.0);
    for (int lr = -(lmax - 1); lr <= lmax - 1; ++lr)
        for (int lc = -(lmax - 1); lc <= lmax - 1; ++lc) {
            double acc = 0.0;
            for (int r = std::max(0, -lr); r < std::min(h, h - lr); ++r)
                for (int c = std::max(0, -lc); c < std::min(w, w - lc); ++c)
                    acc += img[static_cast<size_t>(r) * w + c] *
                           img[static_cast<size_t>(r + lr) * w + c + lc];
            grid[static_cast<size_t>(lr + lmax - 1) * side + lc + lmax - 1] = acc;
        }
    return grid;
}

// Population second-order moments of a 2-D signal, normalized per pixel.
inline std::vector<double> signal_ac_2d(const signal& x) {
    if (x.dim != 2) throw validation_error("signal_ac_2d expects a 2-D signal");
    auto grid = direct_ac2_2d(x.values.data(), x.len, x.len, x.len);
    double n = static_cast<double>(x.len) * x.len;
    for (double& g : grid) g /= n;
    return grid;
}

}  // namespace mtd
