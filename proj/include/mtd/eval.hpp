#pragma once
// Evaluation utilities: estimate-to-truth alignment, identifiability counting,
// the sample-complexity experiment harness, and the (K, L) phase diagram.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/acc.hpp"
#include "mtd/core.hpp"
#include "mtd/forward.hpp"
#include "mtd/hetero.hpp"
#include "mtd/phase2d.hpp"
#include "mtd/synth.hpp"

namespace mtd {

// ----------------------------------------------------------- alignment ----

struct alignment_result {
    double max_rel_error = 0.0;        // min-max assignment objective
    std::vector<double> per_signal;    // error of est[i] against its match
    std::vector<int> permutation;      // est[i] matched to truth[permutation[i]]
    std::vector<int> shifts;           // 1-D shift applied to est[i] (2-D: 0)
};

namespace eval_detail {

// Relative 2-norm error of a shifted estimate against the truth; entries
// shifted outside the window compare against zero.
inline double shifted_rel_error(const signal& est, const signal& truth, int s) {
    const int l = truth.len;
    double d2 = 0.0, t2 = 0.0;
    for (int t = 0; t < l; ++t) {
        double tv = truth.values[static_cast<std::size_t>(t)];
        double ev = (t - s >= 0 && t - s < est.len)
                        ? est.values[static_cast<std::size_t>(t - s)]
                        : 0.0;
        d2 += (ev - tv) * (ev - tv);
        t2 += tv * tv;
    }
    return std::sqrt(d2) / (t2 > 0.0 ? std::sqrt(t2) : 1.0);
}

inline double pair_cost(const signal& est, const signal& truth, int max_shift,
                        int* best_shift) {
    if (truth.dim == 2) {
        if (best_shift) *best_shift = 0;
        return align_2d(est, truth).rel_error;
    }
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int s = -max_shift; s <= max_shift; ++s) {
        double e = shifted_rel_error(est, truth, s);
        if (e < best) {
            best = e;
            arg = s;
        }
    }
    if (best_shift) *best_shift = arg;
    return best;
}

}  // namespace eval_detail

// Matches estimated signals to ground truth, minimising the worst per-pair
// relative error over all assignments (and, for 1-D, over shifts up to
// max_shift).  Exact over-subsets dynamic program, fine for K well beyond
// anything solvable here.
inline alignment_result aligned_error(const std::vector<signal>& est,
                                      const std::vector<signal>& truth,
                                      int max_shift = 0) {
    const int k = static_cast<int>(truth.size());
    if (static_cast<int>(est.size()) != k || k == 0)
        throw validation_error("estimate and truth lists must match and be nonempty");
    if (k > 24) throw validation_error("too many components to align");
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(k),
                                          std::vector<double>(static_cast<std::size_t>(k)));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                eval_detail::pair_cost(est[static_cast<std::size_t>(i)],
                                       truth[static_cast<std::size_t>(j)], max_shift, nullptr);

    // f[S] = least achievable worst error assigning est[0..popcount(S)) to the
    // truth subset S; choice[S] records the truth index taken by the last one.
    const std::size_t full = (std::size_t{1} << k) - 1;
    std::vector<double> f(full + 1, std::numeric_limits<double>::infinity());
    std::vector<int> choice(full + 1, -1);
    f[0] = 0.0;
    for (std::size_t s = 1; s <= full; ++s) {
        int i = __builtin_popcountll(s) - 1;
        for (int j = 0; j < k; ++j) {
            if (!(s >> j & 1)) continue;
            double v = std::max(f[s ^ (std::size_t{1} << j)],
                                cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            if (v < f[s]) {
                f[s] = v;
                choice[s] = j;
            }
        }
    }
    alignment_result out;
    out.max_rel_error = f[full];
    out.permutation.assign(static_cast<std::size_t>(k), -1);
    std::size_t s = full;
    for (int i = k - 1; i >= 0; --i) {
        int j = choice[s];
        out.permutation[static_cast<std::size_t>(i)] = j;
        s ^= std::size_t{1} << j;
    }
    out.per_signal.resize(static_cast<std::size_t>(k));
    out.shifts.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        int sh = 0;
        out.per_signal[static_cast<std::size_t>(i)] = eval_detail::pair_cost(
            est[static_cast<std::size_t>(i)],
            truth[static_cast<std::size_t>(out.permutation[static_cast<std::size_t>(i)])],
            max_shift, &sh);
        out.shifts[static_cast<std::size_t>(i)] = sh;
    }
    return out;
}

// -------------------------------------------------- identifiability count --

// Number of distinct informative moment equations available at length L, by
// the convention that each usable first/second/third-order statistic counts
// once: third-order cells contaminated by noise terms are counted over the
// full (l1, l2) square, noise-free cells once per canonical triangle cell.
inline std::int64_t count_equations(int l, bool sigma_known) {
    if (l < 1) throw validation_error("length must be positive");
    std::int64_t ll = l;
    return sigma_known ? ll * (ll + 5) / 2 : ll * (ll - 1) / 2 + 1;
}

// The same count by explicit enumeration (cross-check for the closed forms).
inline std::int64_t count_equations_enumerated(int l, bool sigma_known) {
    if (l < 1) throw validation_error("length must be positive");
    std::int64_t n = 1;  // first order
    for (int lag = sigma_known ? 0 : 1; lag < l; ++lag) ++n;
    for (int l1 = 2; l1 < l; ++l1)
        for (int l2 = 1; l2 < l1; ++l2) ++n;  // noise-free triangle cells
    if (sigma_known) {
        for (int l1 = 0; l1 < l; ++l1)
            for (int l2 = 0; l2 < l; ++l2)
                if (l1 == 0 || l2 == 0 || l1 == l2) ++n;
    }
    return n;
}

// Largest K with K * (L + 1) unknowns covered by the equation count.
inline int k_bound(int l, bool sigma_known) {
    return static_cast<int>(count_equations(l, sigma_known) / (l + 1));
}

// ------------------------------------------------- sample-complexity run --

struct exp1_config {
    mixture_model model;
    placement_kind kind = placement_kind::well_separated;
    std::vector<std::int64_t> checkpoints;  // ascending observation lengths
    std::vector<std::uint64_t> seeds;
    std::vector<double> fixed_gammas;  // empty = estimate densities
    int starts = 10;
    std::uint64_t solver_seed = 1;
    junction_policy policy = junction_policy::exact;
    std::int64_t segment_len = 10'000'000;
    int max_shift = 0;
    int threads = 1;
    tr_options tr;
};

struct exp1_row {
    std::uint64_t seed = 0;
    std::int64_t n = 0;
    double max_rel_error = 0.0;
    std::vector<double> per_signal;
    double best_cost = 0.0;
    double seconds = 0.0;
};

struct exp1_result {
    std::vector<std::int64_t> checkpoints;
    std::vector<exp1_row> rows;          // seed-major, checkpoint order within
    std::vector<double> median_error;    // per checkpoint, across seeds

    std::string csv() const {
        std::ostringstream os;
        os.setf(std::ios::scientific);
        os.precision(9);
        std::size_t nsig = rows.empty() ? 0 : rows.front().per_signal.size();
        os << "seed,n,max_rel_error";
        for (std::size_t i = 0; i < nsig; ++i) os << ",err_" << i;
        os << ",best_cost,seconds\n";
        for (const exp1_row& r : rows) {
            os << r.seed << ',' << r.n << ',' << r.max_rel_error;
            for (double e : r.per_signal) os << ',' << e;
            os << ',' << r.best_cost << ',' << r.seconds << '\n';
        }
        for (std::size_t c = 0; c < checkpoints.size(); ++c)
            os << "median," << checkpoints[c] << ',' << median_error[c] << ",,\n";
        return os.str();
    }
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw validation_error("median of an empty list");
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Log-log slope between the first and last checkpoint of a decay curve.
inline double log_log_endpoint_slope(const std::vector<std::int64_t>& ns,
                                     const std::vector<double>& errs) {
    if (ns.size() != errs.size() || ns.size() < 2)
        throw validation_error("need at least two checkpoints for a slope");
    return (std::log10(errs.back()) - std::log10(errs.front())) /
           (std::log10(static_cast<double>(ns.back())) -
            std::log10(static_cast<double>(ns.front())));
}

// Error-versus-N study: for each seed, stream one synthetic observation of the
// largest length, snapshot the running autocorrelations at each checkpoint
// prefix, and solve from each snapshot.  A checkpoint snapshot is taken at the
// first segment boundary reaching it, so checkpoints should be multiples of
// segment_len for exact prefix lengths (actual lengths are reported).
inline exp1_result experiment1(const exp1_config& cfg) {
    if (cfg.checkpoints.empty() || cfg.seeds.empty())
        throw validation_error("checkpoints and seeds must be nonempty");
    if (!std::is_sorted(cfg.checkpoints.begin(), cfg.checkpoints.end()))
        throw validation_error("checkpoints must be ascending");
    const int l = cfg.model.len();
    const int k = cfg.model.k();
    const std::int64_t n_max = cfg.checkpoints.back();
    exp1_result out;
    out.checkpoints = cfg.checkpoints;

    for (std::uint64_t seed : cfg.seeds) {
        observation_stream ys = [&] {
            if (cfg.kind == placement_kind::poisson)
                return observation_stream::poisson(cfg.model, n_max, seed, cfg.segment_len);
            std::int64_t occ = std::llround(cfg.model.total_density() *
                                            static_cast<double>(n_max) / l);
            return observation_stream::well_separated(cfg.model, n_max, occ, seed,
                                                      cfg.segment_len);
        }();
        accumulator acc(l, 3, cfg.policy);
        std::vector<double> buf;
        std::size_t next_cp = 0;
        std::int64_t n_acc = 0;
        for (std::int64_t j = 0; j < ys.segment_count() && next_cp < cfg.checkpoints.size();
             ++j) {
            ys.render_segment(j, buf);
            acc.accumulate_segment(buf);
            n_acc += static_cast<std::int64_t>(buf.size());
            while (next_cp < cfg.checkpoints.size() && n_acc >= cfg.checkpoints[next_cp]) {
                autocorr_set ac = acc.finalize();
                hetero_options opt;
                opt.starts = cfg.starts;
                opt.seed = rng_detail::mix64(cfg.solver_seed + rng_detail::mix64(seed) +
                                             0xF4243ull * static_cast<std::uint64_t>(next_cp));
                opt.fixed_gammas = cfg.fixed_gammas;
                opt.kind = cfg.kind;
                opt.threads = cfg.threads;
                opt.tr = cfg.tr;
                auto t0 = std::chrono::steady_clock::now();
                solve_report rep = solve_hetero(ac, k, opt);
                auto t1 = std::chrono::steady_clock::now();
                alignment_result al =
                    aligned_error(rep.estimates.signals, cfg.model.signals, cfg.max_shift);
                exp1_row row;
                row.seed = seed;
                row.n = n_acc;
                row.max_rel_error = al.max_rel_error;
                row.per_signal = al.per_signal;
                row.best_cost = rep.best_cost;
                row.seconds = std::chrono::duration<double>(t1 - t0).count();
                out.rows.push_back(std::move(row));
                ++next_cp;
            }
        }
        if (next_cp != cfg.checkpoints.size())
            throw solve_error("observation too short to reach every checkpoint");
    }
    for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
        std::vector<double> errs;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
            errs.push_back(out.rows[s * cfg.checkpoints.size() + c].max_rel_error);
        out.median_error.push_back(median_of(std::move(errs)));
    }
    return out;
}

// ------------------------------------------------------- phase diagram ----

struct phase_cell {
    int k = 0, l = 0;
    double success_rate = 0.0;      // fraction of starts reaching ~zero cost
    double worst_error = 0.0;       // worst aligned error among successes (1 if none)
    double median_log10_time = 0.0; // per-start wall time, log10 seconds
};

struct phase_diagram_options {
    int starts = 50;
    std::uint64_t seed = 1;
    double success_cost = 1e-16;
    double endpoint_min = 0.3;
    int threads = 1;
    tr_options tr;
};

// Exact-moment landscape study on a (K, L) grid: equal fixed densities 1/K,
// fresh random truth per cell, multi-start two-stage solves against the
// noise-free targets.
inline std::vector<phase_cell> phase_diagram(const std::vector<int>& ks,
                                             const std::vector<int>& ls,
                                             const phase_diagram_options& opt) {
    std::vector<phase_cell> cells;
    for (int k : ks)
        for (int l : ls) {
            if (k < 1 || l < 3) throw validation_error("need k >= 1 and l >= 3");
            std::uint64_t cs = rng_detail::mix64(
                opt.seed + rng_detail::GOLDEN * ((static_cast<std::uint64_t>(k) << 32) |
                                                 static_cast<std::uint64_t>(l)));
            std::vector<signal> truth;
            std::vector<signal_moments> comps;
            std::vector<double> gammas(static_cast<std::size_t>(k),
                                       1.0 / static_cast<double>(k));
            for (int c = 0; c < k; ++c) {
                truth.push_back(make_random_signal(1, l, cs, c, false, opt.endpoint_min));
                comps.push_back(signal_ac(truth.back()));
            }
            signal_moments gax = mix_ac(gammas, comps);
            nls_problem wide = nls_problem::from_moments(gax, k, 2 * l - 1);
            nls_problem fin = nls_problem::from_moments(gax, k, l);
            wide.fixed_gammas = gammas;
            fin.fixed_gammas = gammas;
            solve_report rep = two_stage_solve(wide, fin, opt.starts, cs, opt.tr, 0.0,
                                               opt.threads);
            phase_cell cell;
            cell.k = k;
            cell.l = l;
            int succ = 0;
            double worst = 0.0;
            for (std::size_t s = 0; s < rep.per_start.size(); ++s) {
                if (rep.per_start[s].final_cost < opt.success_cost) {
                    ++succ;
                    alignment_result al =
                        aligned_error(rep.per_start_estimates[s].signals, truth, 0);
                    worst = std::max(worst, al.max_rel_error);
                }
            }
            cell.success_rate = static_cast<double>(succ) / opt.starts;
            cell.worst_error = succ > 0 ? worst : 1.0;
            std::vector<double> times = rep.per_start_seconds;
            for (double& t : times) t = std::log10(std::max(t, 1e-9));
            cell.median_log10_time = median_of(std::move(times));
            cells.push_back(cell);
        }
    return cells;
}

inline std::string phase_diagram_csv(const std::vector<phase_cell>& cells) {
    std::ostringstream os;
    os.setf(std::ios::scientific);
    os.precision(9);
    os << "k,l,success_rate,worst_error,median_log10_time\n";
    for (const phase_cell& c : cells)
        os << c.k << ',' << c.l << ',' << c.success_rate << ',' << c.worst_error << ','
           << c.median_log10_time << '\n';
    return os.str();
}

}  // namespace mtd
