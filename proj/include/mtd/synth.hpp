#pragma once
// Observation synthesis. A stream is constructed by drawing its occurrence
// manifest up front (positions + class labels) and rendering segments lazily:
// every noise sample comes from a counter at its absolute index and every
// placement draw from its own counter, so the rendered data is bit-identical
// for any segment length and any evaluation order.
//
// Placement models:
//  - well_separated (1-D): occurrence starts are uniform on [0, N-2L+1],
//    accepted when every pairwise start distance is >= 2L-1 (so windows of
//    span <= L-1 never touch two occurrences, and the last occurrence is
//    followed by >= L-1 free samples). Rejection sampling with a hard cap of
//    100x the target count of draws.
//  - poisson (1-D): an independent Poisson count with rate gamma/L at every
//    start position in [0, N-L]; occurrences may overlap and add.
//  - 2-D observations: a Poisson-distributed number of occurrences per
//    observation, separated by the l-infinity rule
//    max(|dr|,|dc|) >= 2L-1 and kept >= L-1 away from the far borders.
//
// Class labels are i.i.d. from the mixing weights pi_k = gamma_k / gamma.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mtd/acc.hpp"
#include "mtd/core.hpp"
#include "mtd/parallel.hpp"
#include "mtd/rng.hpp"

namespace mtd {

struct occurrence {
    std::int64_t obs = 0;  // observation index (2-D streams), else 0
    std::int64_t r = 0;    // start position (1-D) or start row (2-D)
    std::int64_t c = 0;    // start column (2-D), else 0
    int cls = 0;           // component index
};

class observation_stream {
  public:
    static observation_stream well_separated(const mixture_model& m, std::int64_t n,
                                             std::int64_t occurrences, std::uint64_t seed,
                                             std::int64_t segment_len = 10'000'000) {
        validate_or_throw(m, placement_kind::well_separated);
        if (m.dim() != 1) throw validation_error("well_separated: 1-D model expected");
        observation_stream s(m, placement_kind::well_separated, seed);
        int l = m.len();
        s.init_1d(n, segment_len);
        if (occurrences < 0) throw validation_error("occurrence count must be >= 0");
        std::int64_t sep = 2 * static_cast<std::int64_t>(l) - 1;
        std::int64_t max_start = n - sep;
        std::int64_t capacity = max_start < 0 ? 0 : max_start / sep + 1;
        if (occurrences > capacity)
            throw validation_error(
                "target occurrence count " + std::to_string(occurrences) +
                " exceeds the well-separated capacity " + std::to_string(capacity) +
                " for N=" + std::to_string(n) + ", L=" + std::to_string(l) +
                " (density cap L/(2L-1) = " + std::to_string(separated_density_cap(l)) + ")");
        counter_rng place(seed, rng_stream::placement);
        std::set<std::int64_t> pos;
        std::uint64_t attempts = 0;
        std::uint64_t cap = 100 * static_cast<std::uint64_t>(occurrences);
        while (static_cast<std::int64_t>(pos.size()) < occurrences) {
            if (attempts >= cap)
                throw validation_error(
                    "placement rejection cap exceeded (" + std::to_string(attempts) +
                    " draws for " + std::to_string(occurrences) +
                    " occurrences); lower the density or enlarge N");
            std::int64_t p =
                static_cast<std::int64_t>(place.uniform_int(max_start + 1, attempts));
            ++attempts;
            auto nxt = pos.lower_bound(p);
            if (nxt != pos.end() && *nxt - p < sep) continue;
            if (nxt != pos.begin() && p - *std::prev(nxt) < sep) continue;
            pos.insert(p);
        }
        counter_rng lab(seed, rng_stream::labels);
        auto pi = m.densities;
        std::uint64_t j = 0;
        for (std::int64_t p : pos) {
            int cls = lab.categorical(pi.data(), static_cast<int>(pi.size()), j);
            s.manifest_.push_back({0, p, 0, cls});
            ++j;
        }
        return s;
    }

    static observation_stream poisson(const mixture_model& m, std::int64_t n,
                                      std::uint64_t seed,
                                      std::int64_t segment_len = 10'000'000) {
        validate_or_throw(m, placement_kind::poisson);
        if (m.dim() != 1) throw validation_error("poisson: 1-D model expected");
        observation_stream s(m, placement_kind::poisson, seed);
        int l = m.len();
        s.init_1d(n, segment_len);
        double lambda = m.total_density() / l;
        counter_rng place(seed, rng_stream::placement);
        counter_rng lab(seed, rng_stream::labels);
        auto pi = m.densities;
        for (std::int64_t i = 0; i + l <= n; ++i) {
            int cnt = place.poisson(lambda, static_cast<std::uint64_t>(i));
            for (int t = 0; t < cnt; ++t) {
                int cls = lab.categorical(pi.data(), static_cast<int>(pi.size()),
                                          static_cast<std::uint64_t>(i) * 64 + t);
                s.manifest_.push_back({0, i, 0, cls});
            }
        }
        return s;
    }

    static observation_stream grid_2d(const mixture_model& m, int h, int w,
                                      std::int64_t n_obs, double mean_occurrences,
                                      std::uint64_t seed) {
        validate_or_throw(m, placement_kind::poisson);  // no 1-D density cap in 2-D
        if (m.dim() != 2) throw validation_error("grid_2d: 2-D model expected");
        int l = m.len();
        if (h < 2 * l - 1 || w < 2 * l - 1)
            throw validation_error("observation must be at least (2L-1) per axis");
        if (n_obs < 1) throw validation_error("need at least one observation");
        if (!(mean_occurrences >= 0.0))
            throw validation_error("mean occurrence count must be >= 0");
        observation_stream s(m, placement_kind::well_separated, seed);
        s.dim_ = 2;
        s.h_ = h;
        s.w_ = w;
        s.n_obs_ = n_obs;
        s.n_ = static_cast<std::int64_t>(h) * w * n_obs;
        counter_rng counts(seed, rng_stream::counts);
        counter_rng place(seed, rng_stream::placement);
        counter_rng lab(seed, rng_stream::labels);
        auto pi = m.densities;
        std::int64_t sep = 2 * static_cast<std::int64_t>(l) - 1;
        s.obs_first_.assign(n_obs + 1, 0);
        for (std::int64_t ob = 0; ob < n_obs; ++ob) {
            s.obs_first_[ob] = static_cast<std::int64_t>(s.manifest_.size());
            int want = counts.poisson(mean_occurrences, static_cast<std::uint64_t>(ob));
            std::vector<std::pair<std::int64_t, std::int64_t>> acc;
            std::uint64_t attempts = 0;
            std::uint64_t cap = 100 * static_cast<std::uint64_t>(std::max(want, 1));
            std::uint64_t base = static_cast<std::uint64_t>(ob) << 22;
            while (static_cast<int>(acc.size()) < want) {
                if (attempts >= cap)
                    throw validation_error(
                        "2-D placement rejection cap exceeded in observation " +
                        std::to_string(ob) + "; lower the density or enlarge the field");
                std::int64_t r = static_cast<std::int64_t>(
                    place.uniform_int(h - sep + 1, base + 2 * attempts));
                std::int64_t c = static_cast<std::int64_t>(
                    place.uniform_int(w - sep + 1, base + 2 * attempts + 1));
                ++attempts;
                bool ok = true;
                for (auto& q : acc)
                    if (std::max(std::abs(q.first - r), std::abs(q.second - c)) < sep) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;
                acc.push_back({r, c});
            }
            std::sort(acc.begin(), acc.end());
            for (size_t i = 0; i < acc.size(); ++i) {
                int cls = lab.categorical(pi.data(), static_cast<int>(pi.size()),
                                          base + i);
                s.manifest_.push_back({ob, acc[i].first, acc[i].second, cls});
            }
        }
        s.obs_first_[n_obs] = static_cast<std::int64_t>(s.manifest_.size());
        return s;
    }

    int dim() const { return dim_; }
    std::int64_t n() const { return n_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::int64_t n_obs() const { return n_obs_; }
    std::uint64_t seed() const { return seed_; }
    std::int64_t segment_len() const { return seg_len_; }
    placement_kind kind() const { return kind_; }
    const mixture_model& model() const { return model_; }
    const std::vector<occurrence>& manifest() const { return manifest_; }

    std::int64_t segment_count() const { return dim_ == 2 ? n_obs_ : nseg_; }
    std::int64_t segment_offset(std::int64_t j) const { return j * seg_len_; }
    std::int64_t segment_length(std::int64_t j) const {
        if (dim_ == 2) return static_cast<std::int64_t>(h_) * w_;
        return j == nseg_ - 1 ? n_ - j * seg_len_ : seg_len_;
    }

    void render_segment(std::int64_t j, std::vector<double>& out) const {
        if (j < 0 || j >= segment_count()) throw std::out_of_range("segment index");
        if (dim_ == 2) {
            render_observation(j, out);
            return;
        }
        std::int64_t off = segment_offset(j);
        std::int64_t len = segment_length(j);
        out.assign(len, 0.0);
        counter_rng noise(seed_, rng_stream::noise);
        double sig = model_.noise_sigma;
        if (sig > 0.0)
            for (std::int64_t i = 0; i < len; ++i)
                out[i] = sig * noise.gaussian(static_cast<std::uint64_t>(off + i));
        int l = model_.len();
        auto it = std::lower_bound(manifest_.begin(), manifest_.end(), off - l + 1,
                                   [](const occurrence& o, std::int64_t v) { return o.r < v; });
        for (; it != manifest_.end() && it->r < off + len; ++it) {
            const auto& x = model_.signals[it->cls].values;
            std::int64_t lo = std::max(it->r, off);
            std::int64_t hi = std::min(it->r + l, off + len);
            for (std::int64_t i = lo; i < hi; ++i) out[i - off] += x[i - it->r];
        }
    }

    std::vector<double> segment(std::int64_t j) const {
        std::vector<double> out;
        render_segment(j, out);
        return out;
    }

  private:
    observation_stream(const mixture_model& m, placement_kind k, std::uint64_t seed)
        : model_(m), kind_(k), seed_(seed) {}

    void init_1d(std::int64_t n, std::int64_t segment_len) {
        int l = model_.len();
        if (n < l) throw validation_error("stream shorter than the signal length");
        if (segment_len < l)
            throw validation_error("segment length must be >= the signal length");
        n_ = n;
        seg_len_ = segment_len;
        // Segments of seg_len_, except a short remainder (< L) merges into the
        // final segment so every segment is >= L long.
        nseg_ = n / seg_len_;
        std::int64_t rem = n % seg_len_;
        if (nseg_ == 0 || rem >= l) nseg_ += 1;
    }

    void render_observation(std::int64_t ob, std::vector<double>& out) const {
        std::int64_t npix = static_cast<std::int64_t>(h_) * w_;
        out.assign(npix, 0.0);
        counter_rng noise(seed_, rng_stream::noise);
        double sig = model_.noise_sigma;
        std::uint64_t base = static_cast<std::uint64_t>(ob) * npix;
        if (sig > 0.0)
            for (std::int64_t i = 0; i < npix; ++i)
                out[i] = sig * noise.gaussian(base + i);
        int l = model_.len();
        for (std::int64_t i = obs_first_[ob]; i < obs_first_[ob + 1]; ++i) {
            const occurrence& o = manifest_[i];
            const signal& x = model_.signals[o.cls];
            for (int r = 0; r < l; ++r)
                for (int c = 0; c < l; ++c)
                    out[(o.r + r) * w_ + o.c + c] += x.at2(r, c);
        }
    }

    mixture_model model_;
    placement_kind kind_;
    std::uint64_t seed_;
    int dim_ = 1;
    std::int64_t n_ = 0;
    std::int64_t seg_len_ = 0;
    std::int64_t nseg_ = 0;
    int h_ = 0, w_ = 0;
    std::int64_t n_obs_ = 0;
    std::vector<occurrence> manifest_;       // sorted by (obs, r, c)
    std::vector<std::int64_t> obs_first_;    // 2-D: manifest range per observation
};

// Accumulate a whole stream. Tasks are contiguous segment ranges; each range
// gets its own accumulator and the parts combine in stream order, so the
// result is independent of the thread count.
inline autocorr_set accumulate_stream(const observation_stream& ys, int order,
                                      junction_policy pol, int threads) {
    std::int64_t nseg = ys.segment_count();
    if (threads < 1) threads = 1;
    if (threads > nseg) threads = static_cast<int>(nseg);
    if (ys.dim() == 1) {
        int l = ys.model().len();
        std::vector<accumulator> parts(threads);
        parallel_for(threads, threads, [&](std::int64_t t) {
            accumulator acc(l, order, pol);
            std::vector<double> buf;
            std::int64_t lo = nseg * t / threads, hi = nseg * (t + 1) / threads;
            for (std::int64_t j = lo; j < hi; ++j) {
                ys.render_segment(j, buf);
                acc.accumulate_segment(buf);
            }
            parts[t] = std::move(acc);
        });
        accumulator total(l, order, pol);
        for (auto& p : parts) total.combine(p);
        return total.finalize();
    }
    if (order >= 3)
        throw unimplemented_error(
            "third-order accumulation for 2-D observations is unimplemented");
    int l = ys.model().len();
    std::vector<accumulator2d> parts(threads);
    parallel_for(threads, threads, [&](std::int64_t t) {
        accumulator2d acc(l, order);
        std::vector<double> buf;
        std::int64_t lo = nseg * t / threads, hi = nseg * (t + 1) / threads;
        for (std::int64_t j = lo; j < hi; ++j) {
            ys.render_segment(j, buf);
            acc.accumulate_observation(buf.data(), ys.h(), ys.w());
        }
        parts[t] = std::move(acc);
    });
    accumulator2d total(l, order);
    for (auto& p : parts) total.combine(p);
    return total.finalize();
}

// Random component signals for model generation and solver experiments:
// i.i.d. standard normal entries; optionally recentred to zero mean (2-D
// retrieval) or with endpoints pushed away from zero (1-D direct recovery).
inline signal make_random_signal(int dim, int len, std::uint64_t seed, int component,
                                 bool mean_zero = false, double endpoint_min = 0.0) {
    counter_rng g(seed, rng_stream::signals);
    signal x;
    x.dim = dim;
    x.len = len;
    x.values.resize(x.expected_size());
    std::uint64_t base = static_cast<std::uint64_t>(component) << 32;
    for (size_t i = 0; i < x.values.size(); ++i) x.values[i] = g.gaussian(base + i);
    if (mean_zero) {
        double m = 0.0;
        for (double v : x.values) m += v;
        m /= static_cast<double>(x.values.size());
        for (double& v : x.values) v -= m;
    }
    if (dim == 1 && endpoint_min > 0.0) {
        for (size_t i : {size_t{0}, x.values.size() - 1}) {
            double& v = x.values[i];
            if (std::abs(v) < endpoint_min) v = v < 0.0 ? -endpoint_min : endpoint_min;
        }
    }
    return x;
}

}  // namespace mtd
