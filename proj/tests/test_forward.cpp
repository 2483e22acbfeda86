#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mtd/forward.hpp"
#include "mtd/rng.hpp"

using namespace mtd;

namespace {

signal random_signal(int len, std::uint64_t seed) {
    counter_rng g(seed, rng_stream::signals);
    signal x;
    x.len = len;
    x.values.resize(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) x.values[i] = g.gaussian(static_cast<std::uint64_t>(i));
    return x;
}

// Independent empirical autocorrelations of one finite array, normalized by
// its full length, written as plainly as possible.
double emp_a1(const std::vector<double>& y) {
    double s = 0;
    for (double v : y) s += v;
    return s / static_cast<double>(y.size());
}
double emp_a2(const std::vector<double>& y, int l) {
    double s = 0;
    for (size_t i = 0; i + l < y.size(); ++i) s += y[i] * y[i + l];
    return s / static_cast<double>(y.size());
}
double emp_a3(const std::vector<double>& y, int l1, int l2) {
    double s = 0;
    size_t m = static_cast<size_t>(std::max(l1, l2));
    for (size_t i = 0; i + m < y.size(); ++i) s += y[i] * y[i + l1] * y[i + l2];
    return s / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("signal_ac matches a brute-force evaluation") {
    signal x = random_signal(8, 21);
    signal_moments m = signal_ac(x);
    const std::vector<double>& y = x.values;  // same length, same normalization
    REQUIRE_THAT(m.a1, Catch::Matchers::WithinRel(emp_a1(y), 1e-14));
    for (int l = 0; l < 8; ++l)
        REQUIRE_THAT(m.a2[l], Catch::Matchers::WithinAbs(emp_a2(y, l), 1e-13));
    for (int l1 = 0; l1 < 8; ++l1)
        for (int l2 = 0; l2 <= l1; ++l2)
            REQUIRE_THAT(m.a3[autocorr_set::tri_index(l1, l2)],
                         Catch::Matchers::WithinAbs(emp_a3(y, l1, l2), 1e-13));
}

TEST_CASE("delta_count equals the delta sum for every signed shift pair") {
    const int l = 6;
    autocorr_set ac = autocorr_set::make_1d(l, 3);
    for (int l1 = -(l - 1); l1 <= l - 1; ++l1)
        for (int l2 = -(l - 1); l2 <= l - 1; ++l2) {
            int lo = std::min({0, l1, l2}), hi = std::max({0, l1, l2});
            if (hi - lo > l - 1) continue;
            int expect = (l1 == 0) + (l2 == 0) + (l1 == l2);
            auto [b, a] = ac.canonical_pair(l1, l2);
            REQUIRE(delta_count(b, a) == expect);
        }
}

TEST_CASE("noiseless separated placement identity") {
    // Single-occurrence identity, summed: Q well-separated copies of x in a
    // zero stream of length N give empirical moments exactly equal to the
    // forward map at gamma = Q*L/N.
    const int l = 5;
    signal x = random_signal(l, 33);
    const std::vector<size_t> starts{3, 17, 40, 52, 71};
    const size_t n = 90;
    std::vector<double> y(n, 0.0);
    for (size_t s : starts)
        for (int i = 0; i < l; ++i) y[s + i] += x.values[static_cast<size_t>(i)];
    double gamma = static_cast<double>(starts.size()) * l / static_cast<double>(n);
    autocorr_set pred = forward_separated(signal_ac(x), gamma, 0.0);
    REQUIRE_THAT(emp_a1(y), Catch::Matchers::WithinAbs(pred.a1, 1e-14));
    for (int lag = 0; lag < l; ++lag)
        REQUIRE_THAT(emp_a2(y, lag), Catch::Matchers::WithinAbs(pred.a2[lag], 1e-13));
    for (int l1 = 0; l1 < l; ++l1)
        for (int l2 = 0; l2 <= l1; ++l2)
            REQUIRE_THAT(emp_a3(y, l1, l2),
                         Catch::Matchers::WithinAbs(
                             pred.a3[autocorr_set::tri_index(l1, l2)], 1e-13));
}

TEST_CASE("pure-noise moments land on the sigma terms") {
    const int l = 4;
    const size_t n = 400000;
    const double sigma = 1.3;
    counter_rng g(77, rng_stream::noise);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = sigma * g.gaussian(i);
    // a2[0] ~ sigma^2, other entries ~ 0; very loose statistical bounds.
    double se = sigma * sigma / std::sqrt(static_cast<double>(n));
    REQUIRE(std::abs(emp_a2(y, 0) - sigma * sigma) < 10.0 * se * std::sqrt(2.0));
    for (int lag = 1; lag < l; ++lag) REQUIRE(std::abs(emp_a2(y, lag)) < 10.0 * se);
    // Third order: all entries are odd in the noise, hence near zero.
    for (int l1 = 0; l1 < l; ++l1)
        for (int l2 = 0; l2 <= l1; ++l2)
            REQUIRE(std::abs(emp_a3(y, l1, l2)) < 60.0 * sigma * se);
}

TEST_CASE("debias inverts the separated forward map") {
    const int l = 7;
    std::vector<signal_moments> comps{signal_ac(random_signal(l, 1)),
                                      signal_ac(random_signal(l, 2))};
    std::vector<double> gammas{0.2, 0.15};
    signal_moments gax = mix_ac(gammas, comps);  // gamma-weighted moments
    double gamma = 0.35, sigma = 0.8;
    std::vector<double> pi{gammas[0] / gamma, gammas[1] / gamma};
    autocorr_set acy = forward_separated(mix_ac(pi, comps), gamma, sigma);

    SECTION("sigma known: every entry is recovered") {
        debiased d = debias(acy, sigma * sigma, placement_kind::well_separated);
        REQUIRE_THAT(d.gax.a1, Catch::Matchers::WithinAbs(gax.a1, 1e-14));
        for (int lag = 0; lag < l; ++lag) {
            REQUIRE(d.a2_known[lag] == 1);
            REQUIRE_THAT(d.gax.a2[lag], Catch::Matchers::WithinAbs(gax.a2[lag], 1e-13));
        }
        for (size_t t = 0; t < d.gax.a3.size(); ++t) {
            REQUIRE(d.a3_known[t] == 1);
            REQUIRE_THAT(d.gax.a3[t], Catch::Matchers::WithinAbs(gax.a3[t], 1e-13));
        }
    }
    SECTION("sigma unknown: contaminated entries are flagged") {
        debiased d = debias(acy, std::nullopt, placement_kind::well_separated);
        REQUIRE(d.a2_known[0] == 0);
        for (int lag = 1; lag < l; ++lag) {
            REQUIRE(d.a2_known[lag] == 1);
            REQUIRE_THAT(d.gax.a2[lag], Catch::Matchers::WithinAbs(gax.a2[lag], 1e-13));
        }
        for (int l1 = 0; l1 < l; ++l1)
            for (int l2 = 0; l2 <= l1; ++l2) {
                int t = autocorr_set::tri_index(l1, l2);
                if (delta_count(l1, l2) > 0) {
                    REQUIRE(d.a3_known[t] == 0);
                } else {
                    REQUIRE(d.a3_known[t] == 1);
                    REQUIRE_THAT(d.gax.a3[t],
                                 Catch::Matchers::WithinAbs(gax.a3[t], 1e-13));
                }
            }
    }
}

TEST_CASE("poisson third-order debias needs no sigma") {
    const int l = 6;
    signal_moments ax = signal_ac(random_signal(l, 9));
    double gamma = 0.8, sigma = 1.7;
    autocorr_set acy = forward_poisson(ax, gamma, sigma);
    debiased d = debias(acy, std::nullopt, placement_kind::poisson);
    for (size_t t = 0; t < d.gax.a3.size(); ++t) {
        REQUIRE(d.a3_known[t] == 1);
        REQUIRE_THAT(d.gax.a3[t], Catch::Matchers::WithinAbs(gamma * ax.a3[t], 1e-12));
    }
    for (int lag = 1; lag < l; ++lag)
        REQUIRE_THAT(d.gax.a2[lag], Catch::Matchers::WithinAbs(gamma * ax.a2[lag], 1e-13));
    REQUIRE(d.a2_known[0] == 0);
    debiased dk = debias(acy, sigma * sigma, placement_kind::poisson);
    REQUIRE_THAT(dk.gax.a2[0], Catch::Matchers::WithinAbs(gamma * ax.a2[0], 1e-13));
}

TEST_CASE("forward maps reject densities beyond their domain") {
    signal_moments ax = signal_ac(random_signal(5, 4));
    REQUIRE_THROWS_AS(forward_separated(ax, 0.8, 1.0), validation_error);  // cap 5/9
    REQUIRE_THROWS_AS(forward_separated(ax, 0.0, 1.0), validation_error);
    REQUIRE_NOTHROW(forward_poisson(ax, 0.8, 1.0));
}

TEST_CASE("direct 2-D autocorrelation matches a hand enumeration") {
    const int h = 4, w = 5, lmax = 3;
    counter_rng g(13, rng_stream::signals);
    std::vector<double> img(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < img.size(); ++i) img[i] = g.gaussian(i);
    auto grid = direct_ac2_2d(img.data(), h, w, lmax);
    int side = 2 * lmax - 1;
    for (int lr = -(lmax - 1); lr <= lmax - 1; ++lr)
        for (int lc = -(lmax - 1); lc <= lmax - 1; ++lc) {
            double acc = 0.0;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    int r2 = r + lr, c2 = c + lc;
                    if (r2 < 0 || r2 >= h || c2 < 0 || c2 >= w) continue;
                    acc += img[static_cast<size_t>(r) * w + c] *
                           img[static_cast<size_t>(r2) * w + c2];
                }
            REQUIRE_THAT(grid[static_cast<size_t>(lr + lmax - 1) * side + lc + lmax - 1],
                         Catch::Matchers::WithinAbs(acc, 1e-12));
        }
    // Central symmetry.
    for (int lr = -(lmax - 1); lr <= lmax - 1; ++lr)
        for (int lc = -(lmax - 1); lc <= lmax - 1; ++lc)
            REQUIRE(grid[static_cast<size_t>(lr + lmax - 1) * side + lc + lmax - 1] ==
                    grid[static_cast<size_t>(-lr + lmax - 1) * side - lc + lmax - 1]);
}
