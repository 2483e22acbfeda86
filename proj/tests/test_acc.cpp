#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mtd/acc.hpp"
#include "mtd/forward.hpp"
#include "mtd/rng.hpp"

using namespace mtd;

namespace {

std::vector<double> random_stream(std::size_t n, std::uint64_t seed) {
    counter_rng g(seed, rng_stream::noise);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = g.gaussian(i);
    return y;
}

// Long-double single-pass reference sums.
struct ref_moments {
    long double a1 = 0;
    std::vector<long double> a2, a3;
};

ref_moments reference(const std::vector<double>& y, int l) {
    ref_moments r;
    r.a2.assign(l, 0);
    r.a3.assign(autocorr_set::tri_size(l), 0);
    for (double v : y) r.a1 += v;
    for (int lag = 0; lag < l; ++lag)
        for (std::size_t i = 0; i + lag < y.size(); ++i)
            r.a2[lag] += static_cast<long double>(y[i]) * y[i + lag];
    for (int l1 = 0; l1 < l; ++l1)
        for (int l2 = 0; l2 <= l1; ++l2)
            for (std::size_t i = 0; i + l1 < y.size(); ++i)
                r.a3[autocorr_set::tri_index(l1, l2)] +=
                    static_cast<long double>(y[i]) * y[i + l1] * y[i + l2];
    double m = static_cast<double>(y.size());
    r.a1 /= m;
    for (auto& v : r.a2) v /= m;
    for (auto& v : r.a3) v /= m;
    return r;
}

void require_close(const autocorr_set& ac, const ref_moments& r, double tol) {
    REQUIRE_THAT(ac.a1, Catch::Matchers::WithinAbs(static_cast<double>(r.a1), tol));
    for (std::size_t i = 0; i < ac.a2.size(); ++i)
        REQUIRE_THAT(ac.a2[i], Catch::Matchers::WithinAbs(static_cast<double>(r.a2[i]), tol));
    for (std::size_t i = 0; i < ac.a3.size(); ++i)
        REQUIRE_THAT(ac.a3[i], Catch::Matchers::WithinAbs(static_cast<double>(r.a3[i]), tol));
}

}  // namespace

TEST_CASE("exact junction policy reproduces the single-pass sums") {
    const int l = 6;
    auto y = random_stream(2000, 5);
    ref_moments ref = reference(y, l);

    accumulator whole(l, 3);
    whole.accumulate_segment(y);
    require_close(whole.finalize(), ref, 1e-13);

    accumulator split(l, 3);
    split.accumulate_segment(y.data(), 700);
    split.accumulate_segment(y.data() + 700, 650);
    split.accumulate_segment(y.data() + 1350, 650);
    autocorr_set sp = split.finalize();
    require_close(sp, ref, 1e-13);
    REQUIRE(sp.n_segments == 3);
    REQUIRE(sp.n_samples == 2000);
    REQUIRE(sp.junction == "exact");
}

TEST_CASE("combine is the monoid operation") {
    const int l = 5;
    auto y = random_stream(1200, 8);
    ref_moments ref = reference(y, l);

    accumulator left(l, 3), right(l, 3);
    left.accumulate_segment(y.data(), 300);
    left.accumulate_segment(y.data() + 300, 300);
    right.accumulate_segment(y.data() + 600, 400);
    right.accumulate_segment(y.data() + 1000, 200);
    left.combine(right);
    require_close(left.finalize(), ref, 1e-13);

    SECTION("identity elements on either side") {
        accumulator empty1, empty2;
        accumulator full(l, 3);
        full.accumulate_segment(y);
        full.combine(empty1);  // right unit
        empty2.combine(full);  // left unit adopts
        require_close(full.finalize(), ref, 1e-13);
        require_close(empty2.finalize(), ref, 1e-13);
    }
    SECTION("mismatched configurations refuse to combine") {
        accumulator a(l, 3), b(l + 1, 3);
        a.accumulate_segment(y.data(), 600);
        b.accumulate_segment(y.data(), 600);
        REQUIRE_THROWS_AS(a.combine(b), validation_error);
    }
}

TEST_CASE("truncate policy drops exactly the straddling products") {
    // All-ones stream, L=3, two segments: each junction loses 1 product at
    // lag 1 and 2 at lag 2 (and the matching third-order windows).
    const int l = 3;
    std::vector<double> ones(20, 1.0);
    accumulator exact(l, 3, junction_policy::exact);
    accumulator trunc(l, 3, junction_policy::truncate);
    for (auto* acc : {&exact, &trunc}) {
        acc->accumulate_segment(ones.data(), 10);
        acc->accumulate_segment(ones.data() + 10, 10);
    }
    autocorr_set e = exact.finalize(), t = trunc.finalize();
    REQUIRE_THAT(e.a2[1] * 20, Catch::Matchers::WithinAbs(19.0, 1e-12));
    REQUIRE_THAT(t.a2[1] * 20, Catch::Matchers::WithinAbs(18.0, 1e-12));
    REQUIRE_THAT(e.a2[2] * 20, Catch::Matchers::WithinAbs(18.0, 1e-12));
    REQUIRE_THAT(t.a2[2] * 20, Catch::Matchers::WithinAbs(16.0, 1e-12));
    REQUIRE(t.junction == "truncate");
    // Loss bound: (L-1) * max|y|^order products per junction and order.
    for (std::size_t i = 0; i < e.a3.size(); ++i)
        REQUIRE(std::abs(e.a3[i] - t.a3[i]) * 20 <= (l - 1) * 1.0 + 1e-12);
}

TEST_CASE("order-2 accumulators skip third-order state") {
    auto y = random_stream(500, 3);
    accumulator acc(4, 2);
    acc.accumulate_segment(y);
    autocorr_set ac = acc.finalize();
    REQUIRE(ac.order == 2);
    REQUIRE(ac.a3.empty());
}

TEST_CASE("validation of segment and configuration misuse") {
    accumulator acc(8, 3);
    std::vector<double> tiny(5, 1.0);
    REQUIRE_THROWS_AS(acc.accumulate_segment(tiny), validation_error);
    accumulator unconfigured;
    REQUIRE_THROWS_AS(unconfigured.accumulate_segment(tiny), validation_error);
    REQUIRE_THROWS_AS(unconfigured.finalize(), validation_error);
    REQUIRE_THROWS_AS(accumulator(3, 4), validation_error);
    REQUIRE_THROWS_AS(accumulator(0, 3), validation_error);
}

TEST_CASE("compensated sums survive adversarial cancellation") {
    // Alternating huge values with a tiny drift; naive double summation of a2
    // at lag 1 loses the drift entirely.
    const int l = 2;
    const std::size_t n = 4000;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = (i % 2 ? 1.0 : -1.0) * 1.0e8 + 1.0e-4 * static_cast<double>(i % 7);
    accumulator acc(l, 3);
    acc.accumulate_segment(y);
    ref_moments ref = reference(y, l);
    autocorr_set ac = acc.finalize();
    REQUIRE_THAT(ac.a2[1],
                 Catch::Matchers::WithinRel(static_cast<double>(ref.a2[1]), 1e-12));
}

TEST_CASE("2-D accumulation matches the direct autocorrelation") {
    const int l = 4, h = 9, w = 11;
    counter_rng g(17, rng_stream::noise);
    std::vector<double> img(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = g.gaussian(i);

    accumulator2d acc(l);
    acc.accumulate_observation(img.data(), h, w);
    autocorr_set ac = acc.finalize();
    auto grid = direct_ac2_2d(img.data(), h, w, l);
    int side = 2 * l - 1;
    double npix = static_cast<double>(h) * w;
    for (int lr = -(l - 1); lr <= l - 1; ++lr)
        for (int lc = -(l - 1); lc <= l - 1; ++lc)
            REQUIRE_THAT(ac.a2_at_2d(lr, lc),
                         Catch::Matchers::WithinAbs(
                             grid[static_cast<std::size_t>(lr + l - 1) * side + lc + l - 1] /
                                 npix,
                             1e-10));
    REQUIRE(ac.src_h == h);
    REQUIRE(ac.src_w == w);
    REQUIRE(ac.n_segments == 1);

    SECTION("averaging over observations and combining agree") {
        std::vector<double> img2(img.size());
        for (std::size_t i = 0; i < img.size(); ++i) img2[i] = g.gaussian(10000 + i);
        accumulator2d both(l);
        both.accumulate_observation(img.data(), h, w);
        both.accumulate_observation(img2.data(), h, w);
        accumulator2d second(l);
        second.accumulate_observation(img2.data(), h, w);
        accumulator2d merged(l);
        merged.combine(acc);
        merged.combine(second);
        autocorr_set b = both.finalize(), mg = merged.finalize();
        for (std::size_t i = 0; i < b.a2.size(); ++i)
            REQUIRE_THAT(b.a2[i], Catch::Matchers::WithinAbs(mg.a2[i], 1e-14));
    }
    SECTION("third order in 2-D is explicitly unimplemented") {
        REQUIRE_THROWS_AS(accumulator2d(l, 3), unimplemented_error);
    }
    SECTION("shape changes are rejected") {
        REQUIRE_THROWS_AS(acc.accumulate_observation(img.data(), w, h), validation_error);
    }
}
