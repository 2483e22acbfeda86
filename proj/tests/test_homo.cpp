#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mtd/forward.hpp"
#include "mtd/homo.hpp"
#include "mtd/synth.hpp"

using namespace mtd;

namespace {

signal test_signal(int l, std::uint64_t seed, double mean_bump = 0.0) {
    signal x = make_random_signal(1, l, seed, 0, false, 0.3);
    for (double& v : x.values) v += mean_bump;
    // The bump can cancel a negative endpoint; keep the support at full length.
    for (double* v : {&x.values.front(), &x.values.back()})
        if (std::abs(*v) < 0.1) *v += 0.7;
    return x;
}

}  // namespace

TEST_CASE("signal recovery from gamma-scaled moments is exact") {
    for (int l = 3; l <= 12; ++l) {
        signal x = test_signal(l, 100 + l);
        signal_moments ax = signal_ac(x);
        std::vector<double> g2 = ax.a2, g3 = ax.a3;
        for (double& v : g2) v *= 0.37;  // any common scale cancels in the ratio
        for (double& v : g3) v *= 0.37;
        int shrink = -1;
        signal rec = recover_signal_direct(g2, g3, &shrink);
        REQUIRE(shrink == 0);
        REQUIRE(rec.len == l);
        for (int k = 0; k < l; ++k)
            REQUIRE_THAT(rec.values[k], Catch::Matchers::WithinRel(x.values[k], 1e-11));
    }
}

TEST_CASE("support shorter than the window shrinks the ratio") {
    const int l = 8;
    SECTION("trailing zero") {
        signal x = test_signal(l, 7);
        x.values[l - 1] = 0.0;
        signal_moments ax = signal_ac(x);
        int shrink = 0;
        signal rec = recover_signal_direct(ax.a2, ax.a3, &shrink);
        REQUIRE(shrink == 1);
        REQUIRE(rec.len == l - 1);
        for (int k = 0; k < l - 1; ++k)
            REQUIRE_THAT(rec.values[k], Catch::Matchers::WithinRel(x.values[k], 1e-10));
    }
    SECTION("leading zero yields the shifted support") {
        signal x = test_signal(l, 8);
        x.values[0] = 0.0;
        signal_moments ax = signal_ac(x);
        int shrink = 0;
        signal rec = recover_signal_direct(ax.a2, ax.a3, &shrink);
        REQUIRE(shrink == 1);
        REQUIRE(rec.len == l - 1);
        for (int k = 0; k < l - 1; ++k)
            REQUIRE_THAT(rec.values[k], Catch::Matchers::WithinRel(x.values[k + 1], 1e-10));
    }
    SECTION("window collapsing to one entry is an error") {
        std::vector<double> g2 = {1.0, 0.0, 0.0};
        std::vector<double> g3(autocorr_set::tri_size(3), 0.0);
        REQUIRE_THROWS_AS(recover_signal_direct(g2, g3), solve_error);
        REQUIRE_THROWS_AS(recover_signal_direct({}, {}), validation_error);
    }
}

TEST_CASE("density and noise inversion for well-separated streams") {
    const int l = 9;
    const double gamma = 0.3, sigma = 1.1;
    signal x = test_signal(l, 42, 0.25);
    autocorr_set acy = forward_separated(signal_ac(x), gamma, sigma);

    SECTION("known sigma closed form") {
        REQUIRE_THAT(gamma_from_sigma(acy, sigma * sigma),
                     Catch::Matchers::WithinRel(gamma, 1e-12));
        REQUIRE_THAT(sigma2_from_gamma(acy, gamma),
                     Catch::Matchers::WithinRel(sigma * sigma, 1e-12));
        REQUIRE_THROWS_AS(gamma_from_sigma(acy, 1e6), solve_error);
    }
    SECTION("both unknown via the quadratic common root") {
        auto gs = solve_gamma_sigma_separated(acy);
        REQUIRE_THAT(gs.gamma, Catch::Matchers::WithinRel(gamma, 1e-9));
        REQUIRE_THAT(gs.sigma2, Catch::Matchers::WithinRel(sigma * sigma, 1e-9));
        REQUIRE(gs.root_residual < 1e-7);
    }
    SECTION("full pipeline returns the planted signal") {
        for (auto s2 : {std::optional<double>(sigma * sigma), std::optional<double>()}) {
            homo_result r = solve_homo(acy, placement_kind::well_separated, s2);
            REQUIRE_THAT(r.gamma, Catch::Matchers::WithinRel(gamma, 1e-9));
            REQUIRE_THAT(r.sigma2, Catch::Matchers::WithinRel(sigma * sigma, 1e-9));
            REQUIRE(r.x.len == l);
            for (int k = 0; k < l; ++k)
                REQUIRE_THAT(r.x.values[k], Catch::Matchers::WithinRel(x.values[k], 1e-8));
        }
    }
}

TEST_CASE("poisson streams invert explicitly without sigma") {
    const int l = 11;
    const double gamma = 0.45, sigma = 0.9;
    signal x = test_signal(l, 17, 0.3);
    autocorr_set acy = forward_poisson(signal_ac(x), gamma, sigma);
    for (auto s2 : {std::optional<double>(sigma * sigma), std::optional<double>()}) {
        homo_result r = solve_homo(acy, placement_kind::poisson, s2);
        REQUIRE_THAT(r.gamma, Catch::Matchers::WithinRel(gamma, 1e-10));
        REQUIRE_THAT(r.sigma2, Catch::Matchers::WithinRel(sigma * sigma, 1e-9));
        REQUIRE(r.x.len == l);
        for (int k = 0; k < l; ++k)
            REQUIRE_THAT(r.x.values[k], Catch::Matchers::WithinRel(x.values[k], 1e-9));
    }
    SECTION("densities above the separated cap are fine here") {
        autocorr_set dense = forward_poisson(signal_ac(x), 2.5, sigma);
        homo_result r = solve_homo(dense, placement_kind::poisson);
        REQUIRE_THAT(r.gamma, Catch::Matchers::WithinRel(2.5, 1e-9));
    }
}

TEST_CASE("a zero-mean observation leaves the density unidentifiable") {
    const int l = 7;
    signal x = make_random_signal(1, l, 23, 0, true, 0.0);
    double mean = 0.0;
    for (double v : x.values) mean += v;
    REQUIRE(std::abs(mean) < 1e-12);
    autocorr_set sep = forward_separated(signal_ac(x), 0.2, 0.7);
    autocorr_set poi = forward_poisson(signal_ac(x), 0.2, 0.7);
    REQUIRE_THROWS_AS(solve_gamma_sigma_separated(sep), solve_error);
    REQUIRE_THROWS_AS(solve_homo(poi, placement_kind::poisson), solve_error);
    REQUIRE_THROWS_AS(gamma_from_sigma(sep, 0.49), solve_error);
}

TEST_CASE("homogeneous solver input validation") {
    signal x = test_signal(4, 3);
    autocorr_set acy = forward_separated(signal_ac(x), 0.2, 1.0);
    autocorr_set order2 = forward_separated(signal_ac(x, 2), 0.2, 1.0);
    REQUIRE_THROWS_AS(solve_homo(order2, placement_kind::well_separated), validation_error);
    signal x2 = test_signal(2, 5, 0.3);
    autocorr_set small = forward_separated(signal_ac(x2), 0.2, 1.0);
    REQUIRE_THROWS_AS(solve_gamma_sigma_separated(small), validation_error);
}
