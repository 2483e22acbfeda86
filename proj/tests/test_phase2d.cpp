#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "mtd/forward.hpp"
#include "mtd/phase2d.hpp"
#include "mtd/synth.hpp"

using namespace mtd;

namespace {

// Naive corner-support DFT magnitude on the (2w-1)^2 lattice.
std::vector<double> naive_dft_mag(const signal& x) {
    const int w = x.len, ow = 2 * w - 1;
    const double pi = std::acos(-1.0);
    std::vector<double> mag(static_cast<std::size_t>(ow) * ow);
    for (int kr = 0; kr < ow; ++kr)
        for (int kc = 0; kc < ow; ++kc) {
            std::complex<double> acc = 0.0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    double ph = -2.0 * pi * (kr * double(r) + kc * double(c)) / ow;
                    acc += x.at2(r, c) * std::complex<double>(std::cos(ph), std::sin(ph));
                }
            mag[static_cast<std::size_t>(kr) * ow + kc] = std::abs(acc);
        }
    return mag;
}

}  // namespace

TEST_CASE("target magnitudes are the DFT magnitudes of the signal") {
    const int w = 5, ow = 2 * w - 1;
    signal x = make_random_signal(2, w, 61, 0, true);
    phase_problem prob = make_phase_problem(signal_ac_2d(x), w);
    REQUIRE(prob.w == w);
    REQUIRE(prob.ow == ow);
    auto expect = naive_dft_mag(x);
    REQUIRE(prob.mag[0] == 0.0);  // mean-zero pin
    REQUIRE(expect[0] < 1e-10);   // consistent: the signal really is mean-zero
    for (std::size_t i = 1; i < prob.mag.size(); ++i)
        REQUIRE_THAT(prob.mag[i], Catch::Matchers::WithinAbs(expect[i], 1e-9));

    SECTION("magnitudes carry the conjugate symmetry of a real image") {
        for (int kr = 0; kr < ow; ++kr)
            for (int kc = 0; kc < ow; ++kc) {
                std::size_t a = static_cast<std::size_t>(kr) * ow + kc;
                std::size_t b = static_cast<std::size_t>((ow - kr) % ow) * ow +
                                (ow - kc) % ow;
                REQUIRE_THAT(prob.mag[a], Catch::Matchers::WithinAbs(prob.mag[b], 1e-10));
            }
    }
}

TEST_CASE("observed 2-D statistics reduce to the signal autocorrelation") {
    const int l = 4, side = 2 * l - 1;
    const double gamma = 0.07, sigma2 = 1.7;
    signal x = make_random_signal(2, l, 33, 0, true);
    std::vector<double> sac = signal_ac_2d(x);

    autocorr_set ac = autocorr_set::make_2d(l);
    for (int lr = 0; lr < l; ++lr)
        for (int lc = (lr == 0 ? 0 : -(l - 1)); lc < l; ++lc) {
            double v = gamma * sac[static_cast<std::size_t>(lr + l - 1) * side + lc + l - 1];
            if (lr == 0 && lc == 0) v += sigma2;
            ac.a2[autocorr_set::a2_index_2d(l, lr, lc)] = v;
        }
    std::vector<double> rec = extract_image_ac2(ac, gamma, sigma2);
    REQUIRE(rec.size() == sac.size());
    for (std::size_t i = 0; i < sac.size(); ++i)
        REQUIRE_THAT(rec[i], Catch::Matchers::WithinAbs(sac[i], 1e-12));

    REQUIRE_THROWS_AS(extract_image_ac2(ac, 0.0, sigma2), validation_error);
    autocorr_set one_d = autocorr_set::make_1d(4, 2);
    REQUIRE_THROWS_AS(extract_image_ac2(one_d, gamma, sigma2), validation_error);
}

TEST_CASE("phase retrieval recovers a small image from exact magnitudes") {
    const int w = 6;
    signal x = make_random_signal(2, w, 91, 0, true);
    phase_problem prob = make_phase_problem(signal_ac_2d(x), w);

    bool recovered = false;
    for (std::uint64_t seed = 0; seed < 5 && !recovered; ++seed) {
        rrr_options opt;
        opt.seed = seed;
        opt.max_iter = 30000;
        opt.target_residual = 1e-10;
        rrr_result res = rrr_phase_retrieval(prob, opt);
        REQUIRE(res.x.dim == 2);
        REQUIRE(res.x.len == w);
        if (res.residual > 1e-6) continue;
        align2d_result al = align_2d(res.x, x);
        if (al.rel_error < 1e-3) recovered = true;
    }
    REQUIRE(recovered);
}

TEST_CASE("stagnation triggers restarts instead of spinning forever") {
    // Inconsistent magnitude data (not an autocorrelation of any support-
    // limited image): the residual plateaus and the solver reseeds.
    const int w = 5, ow = 2 * w - 1;
    counter_rng g(3, rng_stream::noise);
    phase_problem prob;
    prob.w = w;
    prob.ow = ow;
    prob.mag.resize(static_cast<std::size_t>(ow) * ow);
    for (std::size_t i = 0; i < prob.mag.size(); ++i)
        prob.mag[i] = std::abs(g.gaussian(i)) + 0.5;
    prob.mag[0] = 0.0;
    rrr_options opt;
    opt.max_iter = 2000;
    opt.restart_window = 10;
    rrr_result res = rrr_phase_retrieval(prob, opt);
    REQUIRE(res.iterations == 2000);
    REQUIRE(res.restarts >= 1);
    REQUIRE(res.residual > 1e-6);
}

TEST_CASE("alignment resolves the global sign and reflection") {
    const int w = 5;
    signal truth = make_random_signal(2, w, 12, 0, true);
    signal est = truth;
    SECTION("identity") {
        align2d_result al = align_2d(est, truth);
        REQUIRE(al.rel_error < 1e-14);
        REQUIRE(al.sign == 1);
        REQUIRE_FALSE(al.reflected);
    }
    SECTION("negated point reflection") {
        signal flipped;
        flipped.dim = 2;
        flipped.len = w;
        flipped.values.resize(truth.values.size());
        for (int r = 0; r < w; ++r)
            for (int c = 0; c < w; ++c)
                flipped.values[static_cast<std::size_t>(r) * w + c] =
                    -truth.at2(w - 1 - r, w - 1 - c);
        align2d_result al = align_2d(flipped, truth);
        REQUIRE(al.rel_error < 1e-14);
        REQUIRE(al.sign == -1);
        REQUIRE(al.reflected);
    }
    SECTION("shape mismatch is rejected") {
        signal small = make_random_signal(2, w - 1, 1, 0);
        REQUIRE_THROWS_AS(align_2d(small, truth), validation_error);
    }
}

TEST_CASE("phase problem construction validates its input") {
    REQUIRE_THROWS_AS(make_phase_problem(std::vector<double>(9, 0.0), 1),
                      validation_error);
    REQUIRE_THROWS_AS(make_phase_problem(std::vector<double>(10, 0.0), 3),
                      validation_error);
}
