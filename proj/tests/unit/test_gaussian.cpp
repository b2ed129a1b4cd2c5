#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "dcsq/errors.hpp"
#include "dcsq/gaussian.hpp"
#include "dcsq/rng.hpp"

using namespace dcsq;
using std::numbers::pi;

namespace {

quantum_params make_params(cplx alpha, cplx beta, double r, double phi,
                           cplx gamma = {1.0, 0.0}, double eta = 1.0) {
    quantum_params p;
    p.alpha = alpha;
    p.beta = beta;
    p.squeeze = {r, phi};
    p.gamma = gamma;
    p.eta = eta;
    return p;
}

// Paper-regime magnitudes: 14.6 mW / 170 uW at 1 GHz, 1563 nm,
// n = P / (f_rep h c / lambda).
constexpr double paper_beta_mag = 10718.093732003426;
constexpr double paper_alpha_mag = 1156.553117310992;

} // namespace

TEST_CASE("displaced_amplitude") {
    CHECK(displaced_amplitude(make_params({0, 0}, {10, 0}, 0, 0, {0.82, 0})) == cplx(10, 0));
    CHECK(displaced_amplitude(make_params({0, 1}, {10, 0}, 0, 0, {1, 0})) == cplx(10, 1));

    // 14.6 mW / 170 uW case: |nu|^2 of order 1e8
    auto p = make_params(std::polar(1157.0, pi / 2), {1.072e4, 0}, 0, 0, {0.82, 0});
    const double nu2 = std::norm(displaced_amplitude(p));
    CHECK(nu2 == doctest::Approx(1.158185076e8).epsilon(1e-9));
    CHECK(nu2 > 1e8);
    CHECK(nu2 < 1e9);
}

TEST_CASE("mean_field_phase_exact") {
    CHECK(mean_field_phase_exact(make_params({0, 1}, {10, 0}, 0, 0)) ==
          doctest::Approx(0.09966865249).epsilon(1e-9));
    CHECK(mean_field_phase_exact(make_params({0, 0}, {10, 0}, 0, 0)) == 0.0);

    // R = 0.0885 at phi_alpha = pi/2 with real beta
    auto p = make_params(std::polar(0.0885 * 10.0, pi / 2), {10, 0}, 0, 0);
    CHECK(mean_field_phase_exact(p) == doctest::Approx(std::atan(0.0885)).epsilon(1e-12));
    CHECK(mean_field_phase_exact(p) == doctest::Approx(0.08827).epsilon(1e-3));

    CHECK_THROWS_AS(mean_field_phase_exact(make_params({-10, 0}, {10, 0}, 0, 0)),
                    numerical_error);
}

TEST_CASE("mean_field_phase_approx") {
    auto p = make_params(std::polar(1.0, pi / 2), {10, 0}, 0, 0);
    auto a = mean_field_phase_approx(p);
    CHECK(a.value == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_FALSE(a.large_ratio);

    // phi_alpha = 0 -> 0 for any magnitudes
    CHECK(mean_field_phase_approx(make_params({3.0, 0}, {7, 0}, 0, 0)).value ==
          doctest::Approx(0.0).epsilon(1e-15));

    // ratio warning
    CHECK(mean_field_phase_approx(make_params({6, 0}, {10, 0}, 0, 0)).large_ratio);

    // frame handling: rotating both beta and the displacement together must
    // not change the approximate phase
    auto p_rot = make_params(std::polar(1.0, pi / 2 + 0.7), std::polar(10.0, 0.7), 0, 0);
    CHECK(mean_field_phase_approx(p_rot).value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("phase approx error is O(R^2) with frozen constant") {
    // dense sweep puts max |exact - approx| / R^2 at ~0.585; frozen bound 0.6
    for (double ratio : {0.01, 0.0885, 0.15, 0.3}) {
        double worst = 0.0;
        for (int i = 0; i < 4096; ++i) {
            const double phi_a = 2.0 * pi * i / 4096;
            auto p = make_params(std::polar(ratio * 10.0, phi_a), {10, 0}, 0, 0);
            const double exact = mean_field_phase_exact(p);
            const double approx = mean_field_phase_approx(p).value;
            worst = std::max(worst, std::abs(exact - approx));
        }
        CHECK(worst <= 0.6 * ratio * ratio);
    }
}

TEST_CASE("photon_moments examples") {
    // r=0: Poissonian for any gamma/alpha at eta=1
    auto p0 = make_params({2, 1}, {10, 0}, 0, 0, {0.5, 0.1}, 1.0);
    auto m0 = photon_moments(p0);
    CHECK(m0.variance == m0.mean);

    auto m1 = photon_moments(make_params({0, 0}, {10, 0}, 0.5, 0.0));
    CHECK(m1.mean == doctest::Approx(100.0));
    CHECK(m1.variance == doctest::Approx(36.78794411714).epsilon(1e-10));

    auto m2 = photon_moments(make_params({0, 0}, {10, 0}, 0.5, pi / 2));
    CHECK(m2.variance == doctest::Approx(271.82818284590).epsilon(1e-10));
}

TEST_CASE("photon_moments_full structure") {
    // eta=0: dark detector
    auto dark = photon_moments_full(make_params({2, 0}, {10, 0}, 0.7, 0.2, {0.9, 0}, 0.0));
    CHECK(dark.mean == 0.0);
    CHECK(dark.variance == 0.0);

    // at eta=1, gamma=1, alpha=0 the full form exceeds the simplified one by
    // exactly 2 sinh^4 r + 2 sinh^2 r (variance) and sinh^2 r (mean)
    const double r = 0.5;
    auto pf = make_params({0, 0}, {10, 0}, r, 0.3);
    auto full = photon_moments_full(pf);
    auto simple = photon_moments(pf);
    const double sh2 = std::sinh(r) * std::sinh(r);
    CHECK(full.variance - simple.variance ==
          doctest::Approx(2.0 * sh2 * sh2 + 2.0 * sh2).epsilon(1e-10));
    CHECK(full.mean - simple.mean == doctest::Approx(sh2).epsilon(1e-12));
}

TEST_CASE("kerr_squeeze_angle") {
    CHECK(kerr_squeeze_angle({123.0, 0}, 0.0) == doctest::Approx(pi / 4).epsilon(1e-14));
    // theta subtraction
    CHECK(kerr_squeeze_angle(std::polar(123.0, 0.3), 0.0) ==
          doctest::Approx(pi / 4 - 0.3).epsilon(1e-12));
    CHECK(kerr_squeeze_angle({100.0, 0}, 0.1) ==
          doctest::Approx(0.73547623041).epsilon(1e-10));
    // domain error: r too large for |beta|
    CHECK_THROWS_AS(kerr_squeeze_angle({2.0, 0}, 3.0), numerical_error);
}

TEST_CASE("number preservation at the kerr angle") {
    // full variance at phi = kerr_squeeze_angle, alpha=0, eta=1 equals |beta|^2
    normal_sampler rng(42);
    for (int i = 0; i < 50; ++i) {
        const double beta_mag = 10.0 + 990.0 * rng.uniform();
        const double r = rng.uniform();
        const double theta = 2.0 * pi * (rng.uniform() - 0.5);
        const cplx beta = std::polar(beta_mag, theta);
        const double phi = kerr_squeeze_angle(beta, r);
        auto m = photon_moments_full(make_params({0, 0}, beta, r, phi));
        CHECK(std::abs(m.variance / (beta_mag * beta_mag) - 1.0) < 1e-12);
    }
}

TEST_CASE("haus_squeeze_estimate") {
    CHECK(haus_squeeze_estimate(0.0, {5, 0}) == 0.0);
    CHECK(haus_squeeze_estimate(0.1, {1, 0}) == doctest::Approx(0.0998340789).epsilon(1e-9));
    CHECK(haus_squeeze_estimate(1.0, {1, 0}) == doctest::Approx(0.8813735870).epsilon(1e-9));
    // closed-form equivalence r = asinh(g|beta|^2)
    for (double x : {0.01, 0.3, 2.0}) {
        CHECK(haus_squeeze_estimate(x, {1, 0}) ==
              doctest::Approx(std::asinh(x)).epsilon(1e-12));
    }
}

TEST_CASE("taylor_variance_small_r") {
    CHECK(taylor_variance_small_r(0.3, 0.0, 1.0) == doctest::Approx(std::cos(0.6)));
    CHECK(taylor_variance_small_r(pi / 4, 0.1, pi / 2) == doctest::Approx(0.2).epsilon(1e-12));

    // R = 0.05 sweep: deviation from cos(2 phi - 2 R sin(phi_a)) bounded by 2R^2
    const double ratio = 0.05;
    double worst = 0.0;
    for (int j = 0; j < 181; ++j) {
        const double phi = -pi / 2 + pi * j / 180.0;
        for (int i = 0; i < 2048; ++i) {
            const double pa = 2.0 * pi * i / 2048;
            const double exact = std::cos(2.0 * phi - 2.0 * ratio * std::sin(pa));
            worst = std::max(worst,
                             std::abs(exact - taylor_variance_small_r(phi, ratio, pa)));
        }
    }
    CHECK(worst <= 2.0 * ratio * ratio);
}

TEST_CASE("count_variance_extrema") {
    // paper-regime template with kerr-derived angle
    const double r = 2.8171308845391945;
    const cplx beta{paper_beta_mag, 0.0};
    const double phi = kerr_squeeze_angle(beta, r);

    auto tpl = make_params({0, 0}, beta, r, phi, {0.82, 0}, 0.5852217978848031);

    // small R: one max, one min
    tpl.alpha = {100.0, 0.0}; // R ~ 0.0077
    CHECK(count_variance_extrema(tpl, 1024) == 2);

    // large R past the bifurcation: four extrema
    tpl.alpha = {0.12 * paper_beta_mag / 0.82, 0.0}; // R = 0.12
    CHECK(count_variance_extrema(tpl, 1024) == 4);

    // r=0: extrema only from the shot-noise fringe
    auto flat = make_params({500.0, 0}, beta, 0.0, 0.0, {0.82, 0}, 1.0);
    CHECK(count_variance_extrema(flat, 1024) == 2);

    // degenerate plateau (alpha = 0, r = 0: constant variance) is an error
    auto degenerate = make_params({0, 0}, beta, 0.0, 0.0, {0.82, 0}, 1.0);
    CHECK_THROWS_AS(count_variance_extrema(degenerate, 1024), numerical_error);

    CHECK_THROWS_AS(count_variance_extrema(tpl, 128), config_error);
}

TEST_CASE("extrema parity is even") {
    normal_sampler rng(7);
    const cplx beta{paper_beta_mag, 0.0};
    for (int i = 0; i < 8; ++i) {
        const double r = 0.5 + 2.5 * rng.uniform();
        auto tpl = make_params({200.0 + 1800.0 * rng.uniform(), 0}, beta, r,
                               kerr_squeeze_angle(beta, r), {0.82, 0},
                               0.3 + 0.7 * rng.uniform());
        CHECK(count_variance_extrema(tpl, 1024) % 2 == 0);
    }
}

TEST_CASE("bifurcation_scan") {
    const double r = 2.8171308845391945;
    const cplx beta{paper_beta_mag, 0.0};
    auto tpl = make_params({0, 0}, beta, r, kerr_squeeze_angle(beta, r), {0.82, 0},
                           0.5852217978848031);

    // coherent powers 50 uW .. 570 uW -> |alpha| = sqrt(P / (f_rep h c / lambda))
    std::vector<double> mags;
    for (double p_uw = 50.0; p_uw <= 570.0; p_uw += 40.0)
        mags.push_back(paper_alpha_mag * std::sqrt(p_uw / 170.0));

    auto scan = bifurcation_scan(tpl, mags, 1024);
    REQUIRE(scan.size() == mags.size());
    CHECK(scan.front().extrema == 2);
    CHECK(scan.back().extrema == 4);
    // monotone 2 -> 4 (bifurcation_scan throws on reversion; also check here)
    bool seen4 = false;
    for (const auto& row : scan) {
        if (seen4) CHECK(row.extrema == 4);
        seen4 = seen4 || row.extrema == 4;
    }

    // threshold refinement to 1e-3 relative; the grid-resolved transition for
    // this configuration sits in the R* ~ 0.06..0.08 band
    const double rstar = refine_bifurcation_threshold(tpl, mags.front(), mags.back(), 1024);
    CHECK(rstar > 0.05);
    CHECK(rstar < 0.09);
}

TEST_CASE("shot-noise invariant: r=0 gives variance == mean") {
    normal_sampler rng(11);
    for (int i = 0; i < 1000; ++i) {
        auto p = make_params(std::polar(10.0 * rng.uniform(), 2 * pi * rng.uniform()),
                             std::polar(1.0 + 100.0 * rng.uniform(), 2 * pi * rng.uniform()),
                             0.0, pi * (rng.uniform() - 0.5),
                             std::polar(rng.uniform(), 2 * pi * rng.uniform()),
                             rng.uniform());
        auto m = photon_moments(p);
        CHECK(m.variance == m.mean);
    }
}

TEST_CASE("loss monotonicity and positivity") {
    auto p = make_params({2, 1}, {40, -3}, 0.8, 0.4, {0.9, 0.1}, 1.0);
    // Fano -> 1 as eta -> 0+
    p.eta = 1e-8;
    auto m = photon_moments(p);
    CHECK(m.variance / m.mean == doctest::Approx(1.0).epsilon(1e-6));

    // variance bound: var >= eta mean (1 - eta (1 - e^{-2r})), variance > 0
    normal_sampler rng(5);
    for (int i = 0; i < 300; ++i) {
        const double r = 2.0 * rng.uniform();
        auto q = make_params(std::polar(5.0 * rng.uniform(), 2 * pi * rng.uniform()),
                             std::polar(10.0 + 200.0 * rng.uniform(), 2 * pi * rng.uniform()),
                             r, pi * (rng.uniform() - 0.5),
                             std::polar(rng.uniform(), 2 * pi * rng.uniform()),
                             0.01 + 0.99 * rng.uniform());
        auto mm = photon_moments(q);
        const double bound = q.eta * mm.mean * (1.0 - q.eta * (1.0 - std::exp(-2.0 * r)));
        CHECK(mm.variance > 0.0);
        CHECK(mm.variance >= bound - 1e-9 * std::abs(bound));
    }
}

TEST_CASE("2 phi periodicity") {
    auto p = make_params({1, 2}, {30, 0}, 0.9, 0.37, {0.8, 0.05}, 0.7);
    auto a = photon_moments(p);
    p.squeeze.phi += pi;
    auto b = photon_moments(p);
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-12));
    CHECK(a.mean == b.mean);

    // squeeze_spec::make normalizes into [-pi/2, pi/2)
    CHECK(squeeze_spec::make(0.1, pi / 2).phi == doctest::Approx(-pi / 2));
    CHECK(squeeze_spec::make(0.1, 0.2).phi == doctest::Approx(0.2));
    CHECK_THROWS_AS(squeeze_spec::make(-0.1, 0.0), numerical_error);
}
