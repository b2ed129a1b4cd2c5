#include "doctest.h"

#include <cmath>
#include <numbers>

#include "dcsq/errors.hpp"
#include "dcsq/fock.hpp"
#include "dcsq/rng.hpp"

using namespace dcsq;
using std::numbers::pi;

TEST_CASE("build_displaced_squeezed basics") {
    // vacuum
    auto vac = build_displaced_squeezed({0, 0}, {0.0, 0.0}, 64);
    CHECK(std::abs(vac.coeffs[0]) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t n = 1; n < 8; ++n) CHECK(std::abs(vac.coeffs[n]) < 1e-14);

    // coherent nu=2: Poisson coefficients |c_n|^2 = e^{-4} 4^n / n!
    auto coh = build_displaced_squeezed({2, 0}, {0.0, 0.0}, 128);
    double fact = 1.0;
    for (int n = 0; n < 10; ++n) {
        if (n > 0) fact *= n;
        const double expect = std::exp(-4.0) * std::pow(4.0, n) / fact;
        CHECK(std::norm(coh.coeffs[static_cast<std::size_t>(n)]) ==
              doctest::Approx(expect).epsilon(1e-9));
    }

    // squeezed vacuum: only even Fock states populated
    auto sqz = build_displaced_squeezed({0, 0}, {0.5, 0.3}, 256);
    for (std::size_t n = 1; n < sqz.coeffs.size(); n += 2)
        CHECK(std::abs(sqz.coeffs[n]) < 1e-12);
}

TEST_CASE("number_moments closed forms") {
    // squeezed vacuum r=0.5: mean sinh^2 r, var 2 sinh^4 r + 2 sinh^2 r
    // (= <(b†b)^2> of 3 sinh^4 + 2 sinh^2 minus mean^2)
    const double r = 0.5;
    auto sqz = build_displaced_squeezed({0, 0}, {r, 0.0}, 256);
    auto m = number_moments(sqz);
    const double sh2 = std::sinh(r) * std::sinh(r);
    CHECK(m.mean == doctest::Approx(sh2).epsilon(1e-10));
    CHECK(m.variance == doctest::Approx(2 * sh2 * sh2 + 2 * sh2).epsilon(1e-10));

    // coherent nu=3: Poisson
    auto coh = build_displaced_squeezed({3, 0}, {0.0, 0.0}, 512);
    auto mc = number_moments(coh);
    CHECK(mc.mean == doctest::Approx(9.0).epsilon(1e-10));
    CHECK(mc.variance == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(mc.truncation_error < 1e-12);
}

TEST_CASE("oracle agreement with the closed-form full moments") {
    normal_sampler rng(31);
    for (int i = 0; i < 25; ++i) {
        const cplx nu = std::polar(6.0 * rng.uniform(), 2 * pi * rng.uniform());
        const double r = 0.8 * rng.uniform();
        const double phi = pi * (rng.uniform() - 0.5);
        const int n_trunc = default_truncation(nu, r);
        auto st = build_displaced_squeezed(nu, {r, phi}, n_trunc);
        auto om = number_moments(st);

        quantum_params p;
        p.alpha = {0, 0};
        p.beta = nu;
        p.gamma = {1, 0};
        p.squeeze = {r, phi};
        p.eta = 1.0;
        auto cm = photon_moments_full(p);
        CHECK(om.mean == doctest::Approx(cm.mean).epsilon(1e-3));
        CHECK(om.variance == doctest::Approx(cm.variance).epsilon(1e-3));
    }
}

TEST_CASE("truncation adequacy is enforced") {
    CHECK_THROWS_AS(build_displaced_squeezed({6, 0}, {0.5, 0.0}, 48), numerical_error);
    CHECK(default_truncation({6, 0}, 0.8) == 512);
    CHECK(default_truncation({12, 0}, 0.0) == std::max(512, int(8 * 144 + 32)));
}

TEST_CASE("apply_kerr_exact") {
    // g = 0: coherent state unchanged
    auto plain = apply_kerr_exact({3, 0}, 0.0, 512);
    auto coh = build_displaced_squeezed({3, 0}, {0.0, 0.0}, 512);
    for (std::size_t n = 0; n < 32; ++n)
        CHECK(std::abs(plain.coeffs[n] - coh.coeffs[n]) < 1e-12);

    // Kerr preserves photon-number statistics for any g
    for (double g : {0.0, 0.001, 0.01, 0.1}) {
        auto st = apply_kerr_exact({3, 0}, g, 512);
        auto m = number_moments(st);
        CHECK(std::abs(m.mean - 9.0) < 1e-12 * 9.0);
        CHECK(std::abs(m.variance - 9.0) < 1e-12 * 9.0);
    }
}

TEST_CASE("exact Kerr squeezing matches the linearized Gaussian prediction") {
    // For H = g (b†b)^2 the linearized phase per photon is 2 g |beta|^2, so
    // the Haus estimate applies with doubled argument.
    const double beta_mag = 3.0;
    const double g = 0.01; // g |beta|^2 = 0.09
    auto st = apply_kerr_exact({beta_mag, 0}, g, 512);
    auto sweep = min_quadrature_variance(st, 2048);
    const double r_pred = haus_squeeze_estimate(2.0 * g, {beta_mag, 0});
    const double v_pred = 0.5 * std::exp(-2.0 * r_pred);
    CHECK(sweep.min_variance == doctest::Approx(v_pred).epsilon(0.10));
}

TEST_CASE("quadrature variance conventions") {
    // vacuum: 1/2 at every angle
    auto vac = build_displaced_squeezed({0, 0}, {0.0, 0.0}, 64);
    CHECK(quadrature_variance(vac, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(quadrature_variance(vac, 1.1) == doctest::Approx(0.5).epsilon(1e-12));

    // squeezed vacuum: e^{-2r}/2 at theta = phi, e^{+2r}/2 orthogonal
    const double r = 0.6, phi = 0.35;
    auto sqz = build_displaced_squeezed({0, 0}, {r, phi}, 512);
    CHECK(quadrature_variance(sqz, phi) ==
          doctest::Approx(0.5 * std::exp(-2 * r)).epsilon(1e-8));
    CHECK(quadrature_variance(sqz, phi + pi / 2) ==
          doctest::Approx(0.5 * std::exp(2 * r)).epsilon(1e-8));

    // displacement does not change quadrature variances
    auto disp = build_displaced_squeezed({4, 1}, {r, phi}, 512);
    CHECK(quadrature_variance(disp, phi) ==
          doctest::Approx(0.5 * std::exp(-2 * r)).epsilon(1e-8));
}

TEST_CASE("apply_loss") {
    auto coh = build_displaced_squeezed({3, 0}, {0.0, 0.0}, 512);

    auto id = apply_loss(coh, 1.0);
    CHECK(id.mean == doctest::Approx(9.0).epsilon(1e-10));
    CHECK(id.variance == doctest::Approx(9.0).epsilon(1e-9));

    auto dark = apply_loss(coh, 0.0);
    CHECK(dark.mean == 0.0);
    CHECK(dark.variance == 0.0);

    auto half = apply_loss(coh, 0.5);
    CHECK(half.mean == doctest::Approx(4.5).epsilon(1e-10));
    CHECK(half.variance == doctest::Approx(4.5).epsilon(1e-9));

    // composition: loss(eta1) then loss(eta2) == loss(eta1 eta2)
    auto sqz = build_displaced_squeezed({2, 1}, {0.7, -0.4}, 512);
    auto a = apply_loss(apply_loss(number_moments(sqz), 0.8), 0.6);
    auto b = apply_loss(number_moments(sqz), 0.8 * 0.6);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-12));
}

TEST_CASE("wigner_mc_moments") {
    quantum_params p;
    p.beta = {10, 0};
    p.squeeze = {0.0, 0.0};
    p.eta = 1.0;

    // coherent: mean = var = 100 within 3 standard errors
    auto mc = wigner_mc_detail(p, 200000, 12345);
    CHECK(std::abs(mc.moments.mean - 100.0) < 3.0 * mc.mean_se);
    CHECK(std::abs(mc.moments.variance - 100.0) < 3.0 * mc.variance_se);

    // displaced squeezed: exact full variance, and the simplified form 36.79
    // within MC error plus the (known) full-minus-simplified offset
    p.squeeze = {0.5, 0.0};
    auto mc2 = wigner_mc_detail(p, 400000, 777);
    auto full = photon_moments_full(p);
    auto simple = photon_moments(p);
    CHECK(std::abs(mc2.moments.variance - full.variance) < 3.0 * mc2.variance_se);
    CHECK(std::abs(mc2.moments.variance - simple.variance) <
          3.0 * mc2.variance_se + (full.variance - simple.variance) + 1e-12);
    CHECK(simple.variance == doctest::Approx(36.7879441).epsilon(1e-8));

    // determinism: same seed => bit-identical, and independent of jobs
    auto a = wigner_mc_moments(p, 150000, 99, 1);
    auto b = wigner_mc_moments(p, 150000, 99, 1);
    auto c = wigner_mc_moments(p, 150000, 99, 4);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
    CHECK(a.mean == c.mean);
    CHECK(a.variance == c.variance);

    CHECK_THROWS_AS(wigner_mc_moments(p, 100, 1), config_error);
}

TEST_CASE("wigner MC agrees with the closed form on random draws") {
    normal_sampler rng(2024);
    for (int i = 0; i < 12; ++i) {
        quantum_params p;
        p.beta = std::polar(2.0 + 8.0 * rng.uniform(), 2 * pi * rng.uniform());
        p.alpha = std::polar(2.0 * rng.uniform(), 2 * pi * rng.uniform());
        p.gamma = std::polar(rng.uniform(), 2 * pi * rng.uniform());
        p.squeeze = {0.8 * rng.uniform(), pi * (rng.uniform() - 0.5)};
        p.eta = 0.2 + 0.8 * rng.uniform();
        auto mc = wigner_mc_detail(p, 150000, 5000 + i);
        auto cm = photon_moments_full(p);
        CHECK(std::abs(mc.moments.mean - cm.mean) < 4.0 * mc.mean_se + 1e-9);
        CHECK(std::abs(mc.moments.variance - cm.variance) < 4.0 * mc.variance_se + 1e-9);
    }
}
