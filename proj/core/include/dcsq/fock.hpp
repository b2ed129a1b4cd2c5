#pragma once

#include <cstdint>
#include <vector>

#include "dcsq/gaussian.hpp"

// Exact truncated-Fock-space oracle used to validate every closed form in
// gaussian.hpp. Conventions (documented once, used everywhere): quadratures
// x = (b + b†)/sqrt(2), p = (b - b†)/(i sqrt(2)) with vacuum variance 1/2;
// x_phi = cos(phi) x + sin(phi) p; squeeze S(r,phi) = exp[r/2 (e^{-2i phi} b²
// - e^{2i phi} b†²)]; displacement D(nu) = exp(nu b† - nu* b).
//
// Oracle validation is restricted to small amplitudes (|nu| of order 10 or
// less); the experimental regime |nu|^2 ~ 1e8 is not representable in Fock
// space, and the Gaussian formulas — polynomial in the amplitudes — are
// trusted to extrapolate.

namespace dcsq {

struct fock_state {
    std::vector<cplx> coeffs; ///< number-basis amplitudes, n = 0 .. N-1
    int truncation = 0;       ///< N

    double norm_sq() const;
    /// Probability mass above n = 0.9 N (the truncation-adequacy measure).
    double tail_mass() const;
};

struct oracle_moments {
    double mean = 0.0;
    double variance = 0.0;
    double truncation_error = 0.0; ///< tail mass of the underlying state
};

/// Default truncation max(512, ceil(8 (|nu|^2 + sinh^2 r)) + 32).
int default_truncation(cplx nu, double r);

/// D(nu) S(r,phi) |0>, built by applying the squeeze and displacement
/// generator exponentials to vacuum (scaled Taylor series of the
/// anti-Hermitian generators acting on the state vector).
/// Throws numerical_error when the tail mass exceeds 1e-8.
fock_state build_displaced_squeezed(cplx nu, squeeze_spec s, int truncation);

/// mean = sum n |c_n|^2, variance = sum n^2 |c_n|^2 - mean^2.
oracle_moments number_moments(const fock_state& s);

/// exp(i g (b†b)^2) |beta>: coherent coefficients times e^{i g n^2}.
/// g is the Kerr phase per photon^2.
fock_state apply_kerr_exact(cplx beta, double g, int truncation);

/// Loss channel at the moment level: mean -> eta mean,
/// var -> eta^2 var + eta (1-eta) mean. Exact for the first two moments.
oracle_moments apply_loss(const fock_state& s, double eta);
oracle_moments apply_loss(const oracle_moments& m, double eta);

/// Var(x_theta) of the state (vacuum-variance-1/2 convention).
double quadrature_variance(const fock_state& s, double theta);

struct quad_sweep {
    double min_variance = 0.0;
    double min_angle = 0.0; ///< angle in [0, pi) attaining the minimum
};

/// Minimum quadrature variance over a uniform sweep of n_angles in [0, pi).
quad_sweep min_quadrature_variance(const fock_state& s, int n_angles = 720);

/// Monte Carlo oracle: samples the Gaussian Wigner distribution of the
/// displaced squeezed mode, converts symmetric-ordered moments of
/// (x^2+p^2)/2 to photon-number moments, applies the loss map, and adds the
/// perpendicular-mode Poisson contribution. Deterministic for a given seed
/// regardless of `jobs` (the sample budget is split into fixed batches whose
/// partial moments are merged in batch order).
oracle_moments wigner_mc_moments(const quantum_params& p, std::uint64_t n_samples,
                                 std::uint64_t seed, int jobs = 1);

/// wigner_mc_moments plus standard errors estimated from the batch scatter.
struct mc_result {
    oracle_moments moments;
    double mean_se = 0.0;
    double variance_se = 0.0;
};
mc_result wigner_mc_detail(const quantum_params& p, std::uint64_t n_samples,
                           std::uint64_t seed, int jobs = 1);

} // namespace dcsq
