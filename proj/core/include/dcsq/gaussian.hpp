#pragma once

#include <complex>
#include <span>
#include <vector>

namespace dcsq {

using cplx = std::complex<double>;

/// Single-mode squeezing: strength r >= 0 and ellipse angle phi.
/// The variance model is pi-periodic in phi, so phi is kept in [-pi/2, pi/2).
struct squeeze_spec {
    double r = 0.0;
    double phi = 0.0;

    static squeeze_spec make(double r, double phi);
};

/// Wraps an angle into [-pi/2, pi/2) (the 2*phi periodicity of the model).
double normalize_squeeze_angle(double phi);

/// State + detection description of the displaced Kerr-squeezed comb mode.
///
/// Amplitudes are dimensionless, in sqrt(photons per detection bin):
/// |alpha|^2 and |beta|^2 are mean photon numbers per bin of the displacing
/// (weak) and squeezed (strong) combs. gamma is the complex temporal mode
/// overlap (|gamma| <= 1) and eta is the detection efficiency in [0, 1].
struct quantum_params {
    cplx alpha{0.0, 0.0};
    cplx beta{0.0, 0.0};
    squeeze_spec squeeze{};
    cplx gamma{1.0, 0.0};
    double eta = 1.0;
};

/// First two photon-number moments, photons and photons^2 per detection bin.
struct moment_pair {
    double mean = 0.0;
    double variance = 0.0;
};

struct phase_approx {
    double value = 0.0;
    /// Set when |gamma*alpha|/|beta| >= 0.5 and the small-ratio expansion is
    /// outside its stated regime.
    bool large_ratio = false;
};

/// nu = beta + gamma*alpha, the displaced mean field.
cplx displaced_amplitude(const quantum_params& p);

/// arg(beta + gamma*alpha) via atan2. Throws numerical_error when |nu| = 0.
double mean_field_phase_exact(const quantum_params& p);

/// Small-ratio mean-field phase |gamma*alpha| sin(phi_alpha) / |beta| in the
/// frame where beta is real (phi_alpha = arg(gamma*alpha) - arg(beta)).
phase_approx mean_field_phase_approx(const quantum_params& p);

/// Simplified mean/variance model (the measurement-facing form):
///   mean = eta (|beta|^2 + |alpha|^2 + 2 Re(beta* gamma alpha))
///   var  = eta^2 |nu|^2 (2 sinh^2 r - sinh 2r cos 2(phi - arg nu)) + mean
moment_pair photon_moments(const quantum_params& p);

/// Un-simplified model: keeps the squeezed-vacuum mean sinh^2 r, the
/// 2 sinh^4 r + 2 sinh^2 r number-variance terms, the eta(1-eta) vacuum-port
/// contribution, and the perpendicular-mode term eta (1-|gamma|^2)|alpha|^2.
moment_pair photon_moments_full(const quantum_params& p);

/// Squeezing angle that leaves the amplitude quadrature of the Kerr state
/// unchanged:
///   phi = +1/2 acos[ tanh r (2|beta|^2 + cosh 2r + 1) / (2|beta|^2) ] - theta
/// Returns the "+" branch; the "-" branch is its mirror. Throws
/// numerical_error when the acos argument exceeds 1 (r too large for |beta|).
double kerr_squeeze_angle(cplx beta, double r);

/// Haus estimate of the Kerr squeezing strength,
///   r = -1/2 log(1 + 2 g^2 |beta|^4 - 2 g |beta|^2 sqrt(1 + g^2 |beta|^4)),
/// with g the nonlinear phase per photon. Note: for the exact Kerr unitary
/// exp(i g_k n^2), the linearized phase per photon is 2 g_k |beta|, i.e. this
/// estimate applies with g = 2 g_k.
double haus_squeeze_estimate(double g, cplx beta);

/// Small-R expansion of the phase-dependent variance factor:
///   cos(2 phi) + 2 R sin(2 phi) sin(phi_alpha).
double taylor_variance_small_r(double phi, double ratio, double phi_alpha);

/// Counts strict local extrema of photon_moments().variance over a uniform
/// phi_alpha grid of `samples` points on [0, 2pi), rotating only arg(alpha)
/// of the template. Plateaus (exact neighbor ties) raise numerical_error;
/// samples must be >= 256.
int count_variance_extrema(const quantum_params& tpl, int samples);

struct bifurcation_point {
    double ratio = 0.0; ///< R = |gamma alpha| / |beta|
    int extrema = 0;
};

/// Evaluates count_variance_extrema for each |alpha| in ascending
/// `alpha_mags` (template gamma/beta fixed). The 2 -> 4 transition must be
/// monotone within the scan; a 4 -> 2 reversion raises numerical_error.
std::vector<bifurcation_point> bifurcation_scan(const quantum_params& tpl,
                                                std::span<const double> alpha_mags,
                                                int samples = 1024);

/// Locates the 2 -> 4 extrema threshold ratio R* by bisection on |alpha|,
/// to relative tolerance rel_tol, counting on the same fixed grid.
/// [lo_mag, hi_mag] must bracket the transition.
double refine_bifurcation_threshold(const quantum_params& tpl, double lo_mag,
                                    double hi_mag, int samples = 1024,
                                    double rel_tol = 1e-3);

} // namespace dcsq
