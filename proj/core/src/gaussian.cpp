#include "dcsq/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dcsq/errors.hpp"

namespace dcsq {

namespace {
constexpr double pi = std::numbers::pi;
} // namespace

double normalize_squeeze_angle(double phi) {
    double w = std::fmod(phi + pi / 2.0, pi);
    if (w < 0.0) w += pi;
    return w - pi / 2.0;
}

squeeze_spec squeeze_spec::make(double r, double phi) {
    if (!(r >= 0.0))
        throw numerical_error("squeeze_spec: r must be >= 0");
    return {r, normalize_squeeze_angle(phi)};
}

cplx displaced_amplitude(const quantum_params& p) {
    return p.beta + p.gamma * p.alpha;
}

double mean_field_phase_exact(const quantum_params& p) {
    const cplx nu = displaced_amplitude(p);
    if (std::abs(nu) == 0.0)
        throw numerical_error("mean_field_phase_exact: degenerate state, |beta + gamma alpha| = 0");
    return std::atan2(nu.imag(), nu.real());
}

phase_approx mean_field_phase_approx(const quantum_params& p) {
    const double beta_mag = std::abs(p.beta);
    if (beta_mag == 0.0)
        throw numerical_error("mean_field_phase_approx: |beta| = 0");
    const cplx d = p.gamma * p.alpha;
    const double d_mag = std::abs(d);
    // phase of the displacement term relative to beta
    const double phi_alpha = std::arg(d) - std::arg(p.beta);
    phase_approx out;
    out.value = d_mag * std::sin(phi_alpha) / beta_mag;
    out.large_ratio = d_mag / beta_mag >= 0.5;
    return out;
}

moment_pair photon_moments(const quantum_params& p) {
    const cplx nu = displaced_amplitude(p);
    const double nu2 = std::norm(nu);
    const double mean =
        p.eta * (std::norm(p.beta) + std::norm(p.alpha) +
                 2.0 * std::real(std::conj(p.beta) * p.gamma * p.alpha));
    double var = mean;
    if (p.squeeze.r != 0.0 && nu2 > 0.0) {
        const double phi_nu = std::atan2(nu.imag(), nu.real());
        const double sh = std::sinh(p.squeeze.r);
        var += p.eta * p.eta * nu2 *
               (2.0 * sh * sh -
                std::sinh(2.0 * p.squeeze.r) * std::cos(2.0 * (p.squeeze.phi - phi_nu)));
    }
    return {mean, var};
}

moment_pair photon_moments_full(const quantum_params& p) {
    const cplx nu = displaced_amplitude(p);
    const double nu2 = std::norm(nu);
    const double sh = std::sinh(p.squeeze.r);
    const double sh2 = sh * sh;
    const double perp = (1.0 - std::norm(p.gamma)) * std::norm(p.alpha);
    const double mean = p.eta * (nu2 + sh2 + perp);

    double quad = nu2 * std::cosh(2.0 * p.squeeze.r);
    if (p.squeeze.r != 0.0 && nu2 > 0.0) {
        const double phi_nu = std::atan2(nu.imag(), nu.real());
        quad -= nu2 * std::sinh(2.0 * p.squeeze.r) *
                std::cos(2.0 * (p.squeeze.phi - phi_nu));
    }
    const double var = p.eta * p.eta * (2.0 * sh2 * sh2 + 2.0 * sh2 + quad) +
                       p.eta * (1.0 - p.eta) * (nu2 + sh2) + p.eta * perp;
    return {mean, var};
}

double kerr_squeeze_angle(cplx beta, double r) {
    const double b2 = std::norm(beta);
    if (b2 == 0.0)
        throw numerical_error("kerr_squeeze_angle: |beta| = 0");
    if (r < 0.0)
        throw numerical_error("kerr_squeeze_angle: r must be >= 0");
    const double arg =
        std::tanh(r) * (2.0 * b2 + std::cosh(2.0 * r) + 1.0) / (2.0 * b2);
    if (arg > 1.0)
        throw numerical_error("kerr_squeeze_angle: unphysically large r for |beta| "
                              "(acos argument > 1)");
    return 0.5 * std::acos(arg) - std::arg(beta);
}

double haus_squeeze_estimate(double g, cplx beta) {
    if (g < 0.0)
        throw numerical_error("haus_squeeze_estimate: g must be >= 0");
    const double x = g * std::norm(beta);
    const double inner = 1.0 + 2.0 * x * x - 2.0 * x * std::sqrt(1.0 + x * x);
    return -0.5 * std::log(inner);
}

double taylor_variance_small_r(double phi, double ratio, double phi_alpha) {
    return std::cos(2.0 * phi) +
           2.0 * ratio * std::sin(2.0 * phi) * std::sin(phi_alpha);
}

int count_variance_extrema(const quantum_params& tpl, int samples) {
    if (samples < 256)
        throw config_error("count_variance_extrema: samples must be >= 256");
    const double alpha_mag = std::abs(tpl.alpha);
    std::vector<double> v(static_cast<std::size_t>(samples));
    quantum_params p = tpl;
    for (int i = 0; i < samples; ++i) {
        const double phi_a = 2.0 * pi * i / samples;
        p.alpha = std::polar(alpha_mag, phi_a);
        v[static_cast<std::size_t>(i)] = photon_moments(p).variance;
    }
    int count = 0;
    const int n = samples;
    for (int i = 0; i < n; ++i) {
        const double a = v[static_cast<std::size_t>((i + n - 1) % n)];
        const double b = v[static_cast<std::size_t>(i)];
        const double c = v[static_cast<std::size_t>((i + 1) % n)];
        if (b == a || b == c)
            throw numerical_error("count_variance_extrema: plateau (tied neighbors) at grid "
                                  "index " + std::to_string(i));
        if ((b > a && b > c) || (b < a && b < c)) ++count;
    }
    return count;
}

std::vector<bifurcation_point> bifurcation_scan(const quantum_params& tpl,
                                                std::span<const double> alpha_mags,
                                                int samples) {
    if (!std::is_sorted(alpha_mags.begin(), alpha_mags.end()))
        throw config_error("bifurcation_scan: alpha magnitudes must be sorted ascending");
    const double beta_mag = std::abs(tpl.beta);
    const double gamma_mag = std::abs(tpl.gamma);
    if (beta_mag == 0.0)
        throw config_error("bifurcation_scan: |beta| = 0");
    std::vector<bifurcation_point> out;
    out.reserve(alpha_mags.size());
    quantum_params p = tpl;
    bool seen_four = false;
    for (double mag : alpha_mags) {
        p.alpha = cplx(mag, 0.0);
        const int n = count_variance_extrema(p, samples);
        if (seen_four && n < 4)
            throw numerical_error("bifurcation_scan: non-monotone extrema count (4 -> " +
                                  std::to_string(n) + ") at |alpha| = " + std::to_string(mag));
        seen_four = seen_four || n >= 4;
        out.push_back({gamma_mag * mag / beta_mag, n});
    }
    return out;
}

double refine_bifurcation_threshold(const quantum_params& tpl, double lo_mag,
                                    double hi_mag, int samples, double rel_tol) {
    quantum_params p = tpl;
    const double beta_mag = std::abs(tpl.beta);
    const double gamma_mag = std::abs(tpl.gamma);
    auto count_at = [&](double mag) {
        p.alpha = cplx(mag, 0.0);
        return count_variance_extrema(p, samples);
    };
    if (count_at(lo_mag) >= 4 || count_at(hi_mag) < 4)
        throw numerical_error("refine_bifurcation_threshold: [lo, hi] does not bracket the "
                              "2 -> 4 transition");
    while ((hi_mag - lo_mag) > rel_tol * hi_mag) {
        const double mid = 0.5 * (lo_mag + hi_mag);
        (count_at(mid) >= 4 ? hi_mag : lo_mag) = mid;
    }
    return gamma_mag * 0.5 * (lo_mag + hi_mag) / beta_mag;
}

} // namespace dcsq
