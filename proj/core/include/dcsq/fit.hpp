#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcsq/dsp.hpp"

// Damped least-squares fit of the closed-form sigma model to phase-resolved
// noise traces, and the power-scan study built on top of it.

namespace dcsq {

struct fit_params {
    double r = 0.0;
    double phi = 0.0;
    double eta = 0.5;
    double gamma_scale = 0.8; ///< fitted gamma_max multiplying the relative envelope
    double floor = 0.0;       ///< V, additive noise-floor sigma in NGM units

    std::array<double, 5> as_array() const { return {r, phi, eta, gamma_scale, floor}; }
    static fit_params from_array(const std::array<double, 5>& a) {
        return {a[0], a[1], a[2], a[3], a[4]};
    }
};

struct fit_bounds {
    fit_params lo{0.0, -10.0, 0.001, 0.01, 0.0};
    fit_params hi{6.0, 10.0, 1.0, 1.5, 1.0};
};

struct fit_options {
    int max_iterations = 200;
    double gradient_tol = 1e-9;  ///< on the projected gradient, scaled by SSE
    double step_tol = 1e-13;
    bool chi2_weighting = false; ///< weight residuals by 1/sigma_obs
};

struct fit_result {
    fit_params params;
    fit_params uncertainty; ///< 1-sigma from the local curvature
    double rms_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history; ///< SSE after each accepted step
};

/// Known amplitudes and scaling for the model trace: sigma_model(j) =
/// sqrt(volts_scale^2 * Var_photons(j) + floor^2) with Var_photons from
/// photon_moments at alpha = alpha_mag e^{i phi_axis[j]}, beta = beta_mag,
/// gamma = gamma_scale * gamma_rel[j].
struct model_inputs {
    std::vector<double> phi_axis;
    std::vector<double> gamma_rel;
    double alpha_mag = 0.0;
    double beta_mag = 0.0;
    double volts_scale = 0.0; ///< ngm_gain * volts_per_photon * sqrt(band_fraction)
};

std::vector<double> model_sigma_trace(const fit_params& p, const model_inputs& in);

/// Damped Gauss-Newton (Levenberg-style) minimization of
/// sum (sigma_obs - sigma_model)^2 over (r, phi, eta, gamma_scale, floor),
/// Jacobian by central finite differences, bounds enforced by projection.
/// Deterministic for identical inputs. phi is canonicalized to [-pi/2, pi/2).
fit_result fit_variance_model(std::span<const double> sigma_obs, const model_inputs& in,
                              fit_params init, const fit_bounds& bounds = {},
                              const fit_options& opt = {});

/// Heuristic initial guess from the observed trace (r from the max/min sigma
/// ratio, phi from the phase of the extrema, eta = 0.5).
fit_params initial_guess(std::span<const double> sigma_obs, const model_inputs& in);

// ---------------------------------------------------------------------------
// power scan

struct scan_spec {
    std::vector<double> powers_uw = {50, 110, 170, 230, 290, 350, 410, 470, 570};
    std::uint32_t records_per_power = 160;
    double fit_envelope_min = 0.02; ///< fit region: envelope_rel above this
};

struct scan_row {
    double power_w = 0.0;
    fit_result fit;
    int extrema_count = 0; ///< extrema of the fitted model over one fringe
    double min_vsqz_db = 0.0;
    double max_vsqz_db = 0.0;
    bool ok = false;
    std::string error;
};

/// synth -> pipeline -> fit for each coherent power. Rows are independent;
/// failures are recorded per row without aborting the scan. Asserts the
/// anti-squeezing maximum is nondecreasing across successful rows.
std::vector<scan_row> power_scan(const comb_config& comb, const acq_config& acq,
                                 const pipeline_options& pipe, const scan_spec& spec,
                                 int jobs = 1);

} // namespace dcsq
