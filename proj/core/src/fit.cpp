#include "dcsq/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "dcsq/errors.hpp"
#include "dcsq/gaussian.hpp"
#include "dcsq/rng.hpp"

namespace dcsq {

namespace {

constexpr double pi = std::numbers::pi;
constexpr int n_params = 5;

fit_params clamp_params(fit_params p, const fit_bounds& b) {
    auto pa = p.as_array();
    const auto lo = b.lo.as_array(), hi = b.hi.as_array();
    for (int i = 0; i < n_params; ++i) pa[i] = std::clamp(pa[i], lo[i], hi[i]);
    return fit_params::from_array(pa);
}

std::vector<double> residuals(std::span<const double> obs, const fit_params& p,
                              const model_inputs& in, bool chi2) {
    const auto model = model_sigma_trace(p, in);
    std::vector<double> e(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        e[i] = obs[i] - model[i];
        if (chi2) e[i] /= std::max(obs[i], 1e-12);
    }
    return e;
}

double sse_of(std::span<const double> e) {
    double s = 0.0;
    for (double v : e) s += v * v;
    return s;
}

} // namespace

std::vector<double> model_sigma_trace(const fit_params& p, const model_inputs& in) {
    if (in.phi_axis.size() != in.gamma_rel.size())
        throw data_error("model_sigma_trace: phi/gamma length mismatch");
    quantum_params q;
    q.beta = {in.beta_mag, 0.0};
    q.squeeze = squeeze_spec{std::max(p.r, 0.0), p.phi};
    q.eta = p.eta;
    std::vector<double> out(in.phi_axis.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        q.alpha = std::polar(in.alpha_mag, in.phi_axis[i]);
        q.gamma = {p.gamma_scale * in.gamma_rel[i], 0.0};
        const double var = photon_moments(q).variance;
        out[i] = std::sqrt(in.volts_scale * in.volts_scale * var + p.floor * p.floor);
    }
    return out;
}

fit_params initial_guess(std::span<const double> sigma_obs, const model_inputs& in) {
    fit_params g;
    g.eta = 0.5;
    g.gamma_scale = 0.8;
    g.floor = 0.0;
    if (sigma_obs.empty()) return g;
    const auto [mn_it, mx_it] = std::minmax_element(sigma_obs.begin(), sigma_obs.end());
    const double smin = std::max(*mn_it, 1e-12), smax = std::max(*mx_it, 1e-12);
    // with eta ~ 0.5, V_max/V_min ~ (1 + eta sinh 2r ...): invert crudely via
    // the pure-squeeze ratio e^{4r} = (Vmax/Vmin)^2
    g.r = std::min(4.0, std::max(0.05, 0.5 * std::log(smax / smin)));
    const std::size_t imax =
        static_cast<std::size_t>(std::distance(sigma_obs.begin(), mx_it));
    g.phi = normalize_squeeze_angle(
        in.phi_axis.empty() ? 0.0 : 0.5 * (in.phi_axis[imax % in.phi_axis.size()] - pi / 2.0));
    return g;
}

fit_result fit_variance_model(std::span<const double> sigma_obs, const model_inputs& in,
                              fit_params init, const fit_bounds& bounds,
                              const fit_options& opt) {
    if (sigma_obs.size() != in.phi_axis.size())
        throw data_error("fit_variance_model: observation/axis length mismatch");
    if (sigma_obs.size() < 8 * n_params)
        throw data_error("fit_variance_model: need at least 8 phase points per parameter");

    fit_result res;
    fit_params x = clamp_params(init, bounds);
    auto e = residuals(sigma_obs, x, in, opt.chi2_weighting);
    double sse = sse_of(e);
    res.objective_history.push_back(sse);

    const auto lo = bounds.lo.as_array(), hi = bounds.hi.as_array();
    double lambda = 1e-3;
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(sigma_obs.size()), n_params);
    bool converged = false;
    int iter = 0;

    auto eval_jacobian = [&](const fit_params& at) {
        const auto base = at.as_array();
        for (int j = 0; j < n_params; ++j) {
            const double h = std::max(1e-7, 1e-5 * std::abs(base[j]));
            auto fwd = base, bwd = base;
            fwd[j] += h;
            bwd[j] -= h;
            const auto ef = residuals(sigma_obs, fit_params::from_array(fwd), in,
                                      opt.chi2_weighting);
            const auto eb = residuals(sigma_obs, fit_params::from_array(bwd), in,
                                      opt.chi2_weighting);
            for (std::size_t i = 0; i < sigma_obs.size(); ++i)
                jac(static_cast<Eigen::Index>(i), j) = (ef[i] - eb[i]) / (2.0 * h);
        }
    };

    Eigen::VectorXd ev(static_cast<Eigen::Index>(e.size()));
    for (; iter < opt.max_iterations; ++iter) {
        eval_jacobian(x);
        for (std::size_t i = 0; i < e.size(); ++i)
            ev(static_cast<Eigen::Index>(i)) = e[i];
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * ev; // descent direction is +g

        // projected-gradient convergence test: ignore components pinned at a bound
        double gnorm = 0.0;
        {
            const auto xa = x.as_array();
            for (int j = 0; j < n_params; ++j) {
                const double gj = g(j);
                const bool at_lo = xa[j] <= lo[j] && gj < 0.0;
                const bool at_hi = xa[j] >= hi[j] && gj > 0.0;
                if (!at_lo && !at_hi) gnorm = std::max(gnorm, std::abs(gj));
            }
        }
        if (gnorm <= opt.gradient_tol * std::max(1.0, sse)) {
            converged = true;
            break;
        }

        bool accepted = false;
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
            Eigen::MatrixXd damped = jtj;
            for (int j = 0; j < n_params; ++j)
                damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(g);
            auto xa = x.as_array();
            double step_norm = 0.0;
            for (int j = 0; j < n_params; ++j) {
                xa[j] = std::clamp(xa[j] + step(j), lo[j], hi[j]);
                step_norm = std::max(step_norm, std::abs(step(j)));
            }
            if (step_norm < opt.step_tol) {
                converged = true;
                break;
            }
            const fit_params trial = fit_params::from_array(xa);
            const auto et = residuals(sigma_obs, trial, in, opt.chi2_weighting);
            const double sse_t = sse_of(et);
            if (sse_t < sse) {
                x = trial;
                e = et;
                sse = sse_t;
                res.objective_history.push_back(sse);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
            } else {
                lambda = std::min(lambda * 4.0, 1e12);
            }
        }
        if (!accepted) break; // stalled (or converged via tiny step)
    }

    // curvature-based uncertainties at the solution
    eval_jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const double dof = std::max(1.0, double(sigma_obs.size()) - n_params);
    const double s2 = sse / dof;
    Eigen::MatrixXd cov = (jtj + 1e-14 * Eigen::MatrixXd::Identity(n_params, n_params))
                              .ldlt()
                              .solve(Eigen::MatrixXd::Identity(n_params, n_params)) *
                          s2;
    std::array<double, 5> unc{};
    for (int j = 0; j < n_params; ++j) unc[j] = std::sqrt(std::max(0.0, cov(j, j)));

    x.phi = normalize_squeeze_angle(x.phi);
    res.params = x;
    res.uncertainty = fit_params::from_array(unc);
    res.rms_residual = std::sqrt(sse / double(sigma_obs.size()));
    res.iterations = iter;
    res.converged = converged;
    return res;
}

std::vector<scan_row> power_scan(const comb_config& comb, const acq_config& acq,
                                 const pipeline_options& pipe, const scan_spec& spec,
                                 int jobs) {
    if (!std::is_sorted(spec.powers_uw.begin(), spec.powers_uw.end()))
        throw config_error("power_scan: powers must be ascending");
    std::vector<scan_row> rows(spec.powers_uw.size());

    for (std::size_t i = 0; i < spec.powers_uw.size(); ++i) {
        scan_row& row = rows[i];
        row.power_w = spec.powers_uw[i] * 1e-6;
        try {
            comb_config c = comb;
            c.power_coh = row.power_w;
            acq_config a = acq;
            a.n_igms = spec.records_per_power;
            a.seed = derive_seed(acq.seed, i, /*stream=*/0x5ca4);

            const auto ens = synthesize_ensemble(c, a, jobs);
            pipeline_options po = pipe;
            po.jobs = jobs;
            const auto src = make_source(ens.records);
            const auto stats = analyze_ensemble(src, c, a, ens.resolved, po);

            // fit region: centerburst samples with usable envelope
            model_inputs in;
            std::vector<double> obs;
            for (std::size_t j = 0; j < stats.sigma_ngm.size(); ++j) {
                if (stats.envelope_rel[j] < spec.fit_envelope_min) continue;
                in.phi_axis.push_back(stats.phi_axis[j]);
                in.gamma_rel.push_back(stats.envelope_rel[j]);
                obs.push_back(stats.sigma_ngm[j]);
            }
            in.alpha_mag = ens.resolved.alpha_mag;
            in.beta_mag = ens.resolved.beta_mag;
            in.volts_scale = ens.resolved.ngm_gain * ens.resolved.volts_per_photon *
                             std::sqrt(stats.band_fraction);

            fit_params guess = initial_guess(obs, in);
            guess.floor = stats.sigma_floor;
            row.fit = fit_variance_model(obs, in, guess);

            // extrema of the fitted model over one fringe at the centerburst
            quantum_params tpl;
            tpl.alpha = {in.alpha_mag, 0.0};
            tpl.beta = {in.beta_mag, 0.0};
            tpl.gamma = {row.fit.params.gamma_scale, 0.0};
            tpl.squeeze = squeeze_spec{std::max(row.fit.params.r, 0.0), row.fit.params.phi};
            tpl.eta = row.fit.params.eta;
            row.extrema_count = count_variance_extrema(tpl, 1024);

            // measured squeezing extrema over the usable region
            double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
            for (std::size_t j = 0; j < stats.v_sqz_db.size(); ++j) {
                if (stats.envelope_rel[j] < spec.fit_envelope_min) continue;
                vmin = std::min(vmin, stats.v_sqz_db[j]);
                vmax = std::max(vmax, stats.v_sqz_db[j]);
            }
            row.min_vsqz_db = vmin;
            row.max_vsqz_db = vmax;
            row.ok = true;
        } catch (const std::exception& ex) {
            row.ok = false;
            row.error = ex.what();
        }
    }
    return rows;
}

} // namespace dcsq
