#include "dcsq/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dcsq/errors.hpp"

namespace dcsq {

using nlohmann::json;

namespace {

// strict object access: every key must be consumed
class strict_object {
public:
    strict_object(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j.is_object())
            throw config_error("config: '" + name_ + "' must be a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) unseen_.insert(it.key());
    }

    template <typename T>
    void get(const char* key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        unseen_.erase(key);
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw config_error("config: bad type for '" + name_ + "." + key + "'");
        }
    }

    void finish() const {
        if (!unseen_.empty())
            throw config_error("config: unknown key '" + name_ + "." + *unseen_.begin() + "'");
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> unseen_;
};

json parse_text(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: JSON parse failure: ") + e.what());
    }
}

ceo_model ceo_from_string(const std::string& s) {
    if (s == "fixed") return ceo_model::fixed;
    if (s == "uniform") return ceo_model::uniform;
    if (s == "listed") return ceo_model::listed;
    throw config_error("config: ceo_model must be fixed|uniform|listed");
}

const char* ceo_to_string(ceo_model m) {
    switch (m) {
        case ceo_model::fixed: return "fixed";
        case ceo_model::uniform: return "uniform";
        case ceo_model::listed: return "listed";
    }
    return "fixed";
}

detector_mode detector_from_string(const std::string& s) {
    if (s == "single") return detector_mode::single;
    if (s == "dual_balanced") return detector_mode::dual_balanced;
    throw config_error("config: detector must be single|dual_balanced");
}

sampling_mode sampling_from_string(const std::string& s) {
    if (s == "gaussian") return sampling_mode::gaussian;
    if (s == "poisson") return sampling_mode::poisson;
    if (s == "noise_free") return sampling_mode::noise_free;
    throw config_error("config: sampling must be gaussian|poisson|noise_free");
}

ceo_policy policy_from_string(const std::string& s) {
    if (s == "densest") return ceo_policy::densest_window;
    if (s == "nearest") return ceo_policy::nearest_to_target;
    throw config_error("config: ceo_policy must be densest|nearest");
}

json comb_json(const comb_config& c) {
    return json{{"f_rep_hz", c.f_rep},
                {"delta_f_rep_hz", c.delta_f_rep},
                {"igm_carrier_hz", c.igm_carrier},
                {"pulse_fwhm_s", c.pulse_fwhm},
                {"lambda_center_m", c.lambda_center},
                {"power_sqz_w", c.power_sqz},
                {"power_coh_w", c.power_coh},
                {"gamma_max", c.gamma_max},
                {"ceo_model", ceo_to_string(c.ceo)},
                {"ceo_value_rad", c.ceo_value},
                {"ceo_list_rad", c.ceo_list},
                {"eta", c.eta},
                {"r", c.r},
                {"phi_policy", c.phi_kerr_derived ? "kerr" : "explicit"},
                {"phi_rad", c.phi_explicit}};
}

comb_config comb_from(const json& j, const std::string& name) {
    comb_config c;
    strict_object o(j, name);
    o.get("f_rep_hz", c.f_rep);
    o.get("delta_f_rep_hz", c.delta_f_rep);
    o.get("igm_carrier_hz", c.igm_carrier);
    o.get("pulse_fwhm_s", c.pulse_fwhm);
    o.get("lambda_center_m", c.lambda_center);
    o.get("power_sqz_w", c.power_sqz);
    o.get("power_coh_w", c.power_coh);
    o.get("gamma_max", c.gamma_max);
    std::string model = ceo_to_string(c.ceo);
    o.get("ceo_model", model);
    c.ceo = ceo_from_string(model);
    o.get("ceo_value_rad", c.ceo_value);
    o.get("ceo_list_rad", c.ceo_list);
    o.get("eta", c.eta);
    o.get("r", c.r);
    std::string policy = c.phi_kerr_derived ? "kerr" : "explicit";
    o.get("phi_policy", policy);
    if (policy == "kerr")
        c.phi_kerr_derived = true;
    else if (policy == "explicit")
        c.phi_kerr_derived = false;
    else
        throw config_error("config: phi_policy must be kerr|explicit");
    o.get("phi_rad", c.phi_explicit);
    o.finish();
    return c;
}

json acq_json(const acq_config& a) {
    return json{{"sample_rate_hz", a.sample_rate},
                {"n_igms", a.n_igms},
                {"lpf_cutoff_hz", a.lpf_cutoff},
                {"hpf_cutoff_hz", a.hpf_cutoff},
                {"adc_bits", a.adc_bits},
                {"full_scale_v", a.full_scale},
                {"volts_per_photon", a.volts_per_photon},
                {"ngm_gain", a.ngm_gain},
                {"noise_floor_sigma_v", a.noise_floor_sigma},
                {"detector", a.detector == detector_mode::single ? "single" : "dual_balanced"},
                {"sampling", a.sampling == sampling_mode::gaussian
                                 ? "gaussian"
                                 : (a.sampling == sampling_mode::poisson ? "poisson"
                                                                         : "noise_free")},
                {"seed", a.seed},
                {"record_samples", a.record_samples},
                {"max_shift_samples", a.max_shift_samples}};
}

acq_config acq_from(const json& j, const std::string& name) {
    acq_config a;
    strict_object o(j, name);
    o.get("sample_rate_hz", a.sample_rate);
    o.get("n_igms", a.n_igms);
    o.get("lpf_cutoff_hz", a.lpf_cutoff);
    o.get("hpf_cutoff_hz", a.hpf_cutoff);
    o.get("adc_bits", a.adc_bits);
    o.get("full_scale_v", a.full_scale);
    o.get("volts_per_photon", a.volts_per_photon);
    o.get("ngm_gain", a.ngm_gain);
    o.get("noise_floor_sigma_v", a.noise_floor_sigma);
    std::string det = "single", smp = "gaussian";
    if (a.detector == detector_mode::dual_balanced) det = "dual_balanced";
    o.get("detector", det);
    a.detector = detector_from_string(det);
    o.get("sampling", smp);
    a.sampling = sampling_from_string(smp);
    o.get("seed", a.seed);
    o.get("record_samples", a.record_samples);
    o.get("max_shift_samples", a.max_shift_samples);
    o.finish();
    return a;
}

json pipeline_json(const pipeline_options& p) {
    return json{{"ceo_window_rad", p.ceo_window},
                {"ceo_policy",
                 p.policy == ceo_policy::densest_window ? "densest" : "nearest"},
                {"ceo_target_rad", p.ceo_target},
                {"envelope_floor", p.envelope_floor},
                {"min_correlation", p.min_correlation},
                {"snl_outer_frac", p.snl_outer_frac},
                {"phase_bins", p.phase_bins},
                {"voltage_bins", p.voltage_bins},
                {"floor_variance_v2", p.floor_variance}};
}

pipeline_options pipeline_from(const json& j, const std::string& name) {
    pipeline_options p;
    strict_object o(j, name);
    o.get("ceo_window_rad", p.ceo_window);
    std::string pol = "densest";
    o.get("ceo_policy", pol);
    p.policy = policy_from_string(pol);
    o.get("ceo_target_rad", p.ceo_target);
    o.get("envelope_floor", p.envelope_floor);
    o.get("min_correlation", p.min_correlation);
    o.get("snl_outer_frac", p.snl_outer_frac);
    o.get("phase_bins", p.phase_bins);
    o.get("voltage_bins", p.voltage_bins);
    o.get("floor_variance_v2", p.floor_variance);
    o.finish();
    return p;
}

json fit_json(const fit_cli_config& f) {
    return json{{"init_r", f.init_r},
                {"init_phi_rad", f.init_phi},
                {"init_eta", f.init_eta},
                {"init_gamma_scale", f.init_gamma_scale},
                {"init_floor_v", f.init_floor},
                {"chi2_weighting", f.chi2_weighting},
                {"max_iterations", f.max_iterations},
                {"envelope_min", f.envelope_min}};
}

fit_cli_config fit_from(const json& j, const std::string& name) {
    fit_cli_config f;
    strict_object o(j, name);
    o.get("init_r", f.init_r);
    o.get("init_phi_rad", f.init_phi);
    o.get("init_eta", f.init_eta);
    o.get("init_gamma_scale", f.init_gamma_scale);
    o.get("init_floor_v", f.init_floor);
    o.get("chi2_weighting", f.chi2_weighting);
    o.get("max_iterations", f.max_iterations);
    o.get("envelope_min", f.envelope_min);
    o.finish();
    return f;
}

json scan_json(const scan_spec& s) {
    return json{{"powers_uw", s.powers_uw},
                {"records_per_power", s.records_per_power},
                {"fit_envelope_min", s.fit_envelope_min}};
}

scan_spec scan_from(const json& j, const std::string& name) {
    scan_spec s;
    strict_object o(j, name);
    o.get("powers_uw", s.powers_uw);
    o.get("records_per_power", s.records_per_power);
    o.get("fit_envelope_min", s.fit_envelope_min);
    o.finish();
    return s;
}

} // namespace

run_config parse_run_config(std::string_view text) {
    const json j = parse_text(text);
    run_config cfg;
    strict_object top(j, "config");
    if (j.contains("comb")) cfg.comb = comb_from(j.at("comb"), "comb");
    if (j.contains("acq")) cfg.acq = acq_from(j.at("acq"), "acq");
    if (j.contains("pipeline")) cfg.pipeline = pipeline_from(j.at("pipeline"), "pipeline");
    if (j.contains("fit")) cfg.fit = fit_from(j.at("fit"), "fit");
    if (j.contains("scan")) cfg.scan = scan_from(j.at("scan"), "scan");
    json dummy;
    for (const char* k : {"comb", "acq", "pipeline", "fit", "scan"}) top.get(k, dummy);
    top.finish();
    return cfg;
}

run_config load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_to_json(const run_config& cfg) {
    const json j{{"comb", comb_json(cfg.comb)},
                 {"acq", acq_json(cfg.acq)},
                 {"pipeline", pipeline_json(cfg.pipeline)},
                 {"fit", fit_json(cfg.fit)},
                 {"scan", scan_json(cfg.scan)}};
    return j.dump();
}

std::string config_hash_hex(std::string_view canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string comb_to_json(const comb_config& c) { return comb_json(c).dump(); }
std::string acq_to_json(const acq_config& a) { return acq_json(a).dump(); }

std::string resolved_to_json(const resolved_synth& r) {
    return json{{"record_samples", r.record_samples},
                {"dt_s", r.dt},
                {"photons_per_bin_sqz", r.photons_per_bin_sqz},
                {"photons_per_bin_coh", r.photons_per_bin_coh},
                {"beta_mag", r.beta_mag},
                {"alpha_mag", r.alpha_mag},
                {"r", r.r},
                {"phi_rad", r.phi},
                {"sigma_tau_s", r.sigma_tau},
                {"envelope_sigma_lab_s", r.envelope_sigma_lab},
                {"volts_per_photon", r.volts_per_photon},
                {"ngm_gain", r.ngm_gain},
                {"noise_floor_sigma_v", r.noise_floor_sigma},
                {"dc_offset_v", r.dc_offset_volts},
                {"snl_photons_far", r.snl_photons_far},
                {"adc_lsb_v", r.adc_lsb}}
        .dump();
}

comb_config comb_from_json(std::string_view text) {
    return comb_from(parse_text(text), "comb");
}
acq_config acq_from_json(std::string_view text) {
    return acq_from(parse_text(text), "acq");
}

resolved_synth resolved_from_json(std::string_view text) {
    const json j = parse_text(text);
    resolved_synth r;
    strict_object o(j, "resolved");
    o.get("record_samples", r.record_samples);
    o.get("dt_s", r.dt);
    o.get("photons_per_bin_sqz", r.photons_per_bin_sqz);
    o.get("photons_per_bin_coh", r.photons_per_bin_coh);
    o.get("beta_mag", r.beta_mag);
    o.get("alpha_mag", r.alpha_mag);
    o.get("r", r.r);
    o.get("phi_rad", r.phi);
    o.get("sigma_tau_s", r.sigma_tau);
    o.get("envelope_sigma_lab_s", r.envelope_sigma_lab);
    o.get("volts_per_photon", r.volts_per_photon);
    o.get("ngm_gain", r.ngm_gain);
    o.get("noise_floor_sigma_v", r.noise_floor_sigma);
    o.get("dc_offset_v", r.dc_offset_volts);
    o.get("snl_photons_far", r.snl_photons_far);
    o.get("adc_lsb_v", r.adc_lsb);
    o.finish();
    return r;
}

} // namespace dcsq
