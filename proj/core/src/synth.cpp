#include "dcsq/synth.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "dcsq/errors.hpp"
#include "dcsq/fft.hpp"
#include "dcsq/parallel.hpp"
#include "dcsq/rng.hpp"

namespace dcsq {

namespace {

constexpr double planck_h = 6.62607015e-34; // J s
constexpr double light_c = 299792458.0;     // m/s
constexpr double pi = std::numbers::pi;

// rng stream tags
constexpr std::uint64_t stream_signal = 1;
constexpr std::uint64_t stream_split = 2;
constexpr std::uint64_t stream_floor_a = 3;
constexpr std::uint64_t stream_floor_b = 4;
constexpr std::uint64_t stream_meta = 5;

double reference_ceo(const comb_config& c) {
    switch (c.ceo) {
        case ceo_model::fixed: return c.ceo_value;
        case ceo_model::uniform: return 0.0;
        case ceo_model::listed: return c.ceo_list.empty() ? 0.0 : c.ceo_list.front();
    }
    return 0.0;
}

struct record_plan {
    double ceo = 0.0;
    std::int32_t shift = 0;
};

record_plan plan_record(const comb_config& c, const acq_config& a, std::uint32_t index) {
    record_plan rp;
    normal_sampler meta(derive_seed(a.seed, index, stream_meta));
    switch (c.ceo) {
        case ceo_model::fixed: rp.ceo = c.ceo_value; break;
        case ceo_model::uniform: rp.ceo = -pi + 2.0 * pi * meta.uniform(); break;
        case ceo_model::listed:
            if (c.ceo_list.empty()) throw config_error("ceo_model listed but ceo_list empty");
            rp.ceo = c.ceo_list[index % c.ceo_list.size()];
            break;
    }
    rp.ceo = std::remainder(rp.ceo, 2.0 * pi);
    if (rp.ceo >= pi) rp.ceo -= 2.0 * pi;
    if (a.max_shift_samples > 0) {
        const int span = 2 * a.max_shift_samples + 1;
        rp.shift = static_cast<std::int32_t>(meta.uniform() * span) - a.max_shift_samples;
    }
    return rp;
}

struct adc {
    double lsb;
    long long code_min, code_max;

    float quantize(double v, std::uint64_t& clipped) const {
        double code = std::nearbyint(v / lsb);
        if (code < static_cast<double>(code_min) || code > static_cast<double>(code_max)) {
            ++clipped;
            code = std::min(std::max(code, static_cast<double>(code_min)),
                            static_cast<double>(code_max));
        }
        return static_cast<float>(code * lsb);
    }
};

adc make_adc(const resolved_synth& rs, int bits) {
    const long long half = 1LL << (bits - 1);
    return {rs.adc_lsb, -half, half - 1};
}

// Converts a photon-count stream into a DC-blocked voltage stream with
// electrical floor noise, filters into IGM/NGM channels and quantizes.
igm_record detect(std::span<const double> photons,
                  const acq_config& a, const resolved_synth& rs,
                  std::uint32_t index, std::int32_t det, double ceo, std::int32_t shift,
                  normal_sampler& floor_rng, double dc_photons,
                  std::uint64_t& clipped) {
    const std::size_t n = photons.size();
    std::vector<double> stream(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = (photons[i] - dc_photons) * rs.volts_per_photon;
        if (rs.noise_floor_sigma > 0.0) v += rs.noise_floor_sigma * floor_rng();
        stream[i] = v;
    }
    auto igm = fft::lowpass(stream, a.lpf_cutoff, a.sample_rate);
    auto ngm = fft::highpass(stream, a.hpf_cutoff, a.sample_rate);

    igm_record rec;
    rec.record_index = index;
    rec.detector = det;
    rec.ceo_phase = ceo;
    rec.true_shift = shift;
    rec.igm_samples.resize(n);
    rec.ngm_samples.resize(n);
    const adc conv = make_adc(rs, a.adc_bits);
    for (std::size_t i = 0; i < n; ++i) {
        rec.igm_samples[i] = conv.quantize(igm[i], clipped);
        rec.ngm_samples[i] = conv.quantize(ngm[i] * rs.ngm_gain, clipped);
    }
    return rec;
}

std::vector<double> draw_photons(const photon_stream& ps, const acq_config& a,
                                 double r, normal_sampler& rng) {
    const std::size_t n = ps.mean.size();
    std::vector<double> out(n);
    switch (a.sampling) {
        case sampling_mode::noise_free:
            for (std::size_t i = 0; i < n; ++i) out[i] = ps.mean[i];
            break;
        case sampling_mode::poisson:
            if (r != 0.0)
                throw config_error("poisson sampling mode requires r = 0");
            for (std::size_t i = 0; i < n; ++i)
                out[i] = static_cast<double>(poisson_knuth(rng, ps.mean[i]));
            break;
        case sampling_mode::gaussian:
            for (std::size_t i = 0; i < n; ++i)
                out[i] = ps.mean[i] + std::sqrt(ps.variance[i]) * rng();
            break;
    }
    return out;
}

} // namespace

resolved_synth resolve_synth(const comb_config& c, const acq_config& a) {
    if (c.f_rep <= 0 || c.delta_f_rep <= 0)
        throw config_error("repetition rates must be positive");
    if (c.delta_f_rep > c.f_rep / 100.0)
        throw config_error("delta_f_rep must be << f_rep");
    if (c.igm_carrier <= 0 || c.igm_carrier >= c.f_rep / 2.0)
        throw config_error("igm_carrier must lie in (0, f_rep/2)");
    if (c.power_sqz <= 0 || c.power_coh <= 0)
        throw config_error("comb powers must be positive");
    if (c.gamma_max <= 0 || c.gamma_max > 1.0)
        throw config_error("gamma_max must be in (0, 1]");
    if (c.eta < 0.0 || c.eta > 1.0)
        throw config_error("eta must be in [0, 1]");
    if (c.r < 0.0)
        throw config_error("squeezing r must be >= 0");
    if (a.sample_rate <= 0)
        throw config_error("sample_rate must be positive");
    if (a.hpf_cutoff <= c.igm_carrier * 5.0)
        throw config_error("hpf_cutoff must exceed 5x igm_carrier");
    if (a.lpf_cutoff >= a.sample_rate / 2.0)
        throw config_error("lpf_cutoff must be below Nyquist");
    if (a.adc_bits < 2 || a.adc_bits > 30)
        throw config_error("adc_bits must be in [2, 30]");
    if (a.full_scale <= 0)
        throw config_error("full_scale must be positive");
    if (a.n_igms < 1)
        throw config_error("n_igms must be >= 1");

    resolved_synth rs;
    rs.record_samples = a.record_samples;
    if (rs.record_samples == 0) {
        rs.record_samples =
            static_cast<std::uint64_t>(std::llround(a.sample_rate / c.delta_f_rep));
        rs.record_samples += rs.record_samples % 2;
    }
    if (rs.record_samples < 64 || rs.record_samples % 2 != 0)
        throw config_error("record_samples must be even and >= 64");
    rs.dt = 1.0 / a.sample_rate;

    const double photon_energy = planck_h * light_c / c.lambda_center;
    rs.photons_per_bin_sqz = c.power_sqz / (a.sample_rate * photon_energy);
    rs.photons_per_bin_coh = c.power_coh / (a.sample_rate * photon_energy);
    rs.beta_mag = std::sqrt(rs.photons_per_bin_sqz);
    rs.alpha_mag = std::sqrt(rs.photons_per_bin_coh);

    rs.r = c.r;
    rs.phi = c.phi_kerr_derived ? kerr_squeeze_angle({rs.beta_mag, 0.0}, c.r)
                                : normalize_squeeze_angle(c.phi_explicit);

    rs.sigma_tau = c.pulse_fwhm * std::numbers::sqrt2 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    rs.envelope_sigma_lab = rs.sigma_tau * c.f_rep / c.delta_f_rep;

    const double fringe_peak = c.eta * 2.0 * rs.beta_mag * c.gamma_max * rs.alpha_mag;
    rs.volts_per_photon =
        a.volts_per_photon > 0.0 ? a.volts_per_photon : 0.5 * a.full_scale / fringe_peak;

    rs.snl_photons_far = c.eta * (rs.photons_per_bin_sqz + rs.photons_per_bin_coh);
    if (a.noise_floor_sigma < 0.0)
        rs.noise_floor_sigma = 0.0;
    else if (a.noise_floor_sigma == 0.0)
        rs.noise_floor_sigma = 0.1 * rs.volts_per_photon * std::sqrt(rs.snl_photons_far);
    else
        rs.noise_floor_sigma = a.noise_floor_sigma;

    const double band = fft::kept_fraction_highpass(rs.record_samples, a.hpf_cutoff,
                                                    a.sample_rate);
    if (band <= 0.0)
        throw config_error("hpf_cutoff leaves no NGM band");
    const double ngm_sigma_far =
        std::sqrt(band * (rs.volts_per_photon * rs.volts_per_photon * rs.snl_photons_far +
                          rs.noise_floor_sigma * rs.noise_floor_sigma));
    rs.ngm_gain = a.ngm_gain > 0.0 ? a.ngm_gain : 0.05 * a.full_scale / ngm_sigma_far;

    rs.dc_offset_volts = rs.snl_photons_far * rs.volts_per_photon;
    rs.adc_lsb = 2.0 * a.full_scale / static_cast<double>(1LL << a.adc_bits);
    return rs;
}

std::vector<cplx> overlap_trace(const comb_config& c, const acq_config& a,
                                double ceo_phase, std::int32_t shift_samples) {
    const resolved_synth rs = resolve_synth(c, a);
    const std::size_t n = rs.record_samples;
    std::vector<cplx> g(n);
    const double t_center = shift_samples * rs.dt;
    const double slow = c.delta_f_rep / c.f_rep;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = (static_cast<double>(k) - static_cast<double>(n) / 2.0) * rs.dt;
        const double tau = slow * (t - t_center);
        const double env = c.gamma_max *
                           std::exp(-tau * tau / (2.0 * rs.sigma_tau * rs.sigma_tau));
        g[k] = std::polar(env, 2.0 * pi * c.igm_carrier * t + ceo_phase);
    }
    return g;
}

photon_stream model_stream(const comb_config& c, const acq_config& a,
                           double ceo_phase, std::int32_t shift_samples) {
    const resolved_synth rs = resolve_synth(c, a);
    const auto gamma = overlap_trace(c, a, ceo_phase, shift_samples);
    photon_stream ps;
    ps.mean.resize(gamma.size());
    ps.variance.resize(gamma.size());
    quantum_params p;
    p.alpha = {rs.alpha_mag, 0.0};
    p.beta = {rs.beta_mag, 0.0};
    p.squeeze = {rs.r, rs.phi};
    p.eta = c.eta;
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        p.gamma = gamma[k];
        const auto m = photon_moments(p);
        if (!(m.variance >= 0.0))
            throw config_error("model variance negative: invalid configuration");
        ps.mean[k] = m.mean;
        ps.variance[k] = m.variance;
    }
    return ps;
}

std::pair<igm_record, igm_record> split_balanced(const photon_stream& s,
                                                 const comb_config& c,
                                                 const acq_config& a,
                                                 std::uint32_t record_index,
                                                 double ceo_phase,
                                                 std::int32_t shift_samples,
                                                 std::uint64_t master_seed,
                                                 std::uint64_t* clipped_out) {
    const resolved_synth rs = resolve_synth(c, a);
    normal_sampler sig_rng(derive_seed(master_seed, record_index, stream_signal));
    normal_sampler split_rng(derive_seed(master_seed, record_index, stream_split));
    normal_sampler floor_a(derive_seed(master_seed, record_index, stream_floor_a));
    normal_sampler floor_b(derive_seed(master_seed, record_index, stream_floor_b));

    // total from the single-detector stream, difference from independent
    // binomial-partition shot noise Var(A-B) = eta * mean
    const auto total = draw_photons(s, a, c.r, sig_rng);
    const std::size_t n = total.size();
    std::vector<double> half_a(n), half_b(n);
    if (a.sampling == sampling_mode::noise_free) {
        for (std::size_t i = 0; i < n; ++i) half_a[i] = half_b[i] = 0.5 * total[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = std::sqrt(s.mean[i]) * split_rng();
            half_a[i] = 0.5 * (total[i] + diff);
            half_b[i] = 0.5 * (total[i] - diff);
        }
    }
    std::uint64_t clipped = 0;
    const double half_dc = 0.5 * rs.snl_photons_far;
    auto rec_a = detect(half_a, a, rs, record_index, 0, ceo_phase, shift_samples,
                        floor_a, half_dc, clipped);
    auto rec_b = detect(half_b, a, rs, record_index, 1, ceo_phase, shift_samples,
                        floor_b, half_dc, clipped);
    if (clipped_out) *clipped_out += clipped;
    return {std::move(rec_a), std::move(rec_b)};
}

ensemble synthesize_ensemble(const comb_config& c, const acq_config& a, int jobs) {
    ensemble out;
    out.resolved = resolve_synth(c, a);
    const resolved_synth& rs = out.resolved;

    const std::size_t per_record = a.detector == detector_mode::dual_balanced ? 2 : 1;
    out.records.resize(per_record * a.n_igms);

    std::atomic<std::uint64_t> clipped{0};
    parallel_for(jobs, a.n_igms, [&](std::size_t k) {
        const auto idx = static_cast<std::uint32_t>(k);
        const record_plan rp = plan_record(c, a, idx);
        const auto ps = model_stream(c, a, rp.ceo, rp.shift);
        std::uint64_t local_clip = 0;
        if (a.detector == detector_mode::dual_balanced) {
            auto [ra, rb] = split_balanced(ps, c, a, idx, rp.ceo, rp.shift, a.seed,
                                           &local_clip);
            out.records[2 * k] = std::move(ra);
            out.records[2 * k + 1] = std::move(rb);
        } else {
            normal_sampler sig_rng(derive_seed(a.seed, idx, stream_signal));
            normal_sampler floor_rng(derive_seed(a.seed, idx, stream_floor_a));
            const auto photons = draw_photons(ps, a, c.r, sig_rng);
            out.records[k] = detect(photons, a, rs, idx, 0, rp.ceo, rp.shift,
                                    floor_rng, rs.snl_photons_far, local_clip);
        }
        clipped += local_clip;
    });

    const std::uint64_t total_samples =
        2 * rs.record_samples * per_record * static_cast<std::uint64_t>(a.n_igms);
    if (static_cast<double>(clipped.load()) > 1e-3 * static_cast<double>(total_samples))
        throw data_error("ADC clipping on more than 0.1% of samples (" +
                         std::to_string(clipped.load()) + " / " +
                         std::to_string(total_samples) + ")");

    const auto ps_ref = model_stream(c, a, reference_ceo(c), 0);
    out.truth.gamma_of_t = overlap_trace(c, a, reference_ceo(c), 0);
    out.truth.mean_of_t = ps_ref.mean;
    out.truth.snl_of_t = ps_ref.mean;
    out.truth.model_var_of_t = ps_ref.variance;
    return out;
}

} // namespace dcsq
