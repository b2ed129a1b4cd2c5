#include "dcsq/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>

#include "dcsq/errors.hpp"
#include "dcsq/fft.hpp"
#include "dcsq/parallel.hpp"

namespace dcsq {

namespace {

constexpr double pi = std::numbers::pi;

double wrap_pi(double x) {
    double w = std::remainder(x, 2.0 * pi);
    if (w >= pi) w -= 2.0 * pi;
    if (w < -pi) w += 2.0 * pi;
    return w;
}

std::vector<double> to_double(std::span<const float> x) {
    return std::vector<double>(x.begin(), x.end());
}

// Normalized circular cross-correlation peak of two envelopes; returns the
// shift to apply to `env` so it aligns with the reference, plus the peak
// correlation. ref_spec is conj(FFT(env_ref)) pre-scaled by nothing.
struct xcorr_result {
    std::int32_t shift = 0;
    double correlation = 0.0;
};

xcorr_result envelope_xcorr(const std::vector<fft::cplx>& ref_spec, double ref_norm,
                            std::span<const double> env) {
    const std::size_t n = env.size();
    std::vector<fft::cplx> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = env[i];
    auto spec = fft::forward(buf);
    // r[k] = sum_t ref[t] env[t + k]  = IFFT(conj(REF) . ENV)[k]
    for (std::size_t k = 0; k < n; ++k) spec[k] = std::conj(ref_spec[k]) * spec[k];
    auto corr = fft::inverse(spec);
    std::size_t best = 0;
    double best_val = corr[0].real();
    for (std::size_t k = 1; k < n; ++k) {
        if (corr[k].real() > best_val) {
            best_val = corr[k].real();
            best = k;
        }
    }
    double env_norm = 0.0;
    for (double v : env) env_norm += v * v;
    const double denom = std::sqrt(std::max(env_norm, 1e-300) * std::max(ref_norm, 1e-300));
    // env aligned by shifting it k samples left; shift-to-apply is -k (mod n)
    std::int64_t k = static_cast<std::int64_t>(best);
    if (k > static_cast<std::int64_t>(n / 2)) k -= static_cast<std::int64_t>(n);
    return {static_cast<std::int32_t>(-k), best_val / denom};
}

} // namespace

analytic_result analytic_signal(std::span<const double> samples, double envelope_floor) {
    if (samples.size() < 64)
        throw data_error("analytic_signal: need at least 64 samples");
    const auto z = fft::analytic(samples);
    const std::size_t n = z.size();

    analytic_result out;
    out.envelope.resize(n);
    out.phase.resize(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.envelope[i] = std::abs(z[i]);
        if (out.envelope[i] > peak) {
            peak = out.envelope[i];
            out.peak_index = i;
        }
    }

    // contiguous valid region around the peak where the phase is trustworthy
    const double floor_level = envelope_floor * peak;
    std::size_t lo = out.peak_index, hi = out.peak_index;
    while (lo > 0 && out.envelope[lo - 1] > floor_level) --lo;
    while (hi + 1 < n && out.envelope[hi + 1] > floor_level) ++hi;

    // adjacent-difference unwrap across [lo, hi]
    out.phase[lo] = std::arg(z[lo]);
    for (std::size_t i = lo + 1; i <= hi; ++i) {
        const double raw = std::arg(z[i]);
        const double prev = out.phase[i - 1];
        out.phase[i] = prev + wrap_pi(raw - prev);
    }
    // linear extrapolation outside the valid region
    const double slope = hi > lo ? (out.phase[hi] - out.phase[lo]) / double(hi - lo) : 0.0;
    for (std::size_t i = lo; i-- > 0;) out.phase[i] = out.phase[lo] - slope * double(lo - i);
    for (std::size_t i = hi + 1; i < n; ++i) out.phase[i] = out.phase[hi] + slope * double(i - hi);

    out.carrier_phase_at_peak = wrap_pi(out.phase[out.peak_index]);
    // local slope at the peak (rad/sample) over a short window inside [lo, hi]
    const std::size_t wlo = std::max(lo, out.peak_index - std::min<std::size_t>(out.peak_index, 8));
    const std::size_t whi = std::min(hi, out.peak_index + 8);
    out.phase_slope_at_peak =
        whi > wlo ? (out.phase[whi] - out.phase[wlo]) / double(whi - wlo) : slope;
    return out;
}

std::vector<double> circular_shift(std::span<const double> x, std::int32_t shift) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    const std::int64_t s = ((shift % static_cast<std::int64_t>(n)) +
                            static_cast<std::int64_t>(n)) % static_cast<std::int64_t>(n);
    for (std::size_t i = 0; i < n; ++i)
        out[(i + static_cast<std::size_t>(s)) % n] = x[i];
    return out;
}

alignment align_records(const std::vector<igm_record>& records, double min_correlation,
                        double envelope_floor) {
    if (records.size() < 2)
        throw data_error("align_records: need at least 2 records");
    const auto ref = analytic_signal(to_double(records[0].igm_samples), envelope_floor);
    double ref_norm = 0.0;
    for (double v : ref.envelope) ref_norm += v * v;
    std::vector<fft::cplx> ref_buf(ref.envelope.begin(), ref.envelope.end());
    const auto ref_spec = fft::forward(ref_buf);

    alignment out;
    out.shifts.resize(records.size());
    out.correlations.resize(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto env =
            analytic_signal(to_double(records[i].igm_samples), envelope_floor).envelope;
        const auto xc = envelope_xcorr(ref_spec, ref_norm, env);
        out.correlations[i] = xc.correlation;
        if (xc.correlation < min_correlation) {
            out.shifts[i] = 0;
            out.rejected.push_back(i);
        } else {
            out.shifts[i] = xc.shift;
        }
    }
    return out;
}

double ceo_phase(std::span<const double> igm_aligned, std::int32_t applied_shift,
                 double envelope_floor) {
    const auto a = analytic_signal(igm_aligned, envelope_floor);
    // the envelope wandered by -applied_shift while the carrier stayed on the
    // lab timebase; undo the carrier phase the alignment shift removed
    return wrap_pi(a.phase[a.peak_index] + a.phase_slope_at_peak * applied_shift);
}

std::vector<std::size_t> bin_by_ceo(std::span<const double> phases, double window,
                                    ceo_policy policy, double target) {
    if (!(window > 0.0))
        throw config_error("bin_by_ceo: window must be positive");
    if (phases.empty())
        throw data_error("bin_by_ceo: no phases");

    std::vector<std::size_t> selected;
    if (policy == ceo_policy::nearest_to_target) {
        for (std::size_t i = 0; i < phases.size(); ++i)
            if (std::abs(wrap_pi(phases[i] - target)) <= window / 2.0)
                selected.push_back(i);
        if (selected.empty())
            throw data_error("bin_by_ceo: no records within the target window");
        return selected;
    }

    // densest circular window
    const std::size_t n = phases.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return wrap_pi(phases[a]) < wrap_pi(phases[b]);
    });
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = wrap_pi(phases[order[i]]);

    std::size_t best_start = 0, best_count = 0;
    double best_mean_index = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < i) j = i;
        // extend while the (circularly continued) phase stays inside the window
        while (j + 1 < i + n) {
            const double next = sorted[(j + 1) % n] + ((j + 1) >= n ? 2.0 * pi : 0.0);
            if (next - sorted[i] <= window)
                ++j;
            else
                break;
        }
        const std::size_t count = j - i + 1;
        double mean_index = 0.0;
        for (std::size_t k = i; k <= j; ++k)
            mean_index += static_cast<double>(order[k % n]);
        mean_index /= static_cast<double>(count);
        if (count > best_count ||
            (count == best_count && mean_index < best_mean_index)) {
            best_count = count;
            best_start = i;
            best_mean_index = mean_index;
        }
    }
    if (best_count == 0)
        throw data_error("bin_by_ceo: empty selection");
    selected.reserve(std::min(best_count, n));
    for (std::size_t k = best_start; k <= best_start + best_count - 1 && k - best_start < n; ++k)
        selected.push_back(order[k % n]);
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
    return selected;
}

std::vector<double> ensemble_sigma(const real_matrix& m) {
    if (m.rows < 2)
        throw data_error("ensemble_sigma: need at least 2 records");
    std::vector<double> out(m.cols);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean /= static_cast<double>(m.rows);
        double ss = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double d = m.at(r, c) - mean;
            ss += d * d;
        }
        out[c] = std::sqrt(ss / static_cast<double>(m.rows - 1));
    }
    return out;
}

sqz_factor squeezing_factor(double sigma_phi_sq, double sigma_snl_sq, double sigma_nf_sq) {
    const double denom = sigma_snl_sq - sigma_nf_sq;
    if (!(denom > 0.0))
        throw numerical_error("squeezing_factor: SNL variance must exceed the noise floor");
    const double v = (sigma_phi_sq - sigma_nf_sq) / denom;
    return {v, v > 0.0 ? 10.0 * std::log10(v)
                       : -std::numeric_limits<double>::infinity()};
}

std::vector<double> phase_axis(const std::vector<std::vector<double>>& unwrapped,
                               std::size_t peak_column) {
    if (unwrapped.empty())
        throw data_error("phase_axis: no records");
    const std::size_t n = unwrapped.front().size();
    if (peak_column >= n)
        throw data_error("phase_axis: peak column out of range");
    std::vector<double> axis(n);
    double plain_mean_at_peak = 0.0;
    for (const auto& rec : unwrapped) {
        if (rec.size() != n) throw data_error("phase_axis: ragged phase rows");
        plain_mean_at_peak += rec[peak_column];
    }
    plain_mean_at_peak /= static_cast<double>(unwrapped.size());

    std::vector<double> ss(n, 0.0), cc(n, 0.0);
    for (const auto& rec : unwrapped)
        for (std::size_t j = 0; j < n; ++j) {
            ss[j] += std::sin(rec[j]);
            cc[j] += std::cos(rec[j]);
        }
    axis[0] = std::atan2(ss[0], cc[0]);
    for (std::size_t j = 1; j < n; ++j) {
        const double raw = std::atan2(ss[j], cc[j]);
        axis[j] = axis[j - 1] + wrap_pi(raw - axis[j - 1]);
    }
    const double lift =
        2.0 * pi * std::round((plain_mean_at_peak - axis[peak_column]) / (2.0 * pi));
    for (double& v : axis) v += lift;
    return axis;
}

histogram2d phase_histogram(const real_matrix& ngms, std::span<const double> phase,
                            int phase_bins, int voltage_bins) {
    if (phase_bins < 16 || voltage_bins < 16)
        throw config_error("phase_histogram: need at least 16 bins per axis");
    if (phase.size() != ngms.cols)
        throw data_error("phase_histogram: phase axis length mismatch");

    histogram2d h;
    h.phase_bins = static_cast<std::size_t>(phase_bins);
    h.voltage_bins = static_cast<std::size_t>(voltage_bins);
    auto [pmin_it, pmax_it] = std::minmax_element(phase.begin(), phase.end());
    h.phase_min = *pmin_it;
    h.phase_max = *pmax_it;

    const auto sigma = ensemble_sigma(ngms);
    const double smax = *std::max_element(sigma.begin(), sigma.end());
    h.volt_min = -5.0 * smax;
    h.volt_max = 5.0 * smax;
    h.counts.assign(h.phase_bins * h.voltage_bins, 0);

    const double pspan = h.phase_max > h.phase_min ? h.phase_max - h.phase_min : 1.0;
    const double vspan = h.volt_max > h.volt_min ? h.volt_max - h.volt_min : 1.0;
    for (std::size_t r = 0; r < ngms.rows; ++r) {
        for (std::size_t c = 0; c < ngms.cols; ++c) {
            auto pb = static_cast<std::int64_t>((phase[c] - h.phase_min) / pspan *
                                                static_cast<double>(h.phase_bins));
            auto vb = static_cast<std::int64_t>(
                (ngms.at(r, c) - h.volt_min) / vspan * static_cast<double>(h.voltage_bins));
            pb = std::clamp<std::int64_t>(pb, 0, static_cast<std::int64_t>(h.phase_bins) - 1);
            vb = std::clamp<std::int64_t>(vb, 0, static_cast<std::int64_t>(h.voltage_bins) - 1);
            ++h.counts[static_cast<std::size_t>(pb) * h.voltage_bins +
                       static_cast<std::size_t>(vb)];
        }
    }
    return h;
}

std::pair<std::vector<double>, std::vector<double>> sum_diff(std::span<const double> a,
                                                             std::span<const double> b) {
    if (a.size() != b.size())
        throw data_error("sum_diff: length mismatch");
    std::vector<double> s(a.size()), d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        s[i] = a[i] + b[i];
        d[i] = a[i] - b[i];
    }
    return {std::move(s), std::move(d)};
}

record_source make_source(const std::vector<igm_record>& records) {
    return {[&records] { return records.size(); },
            [&records](std::size_t i) { return records[i]; }};
}

namespace {

struct pass1_out {
    std::int32_t shift = 0;
    double correlation = 0.0;
    double ceo = 0.0;
    bool rejected = false;
};

struct pass2_out {
    std::vector<double> env;      // aligned IGM envelope
    std::vector<double> phase;    // aligned unwrapped IGM phase
    std::vector<float> ngm_main;  // aligned NGM (sum channel in dual mode)
    std::vector<double> ngm_diff; // dual mode: difference channel
};

} // namespace

noise_stats analyze_ensemble(const record_source& src, const comb_config& comb,
                             const acq_config& acq, const resolved_synth& resolved,
                             const pipeline_options& opt) {
    const bool dual = acq.detector == detector_mode::dual_balanced;
    const std::size_t per = dual ? 2 : 1;
    const std::size_t n_entries = src.count();
    if (n_entries < 2 * per)
        throw data_error("analyze_ensemble: need at least 2 records");
    if (dual && n_entries % 2 != 0)
        throw data_error("analyze_ensemble: dual-detector container has odd entry count");
    const std::size_t n_rec = n_entries / per;
    const std::size_t n = resolved.record_samples;

    // ---- pass 1: envelopes -> shifts, correlations, CEO phases --------------
    const igm_record rec0 = src.load(0);
    if (rec0.igm_samples.size() != n)
        throw data_error("analyze_ensemble: record length does not match header");
    const auto ref = analytic_signal(to_double(rec0.igm_samples), opt.envelope_floor);
    double ref_norm = 0.0;
    for (double v : ref.envelope) ref_norm += v * v;
    std::vector<fft::cplx> ref_buf(ref.envelope.begin(), ref.envelope.end());
    const auto ref_spec = fft::forward(ref_buf);

    std::vector<pass1_out> p1(n_rec);
    parallel_for(opt.jobs, n_rec, [&](std::size_t k) {
        const igm_record rec = src.load(per * k);
        const auto a = analytic_signal(to_double(rec.igm_samples), opt.envelope_floor);
        const auto xc = envelope_xcorr(ref_spec, ref_norm, a.envelope);
        pass1_out o;
        o.correlation = xc.correlation;
        if (xc.correlation < opt.min_correlation) {
            o.rejected = true;
        } else {
            o.shift = xc.shift;
            o.ceo = wrap_pi(a.phase[a.peak_index] + a.phase_slope_at_peak * xc.shift);
        }
        p1[k] = o;
    });

    std::vector<std::size_t> usable;
    std::vector<double> usable_ceos;
    noise_stats stats;
    for (std::size_t k = 0; k < n_rec; ++k) {
        if (p1[k].rejected) {
            stats.rejected.push_back(k);
        } else {
            usable.push_back(k);
            usable_ceos.push_back(p1[k].ceo);
        }
    }
    if (usable.size() < 2)
        throw data_error("analyze_ensemble: fewer than 2 usable records after "
                         "correlation rejection");

    const auto picked = bin_by_ceo(usable_ceos, opt.ceo_window, opt.policy, opt.ceo_target);
    for (std::size_t i : picked) stats.selected.push_back(usable[i]);
    for (std::size_t k : stats.selected) {
        stats.ceo_phases.push_back(p1[k].ceo);
        stats.shifts.push_back(p1[k].shift);
    }
    const std::size_t m = stats.selected.size();
    if (m < 2)
        throw data_error("analyze_ensemble: fewer than 2 records selected by CEO binning");

    // ---- pass 2: aligned accumulation (fixed chunking, order-stable) --------
    std::vector<double> sum_v(n, 0.0), sum_vv(n, 0.0);
    std::vector<double> sum_dv(n, 0.0), sum_dvv(n, 0.0);
    std::vector<double> sum_env(n, 0.0), sum_sin(n, 0.0), sum_cos(n, 0.0);
    double plain_phase_peak_sum = 0.0;
    real_matrix mat;
    mat.rows = m;
    mat.cols = n;
    mat.data.resize(m * n);

    const std::size_t peak_col = ref.peak_index;
    constexpr std::size_t chunk = 16;
    std::vector<pass2_out> slots(chunk);
    for (std::size_t base = 0; base < m; base += chunk) {
        const std::size_t count = std::min(chunk, m - base);
        parallel_for(opt.jobs, count, [&](std::size_t i) {
            const std::size_t k = stats.selected[base + i];
            const std::int32_t shift = p1[k].shift;
            pass2_out o;
            const igm_record ra = src.load(per * k);
            const auto igm_shifted = circular_shift(to_double(ra.igm_samples), shift);
            const auto a = analytic_signal(igm_shifted, opt.envelope_floor);
            o.env = a.envelope;
            o.phase = a.phase;
            const auto ngm_a = circular_shift(to_double(ra.ngm_samples), shift);
            if (dual) {
                const igm_record rb = src.load(per * k + 1);
                const auto ngm_b = circular_shift(to_double(rb.ngm_samples), shift);
                auto [s, d] = sum_diff(ngm_a, ngm_b);
                o.ngm_main.assign(s.begin(), s.end());
                o.ngm_diff = std::move(d);
            } else {
                o.ngm_main.assign(ngm_a.begin(), ngm_a.end());
            }
            slots[i] = std::move(o);
        });
        for (std::size_t i = 0; i < count; ++i) {
            pass2_out& o = slots[i];
            double* row = mat.data.data() + (base + i) * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = o.ngm_main[j];
                row[j] = v;
                sum_v[j] += v;
                sum_vv[j] += v * v;
                sum_env[j] += o.env[j];
                sum_sin[j] += std::sin(o.phase[j]);
                sum_cos[j] += std::cos(o.phase[j]);
            }
            if (dual)
                for (std::size_t j = 0; j < n; ++j) {
                    sum_dv[j] += o.ngm_diff[j];
                    sum_dvv[j] += o.ngm_diff[j] * o.ngm_diff[j];
                }
            plain_phase_peak_sum += o.phase[peak_col];
        }
    }

    // ---- reductions ----------------------------------------------------------
    const double dm = static_cast<double>(m);
    stats.t.resize(n);
    stats.sigma_ngm.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        stats.t[j] = (static_cast<double>(j) - static_cast<double>(n) / 2.0) * resolved.dt;
        const double mean = sum_v[j] / dm;
        stats.sigma_ngm[j] =
            std::sqrt(std::max(0.0, (sum_vv[j] - dm * mean * mean) / (dm - 1.0)));
    }
    if (dual) {
        stats.sigma_snl_t.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double mean = sum_dv[j] / dm;
            stats.sigma_snl_t[j] =
                std::sqrt(std::max(0.0, (sum_dvv[j] - dm * mean * mean) / (dm - 1.0)));
        }
    }

    stats.envelope_rel.resize(n);
    double env_peak = 0.0;
    for (std::size_t j = 0; j < n; ++j) env_peak = std::max(env_peak, sum_env[j]);
    for (std::size_t j = 0; j < n; ++j)
        stats.envelope_rel[j] = env_peak > 0.0 ? sum_env[j] / env_peak : 0.0;

    stats.phi_axis.resize(n);
    stats.phi_axis[0] = std::atan2(sum_sin[0], sum_cos[0]);
    for (std::size_t j = 1; j < n; ++j) {
        const double raw = std::atan2(sum_sin[j], sum_cos[j]);
        stats.phi_axis[j] = stats.phi_axis[j - 1] + wrap_pi(raw - stats.phi_axis[j - 1]);
    }
    {
        const double plain = plain_phase_peak_sum / dm;
        const double lift =
            2.0 * pi * std::round((plain - stats.phi_axis[peak_col]) / (2.0 * pi));
        for (double& v : stats.phi_axis) v += lift;
    }

    // far-burst SNL from the outer region of the record
    const auto outer = static_cast<std::size_t>(opt.snl_outer_frac * static_cast<double>(n));
    if (outer < 8)
        throw config_error("analyze_ensemble: snl_outer_frac leaves too few SNL samples");
    double snl_acc = 0.0;
    for (std::size_t j = 0; j < outer; ++j) {
        snl_acc += stats.sigma_ngm[j] * stats.sigma_ngm[j];
        snl_acc += stats.sigma_ngm[n - 1 - j] * stats.sigma_ngm[n - 1 - j];
    }
    const double snl_var = snl_acc / (2.0 * static_cast<double>(outer));
    stats.sigma_snl = std::sqrt(snl_var);

    stats.band_fraction =
        fft::kept_fraction_highpass(n, acq.hpf_cutoff, acq.sample_rate);
    if (opt.floor_variance >= 0.0) {
        stats.sigma_floor = std::sqrt(opt.floor_variance);
    } else {
        const double chains = dual ? 2.0 : 1.0;
        const double floor_var =
            chains * (stats.band_fraction * resolved.noise_floor_sigma *
                          resolved.noise_floor_sigma * resolved.ngm_gain * resolved.ngm_gain +
                      resolved.adc_lsb * resolved.adc_lsb / 12.0);
        stats.sigma_floor = std::sqrt(floor_var);
    }

    const double nf_var = stats.sigma_floor * stats.sigma_floor;
    stats.v_sqz_db.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        stats.v_sqz_db[j] =
            squeezing_factor(stats.sigma_ngm[j] * stats.sigma_ngm[j], snl_var, nf_var).db;

    // histogram over the retained aligned NGM rows
    stats.hist = phase_histogram(mat, stats.phi_axis, opt.phase_bins, opt.voltage_bins);

    (void)comb;
    return stats;
}

} // namespace dcsq
