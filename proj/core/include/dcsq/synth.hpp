#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dcsq/gaussian.hpp"

// Synthesizes ensembles of dual-comb IGM/NGM records whose per-sample photon
// statistics follow the gaussian-core model: time-varying mode overlap across
// the centerburst, per-record CEO phase and alignment shift, electrical noise
// floor, brick-wall IGM/NGM filtering, optional balanced dual-detector
// geometry, and ADC quantization.

namespace dcsq {

enum class ceo_model { fixed, uniform, listed };
enum class sampling_mode { gaussian, poisson, noise_free };
enum class detector_mode { single, dual_balanced };

struct comb_config {
    double f_rep = 1e9;            ///< Hz
    double delta_f_rep = 700.0;    ///< Hz
    double igm_carrier = 3e6;      ///< Hz
    double pulse_fwhm = 260e-15;   ///< s
    double lambda_center = 1.563e-6; ///< m
    double power_sqz = 14.6e-3;    ///< W, squeezed comb
    double power_coh = 170e-6;     ///< W, displacing comb
    double gamma_max = 0.82;       ///< peak mode overlap
    ceo_model ceo = ceo_model::fixed;
    double ceo_value = 0.0;        ///< rad, for ceo_model::fixed
    std::vector<double> ceo_list;  ///< for ceo_model::listed
    double eta = 1.0;              ///< detection efficiency
    double r = 0.0;                ///< squeezing strength
    bool phi_kerr_derived = true;  ///< squeeze angle policy
    double phi_explicit = 0.0;     ///< rad, used when !phi_kerr_derived
};

struct acq_config {
    double sample_rate = 5e8;      ///< S/s
    std::uint32_t n_igms = 730;
    double lpf_cutoff = 225e6;     ///< Hz, IGM channel
    double hpf_cutoff = 25e6;      ///< Hz, NGM channel
    int adc_bits = 12;
    double full_scale = 1.0;       ///< V, ADC spans [-full_scale, +full_scale]
    double volts_per_photon = 0.0; ///< 0 = auto (centerburst peak at 50% full scale)
    double ngm_gain = 0.0;         ///< 0 = auto (far-burst NGM sigma at 5% full scale)
    double noise_floor_sigma = 0.0;///< V at stream level; <0 = none, 0 = auto (SNL/10)
    detector_mode detector = detector_mode::single;
    sampling_mode sampling = sampling_mode::gaussian;
    std::uint64_t seed = 1;
    std::uint64_t record_samples = 0; ///< 0 = auto: one full 1/delta_f_rep period
    int max_shift_samples = 0;     ///< ground-truth envelope wander, uniform in [-m, m]
};

/// One digitized interferogram/noisegram pair.
struct igm_record {
    std::vector<float> igm_samples; ///< V
    std::vector<float> ngm_samples; ///< V
    double ceo_phase = 0.0;         ///< rad, in [-pi, pi)
    std::uint32_t record_index = 0;
    std::int32_t detector = 0;      ///< 0 = single / A, 1 = B
    std::int32_t true_shift = 0;    ///< samples, ground truth for tests
};

/// Model ground truth for the reference record (fixed CEO phase, zero shift),
/// in photon units per detection bin.
struct ensemble_truth {
    std::vector<cplx> gamma_of_t;
    std::vector<double> mean_of_t;      ///< detected photons
    std::vector<double> snl_of_t;       ///< photons^2 (= detected mean)
    std::vector<double> model_var_of_t; ///< photons^2
};

/// Quantities derived while resolving a config; recorded in container headers.
struct resolved_synth {
    std::uint64_t record_samples = 0;
    double dt = 0.0;                 ///< s per sample
    double photons_per_bin_sqz = 0.0;
    double photons_per_bin_coh = 0.0;
    double beta_mag = 0.0;           ///< sqrt(photons)/bin
    double alpha_mag = 0.0;
    double r = 0.0;
    double phi = 0.0;                ///< squeeze angle actually used
    double sigma_tau = 0.0;          ///< s, pulse cross-correlation width
    double envelope_sigma_lab = 0.0; ///< s, sigma_tau * f_rep / delta_f_rep
    double volts_per_photon = 0.0;
    double ngm_gain = 0.0;
    double noise_floor_sigma = 0.0;  ///< V at stream level (0 = none)
    double dc_offset_volts = 0.0;    ///< static offset removed before the ADC
    double snl_photons_far = 0.0;    ///< eta (n_beta + n_alpha)
    double adc_lsb = 0.0;
};

resolved_synth resolve_synth(const comb_config& c, const acq_config& a);

/// gamma(t) for one record: gamma_max exp(-tau^2 / 2 sigma_tau^2)
/// exp(i (2 pi igm_carrier t + ceo_phase)), tau = (delta_f_rep/f_rep)
/// (t - t_center), with the envelope centered at shift_samples * dt and the
/// carrier fixed to the lab timebase. t = 0 sits at sample record_samples/2.
std::vector<cplx> overlap_trace(const comb_config& c, const acq_config& a,
                                double ceo_phase = 0.0,
                                std::int32_t shift_samples = 0);

/// Per-sample model moments for one record (photons per bin).
struct photon_stream {
    std::vector<double> mean;
    std::vector<double> variance;
};
photon_stream model_stream(const comb_config& c, const acq_config& a,
                           double ceo_phase, std::int32_t shift_samples);

/// Balanced 50:50 split of one record's photon stream into detector A/B
/// voltage records: the sum carries the full single-detector statistics, the
/// difference carries pure shot noise Var(A-B) = eta * mean.
std::pair<igm_record, igm_record> split_balanced(const photon_stream& s,
                                                 const comb_config& c,
                                                 const acq_config& a,
                                                 std::uint32_t record_index,
                                                 double ceo_phase,
                                                 std::int32_t shift_samples,
                                                 std::uint64_t master_seed,
                                                 std::uint64_t* clipped_out = nullptr);

struct ensemble {
    std::vector<igm_record> records; ///< dual mode: A at 2k, B at 2k+1
    ensemble_truth truth;
    resolved_synth resolved;
};

/// Generates the full ensemble. Record-level parallelism with per-record
/// derived seeds: the output is bit-identical for any `jobs`.
/// Throws config_error on invalid configs, numerical_error if the model
/// variance goes negative, data_error if more than 0.1% of samples clip.
ensemble synthesize_ensemble(const comb_config& c, const acq_config& a, int jobs = 1);

} // namespace dcsq
