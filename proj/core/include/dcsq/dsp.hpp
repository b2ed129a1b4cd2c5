#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcsq/synth.hpp"

// The measurement-analysis chain: analytic-signal extraction, envelope
// cross-correlation alignment, CEO-phase estimation and circular binning,
// phase-resolved ensemble statistics, the squeezing factor, histograms, and
// the dual-detector sum/difference reduction.

namespace dcsq {

struct analytic_result {
    std::vector<double> envelope; ///< V, >= 0
    std::vector<double> phase;    ///< rad, unwrapped where envelope is valid,
                                  ///< linearly extrapolated elsewhere
    std::size_t peak_index = 0;
    double carrier_phase_at_peak = 0.0; ///< rad, wrapped to [-pi, pi)
    double phase_slope_at_peak = 0.0;   ///< rad per sample
};

/// Hilbert-transform analytic signal; phase unwrapping is trusted only where
/// envelope > envelope_floor * max and extrapolated linearly outside.
/// Input length must be >= 64 (odd lengths are padded internally).
analytic_result analytic_signal(std::span<const double> samples,
                                double envelope_floor = 0.05);

struct alignment {
    std::vector<std::int32_t> shifts;  ///< circular shift to apply per record
    std::vector<double> correlations;  ///< normalized envelope correlation peaks
    std::vector<std::size_t> rejected; ///< records with correlation < min_correlation
};

/// Integer-sample shifts aligning each record's IGM envelope to record 0.
alignment align_records(const std::vector<igm_record>& records,
                        double min_correlation = 0.2,
                        double envelope_floor = 0.05);

/// Circularly shifts x by `shift` samples (positive moves content right).
std::vector<double> circular_shift(std::span<const double> x, std::int32_t shift);

/// CEO phase of an aligned record: carrier phase at the envelope peak,
/// corrected for the alignment shift already applied (the envelope wandered,
/// the carrier did not), wrapped to [-pi, pi).
double ceo_phase(std::span<const double> igm_aligned, std::int32_t applied_shift,
                 double envelope_floor = 0.05);

enum class ceo_policy { densest_window, nearest_to_target };

/// Selects records whose CEO phases fall in one circular window of the given
/// width: either the most populated window or the one centered on `target`.
/// Tie-break: lower mean index. Throws data_error on empty selection.
std::vector<std::size_t> bin_by_ceo(std::span<const double> phases, double window,
                                    ceo_policy policy = ceo_policy::densest_window,
                                    double target = 0.0);

/// Row-major records x time matrix.
struct real_matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Per-time-sample standard deviation across records (unbiased, n-1).
std::vector<double> ensemble_sigma(const real_matrix& aligned_ngms);

struct sqz_factor {
    double linear = 0.0;
    double db = 0.0;
};

/// V_SQZ = (sigma^2_phi - sigma^2_NF) / (sigma^2_SNL - sigma^2_NF).
/// Throws numerical_error when the denominator is <= 0.
sqz_factor squeezing_factor(double sigma_phi_sq, double sigma_snl_sq, double sigma_nf_sq);

/// Per-sample circular mean of the records' unwrapped IGM phases, re-unwrapped
/// and anchored to the plain mean at the envelope peak column.
std::vector<double> phase_axis(const std::vector<std::vector<double>>& unwrapped_phases,
                               std::size_t peak_column);

struct histogram2d {
    std::size_t phase_bins = 0, voltage_bins = 0;
    double phase_min = 0.0, phase_max = 0.0;
    double volt_min = 0.0, volt_max = 0.0;
    std::vector<std::uint64_t> counts; ///< row-major [phase][voltage]

    std::uint64_t at(std::size_t p, std::size_t v) const {
        return counts[p * voltage_bins + v];
    }
};

/// Counts of NGM voltage per (phase, voltage) cell; phase bins span the phase
/// axis, voltage bins span +-5 max sigma. Both bin counts must be >= 16.
histogram2d phase_histogram(const real_matrix& ngms, std::span<const double> phase,
                            int phase_bins = 64, int voltage_bins = 64);

/// Elementwise sum and difference; throws data_error on length mismatch.
std::pair<std::vector<double>, std::vector<double>> sum_diff(std::span<const double> a,
                                                             std::span<const double> b);

// ---------------------------------------------------------------------------
// pipeline driver

struct pipeline_options {
    double ceo_window = 0.05;      ///< rad
    ceo_policy policy = ceo_policy::densest_window;
    double ceo_target = 0.0;
    double envelope_floor = 0.05;  ///< phase-validity threshold
    double min_correlation = 0.2;
    double snl_outer_frac = 0.12;  ///< per-side outer fraction used for the SNL
    int phase_bins = 64;
    int voltage_bins = 64;
    double floor_variance = -1.0;  ///< V^2 in NGM units; < 0 = derive from configs
    int jobs = 1;
};

struct noise_stats {
    std::vector<double> t;            ///< s, aligned timebase (0 = record center)
    std::vector<double> phi_axis;     ///< rad, unwrapped averaged IGM phase
    std::vector<double> envelope_rel; ///< mean IGM envelope / peak
    std::vector<double> sigma_ngm;    ///< V
    std::vector<double> v_sqz_db;
    double sigma_snl = 0.0;           ///< V, far-burst scalar
    double sigma_floor = 0.0;         ///< V
    std::vector<double> sigma_snl_t;  ///< V, dual mode only (difference channel)
    histogram2d hist;
    std::vector<std::size_t> selected;
    std::vector<double> ceo_phases;
    std::vector<std::int32_t> shifts;
    std::vector<std::size_t> rejected;
    double band_fraction = 0.0;       ///< NGM white-noise fraction kept
};

/// Random-access source of records (in-memory ensembles and container files).
struct record_source {
    std::function<std::size_t()> count;
    std::function<igm_record(std::size_t)> load;
};
record_source make_source(const std::vector<igm_record>& records);

/// Full analysis chain: align on record 0, estimate CEO phases, select by CEO
/// window, accumulate phase-resolved ensemble statistics (sum and difference
/// reductions in dual mode). Deterministic for any jobs value.
noise_stats analyze_ensemble(const record_source& src, const comb_config& comb,
                             const acq_config& acq, const resolved_synth& resolved,
                             const pipeline_options& opt);

} // namespace dcsq
