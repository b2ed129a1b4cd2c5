#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dcsq/dsp.hpp"
#include "dcsq/fit.hpp"
#include "dcsq/synth.hpp"

// JSON run configuration: strict schema (unknown keys rejected), canonical
// serialization, and the FNV-1a config hash embedded in every output.
// JSON parsing stays in the implementation; public headers carry no
// third-party types.

namespace dcsq {

struct fit_cli_config {
    double init_r = -1.0;       ///< < 0: heuristic from the trace
    double init_phi = 1e9;      ///< > 2 pi: heuristic
    double init_eta = 0.5;
    double init_gamma_scale = 0.8;
    double init_floor = -1.0;   ///< < 0: measured floor
    bool chi2_weighting = false;
    int max_iterations = 200;
    double envelope_min = 0.02; ///< fit region threshold on envelope_rel
};

struct run_config {
    comb_config comb;
    acq_config acq;
    pipeline_options pipeline;
    fit_cli_config fit;
    scan_spec scan;
};

/// Parses and validates; throws config_error on schema violations.
run_config parse_run_config(std::string_view json_text);
run_config load_run_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, full precision) containing every field.
std::string run_config_to_json(const run_config& cfg);

/// 64-bit FNV-1a over the canonical JSON, as 16 hex digits.
std::string config_hash_hex(std::string_view canonical_json);

/// Header-block JSON helpers used by the container and CSV emitters.
std::string comb_to_json(const comb_config& c);
std::string acq_to_json(const acq_config& a);
std::string resolved_to_json(const resolved_synth& r);
comb_config comb_from_json(std::string_view text);
acq_config acq_from_json(std::string_view text);
resolved_synth resolved_from_json(std::string_view text);

} // namespace dcsq
