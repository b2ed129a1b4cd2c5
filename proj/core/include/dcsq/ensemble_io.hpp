#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "dcsq/dsp.hpp"
#include "dcsq/synth.hpp"

// Binary ensemble container plus the CSV emitters. Layout (all little-endian)
// is documented in docs/format.md:
//   magic "DCSQENS1" | u32 header_len | header JSON | per-entry payloads
// with one payload = igm float32[n] ngm float32[n], and a JSON sidecar index
// (<path>.index.json) carrying per-entry metadata and byte offsets.

namespace dcsq {

void write_container(const std::filesystem::path& path, const ensemble& ens,
                     const comb_config& comb, const acq_config& acq,
                     std::string_view config_hash);

class container_reader {
public:
    explicit container_reader(const std::filesystem::path& path);
    ~container_reader();
    container_reader(container_reader&&) noexcept;
    container_reader& operator=(container_reader&&) noexcept;

    const std::string& header_json() const;
    comb_config comb() const;
    acq_config acq() const;
    resolved_synth resolved() const;
    std::string config_hash() const;
    std::size_t entry_count() const;
    igm_record read_entry(std::size_t i) const;

    /// record_source view over this reader (reader must outlive it).
    record_source source() const;

private:
    struct impl;
    std::unique_ptr<impl> impl_;
};

void write_truth_csv(const std::filesystem::path& path, const ensemble_truth& truth,
                     double dt, std::string_view metadata_json);

void write_stats_csv(const std::filesystem::path& path, const noise_stats& stats,
                     std::string_view metadata_json);

void write_histogram_csv(const std::filesystem::path& path, const histogram2d& hist,
                         std::string_view metadata_json);

} // namespace dcsq
