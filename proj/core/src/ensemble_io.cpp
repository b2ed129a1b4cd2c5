#include "dcsq/ensemble_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "dcsq/config.hpp"
#include "dcsq/errors.hpp"
#include "dcsq/version.hpp"

namespace dcsq {

using nlohmann::json;

namespace {

constexpr char magic[8] = {'D', 'C', 'S', 'Q', 'E', 'N', 'S', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_container(const std::filesystem::path& path, const ensemble& ens,
                     const comb_config& comb, const acq_config& acq,
                     std::string_view config_hash) {
    const std::size_t n = ens.resolved.record_samples;
    json header{{"format_version", container_format_version},
                {"tool_version", version_string},
                {"config_hash", std::string(config_hash)},
                {"seed", acq.seed},
                {"n_entries", ens.records.size()},
                {"record_samples", n},
                {"comb", json::parse(comb_to_json(comb))},
                {"acq", json::parse(acq_to_json(acq))},
                {"resolved", json::parse(resolved_to_json(ens.resolved))}};
    const std::string htext = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("write_container: cannot open " + path.string());
    os.write(magic, sizeof magic);
    write_u32(os, static_cast<std::uint32_t>(htext.size()));
    os.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    const std::uint64_t payload_offset = sizeof magic + 4 + htext.size();
    json index_entries = json::array();
    for (std::size_t i = 0; i < ens.records.size(); ++i) {
        const igm_record& rec = ens.records[i];
        if (rec.igm_samples.size() != n || rec.ngm_samples.size() != n)
            throw data_error("write_container: record length mismatch");
        os.write(reinterpret_cast<const char*>(rec.igm_samples.data()),
                 static_cast<std::streamsize>(n * sizeof(float)));
        os.write(reinterpret_cast<const char*>(rec.ngm_samples.data()),
                 static_cast<std::streamsize>(n * sizeof(float)));
        index_entries.push_back({{"entry", i},
                                 {"record_index", rec.record_index},
                                 {"detector", rec.detector},
                                 {"ceo_phase", rec.ceo_phase},
                                 {"true_shift", rec.true_shift},
                                 {"offset", payload_offset + i * 2 * n * sizeof(float)}});
    }
    if (!os) throw data_error("write_container: write failure on " + path.string());
    os.close();

    json index{{"config_hash", std::string(config_hash)},
               {"tool_version", version_string},
               {"entries", index_entries}};
    std::ofstream ix(path.string() + ".index.json", std::ios::trunc);
    if (!ix) throw data_error("write_container: cannot open sidecar index");
    ix << index.dump(2) << "\n";
}

struct container_reader::impl {
    mutable std::ifstream is;
    std::string header_text;
    json header;
    json index;
    std::size_t n = 0;
    std::uint64_t payload_offset = 0;
};

container_reader::container_reader(const std::filesystem::path& path)
    : impl_(std::make_unique<impl>()) {
    impl_->is.open(path, std::ios::binary);
    if (!impl_->is) throw data_error("container: cannot open " + path.string());
    char m[8];
    impl_->is.read(m, 8);
    if (!impl_->is || std::memcmp(m, magic, 8) != 0)
        throw data_error("container: bad magic in " + path.string());
    const std::uint32_t hlen = read_u32(impl_->is);
    impl_->header_text.resize(hlen);
    impl_->is.read(impl_->header_text.data(), hlen);
    if (!impl_->is) throw data_error("container: truncated header");
    try {
        impl_->header = json::parse(impl_->header_text);
    } catch (const json::exception& e) {
        throw data_error(std::string("container: bad header JSON: ") + e.what());
    }
    if (impl_->header.value("format_version", -1) != container_format_version)
        throw data_error("container: unsupported format version");
    impl_->n = impl_->header.at("record_samples").get<std::size_t>();
    impl_->payload_offset = 8 + 4 + hlen;

    std::ifstream ix(path.string() + ".index.json");
    if (!ix) throw data_error("container: missing sidecar index for " + path.string());
    try {
        ix >> impl_->index;
    } catch (const json::exception& e) {
        throw data_error(std::string("container: bad index JSON: ") + e.what());
    }
}

container_reader::~container_reader() = default;
container_reader::container_reader(container_reader&&) noexcept = default;
container_reader& container_reader::operator=(container_reader&&) noexcept = default;

const std::string& container_reader::header_json() const { return impl_->header_text; }

comb_config container_reader::comb() const {
    return comb_from_json(impl_->header.at("comb").dump());
}

acq_config container_reader::acq() const {
    return acq_from_json(impl_->header.at("acq").dump());
}

resolved_synth container_reader::resolved() const {
    return resolved_from_json(impl_->header.at("resolved").dump());
}

std::string container_reader::config_hash() const {
    return impl_->header.value("config_hash", "");
}

std::size_t container_reader::entry_count() const {
    return impl_->header.at("n_entries").get<std::size_t>();
}

igm_record container_reader::read_entry(std::size_t i) const {
    if (i >= entry_count()) throw data_error("container: entry index out of range");
    const std::size_t n = impl_->n;
    igm_record rec;
    rec.igm_samples.resize(n);
    rec.ngm_samples.resize(n);
    impl_->is.clear();
    impl_->is.seekg(static_cast<std::streamoff>(impl_->payload_offset +
                                                i * 2 * n * sizeof(float)));
    impl_->is.read(reinterpret_cast<char*>(rec.igm_samples.data()),
                   static_cast<std::streamsize>(n * sizeof(float)));
    impl_->is.read(reinterpret_cast<char*>(rec.ngm_samples.data()),
                   static_cast<std::streamsize>(n * sizeof(float)));
    if (!impl_->is) throw data_error("container: truncated payload");

    const json& e = impl_->index.at("entries").at(i);
    rec.record_index = e.at("record_index").get<std::uint32_t>();
    rec.detector = e.at("detector").get<std::int32_t>();
    rec.ceo_phase = e.at("ceo_phase").get<double>();
    rec.true_shift = e.at("true_shift").get<std::int32_t>();
    return rec;
}

record_source container_reader::source() const {
    const container_reader* self = this;
    return {[self] { return self->entry_count(); },
            [self](std::size_t i) { return self->read_entry(i); }};
}

void write_truth_csv(const std::filesystem::path& path, const ensemble_truth& truth,
                     double dt, std::string_view metadata_json) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw data_error("write_truth_csv: cannot open " + path.string());
    os << "# " << metadata_json << "\n";
    os << "t,re_gamma,im_gamma,snl_var,model_var\n";
    const std::size_t n = truth.gamma_of_t.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) - static_cast<double>(n) / 2.0) * dt;
        os << format_double(t) << ',' << format_double(truth.gamma_of_t[i].real()) << ','
           << format_double(truth.gamma_of_t[i].imag()) << ','
           << format_double(truth.snl_of_t[i]) << ','
           << format_double(truth.model_var_of_t[i]) << "\n";
    }
}

void write_stats_csv(const std::filesystem::path& path, const noise_stats& stats,
                     std::string_view metadata_json) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw data_error("write_stats_csv: cannot open " + path.string());
    os << "# " << metadata_json << "\n";
    const bool dual = !stats.sigma_snl_t.empty();
    os << "t,phi,envelope_rel,sigma_ngm,sigma_snl,v_sqz_db\n";
    for (std::size_t i = 0; i < stats.t.size(); ++i) {
        const double snl = dual ? stats.sigma_snl_t[i] : stats.sigma_snl;
        os << format_double(stats.t[i]) << ',' << format_double(stats.phi_axis[i]) << ','
           << format_double(stats.envelope_rel[i]) << ','
           << format_double(stats.sigma_ngm[i]) << ',' << format_double(snl) << ','
           << format_double(stats.v_sqz_db[i]) << "\n";
    }
}

void write_histogram_csv(const std::filesystem::path& path, const histogram2d& hist,
                         std::string_view metadata_json) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw data_error("write_histogram_csv: cannot open " + path.string());
    os << "# " << metadata_json << "\n";
    os << "# rows: phase bins [" << format_double(hist.phase_min) << ", "
       << format_double(hist.phase_max) << "], cols: voltage bins ["
       << format_double(hist.volt_min) << ", " << format_double(hist.volt_max) << "]\n";
    for (std::size_t p = 0; p < hist.phase_bins; ++p) {
        for (std::size_t v = 0; v < hist.voltage_bins; ++v) {
            if (v) os << ',';
            os << hist.at(p, v);
        }
        os << "\n";
    }
}

} // namespace dcsq
