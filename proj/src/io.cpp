#include "mdlsim/io.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace mdlsim {

namespace {

using nlohmann::json;

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

constexpr char kMagic[8] = {'M', 'D', 'L', 'S', 'I', 'M', 'C', '1'};
constexpr std::uint32_t kKindChannel = 1;
constexpr std::uint32_t kKindEqualizer = 2;
constexpr std::uint32_t kKindEstimate = 3;

void write_container(const std::string& path, std::uint32_t kind, const json& header,
                     const std::vector<double>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::string head = header.dump();
    const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), head.size());
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw IoError("short write: " + path);
}

struct Container {
    json header;
    std::vector<double> payload;
};

Container read_container(const std::string& path, std::uint32_t expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    std::uint32_t kind = 0, head_len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a MDLSIMC1 container: " + path);
    if (kind != expected_kind) throw IoError("container holds a different object kind: " + path);
    if (head_len > (1u << 24)) throw IoError("implausible header size: " + path);
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    if (!in) throw IoError("truncated header: " + path);

    Container c;
    try {
        c.header = json::parse(head);
    } catch (const json::exception& e) {
        throw IoError("bad container header in " + path + ": " + e.what());
    }
    std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(double) != 0) throw IoError("ragged payload: " + path);
    c.payload.resize(rest.size() / sizeof(double));
    std::memcpy(c.payload.data(), rest.data(), rest.size());
    return c;
}

json layout_to_json(const ModeLayout& layout) {
    return json{{"spatial_modes", layout.spatial_modes},
                {"polarizations_per_mode", layout.polarizations_per_mode}};
}

ModeLayout layout_from_json(const json& j) {
    ModeLayout layout;
    layout.spatial_modes = j.at("spatial_modes").get<std::vector<std::string>>();
    layout.polarizations_per_mode = j.at("polarizations_per_mode").get<int>();
    layout.validate();
    return layout;
}

void append_matrix(std::vector<double>& payload, const MatrixC& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            payload.push_back(m(i, j).real());
            payload.push_back(m(i, j).imag());
        }
}

MatrixC take_matrix(const std::vector<double>& payload, std::size_t& pos, int n) {
    MatrixC m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            m(i, j) = Complex(payload[pos], payload[pos + 1]);
            pos += 2;
        }
    return m;
}

std::vector<MatrixC> take_bins(const Container& c, int bins, int n) {
    const std::size_t need = static_cast<std::size_t>(bins) * n * n * 2;
    if (c.payload.size() != need) throw IoError("payload size does not match the header");
    std::vector<MatrixC> out;
    out.reserve(bins);
    std::size_t pos = 0;
    for (int f = 0; f < bins; ++f) out.push_back(take_matrix(c.payload, pos, n));
    return out;
}

}  // namespace

void save_channel(const ChannelSpectrum& channel, const std::string& path) {
    channel.validate();
    json header{{"schema_version", 1},
                {"kind", "channel-spectrum"},
                {"layout", layout_to_json(channel.layout)},
                {"bins", channel.bin_count()},
                {"bin_spacing_hz", channel.bin_spacing_hz}};
    std::vector<double> payload;
    payload.reserve(static_cast<std::size_t>(channel.bin_count()) * channel.dimension() *
                    channel.dimension() * 2);
    for (const MatrixC& h : channel.bins) append_matrix(payload, h);
    write_container(path, kKindChannel, header, payload);
}

ChannelSpectrum load_channel(const std::string& path) {
    const Container c = read_container(path, kKindChannel);
    ChannelSpectrum channel;
    try {
        channel.layout = layout_from_json(c.header.at("layout"));
        channel.bin_spacing_hz = c.header.at("bin_spacing_hz").get<double>();
        channel.bins = take_bins(c, c.header.at("bins").get<int>(), channel.dimension());
    } catch (const json::exception& e) {
        throw IoError("bad channel header in " + path + ": " + e.what());
    }
    channel.validate();
    return channel;
}

void save_equalizer(const EqualizerSolution& eq, const std::string& path) {
    json header{{"schema_version", 1},
                {"kind", "equalizer-solution"},
                {"layout", layout_to_json(eq.layout)},
                {"bins", eq.bin_count()},
                {"bin_spacing_hz", eq.bin_spacing_hz},
                {"fitted_snr_linear", eq.fitted_snr_linear},
                {"training_length", eq.training_length}};
    std::vector<double> payload;
    for (const MatrixC& w : eq.bins) append_matrix(payload, w);
    write_container(path, kKindEqualizer, header, payload);
}

EqualizerSolution load_equalizer(const std::string& path) {
    const Container c = read_container(path, kKindEqualizer);
    EqualizerSolution eq;
    try {
        eq.layout = layout_from_json(c.header.at("layout"));
        eq.bin_spacing_hz = c.header.at("bin_spacing_hz").get<double>();
        eq.fitted_snr_linear = c.header.at("fitted_snr_linear").get<double>();
        eq.training_length = c.header.at("training_length").get<int>();
        eq.bins = take_bins(c, c.header.at("bins").get<int>(), eq.dimension());
    } catch (const json::exception& e) {
        throw IoError("bad equalizer header in " + path + ": " + e.what());
    }
    return eq;
}

void save_estimate(const MdlEstimate& estimate, const std::string& path) {
    json profiles = json::array();
    std::vector<double> payload;
    for (const EigenvalueProfile& p : estimate.per_bin_profiles) {
        json entry{{"count", p.size()}};
        if (p.bin_index()) entry["bin"] = *p.bin_index();
        profiles.push_back(entry);
        for (Eigen::Index i = 0; i < p.size(); ++i) payload.push_back(p.values()(i));
    }
    json header{{"schema_version", 1},
                {"kind", "mdl-estimate"},
                {"snr_linear", estimate.snr_linear},
                {"mdl_uncorrected_db", estimate.uncorrected.db},
                {"mdl_corrected_db", estimate.corrected.db},
                {"failed_bins", estimate.failed_bins},
                {"clamped_values", estimate.clamped_values},
                {"profiles", profiles}};
    write_container(path, kKindEstimate, header, payload);
}

MdlEstimate load_estimate(const std::string& path) {
    const Container c = read_container(path, kKindEstimate);
    MdlEstimate est;
    try {
        est.snr_linear = c.header.at("snr_linear").get<double>();
        est.uncorrected.db = c.header.at("mdl_uncorrected_db").get<double>();
        est.corrected.db = c.header.at("mdl_corrected_db").get<double>();
        est.failed_bins = c.header.at("failed_bins").get<int>();
        est.clamped_values = c.header.at("clamped_values").get<int>();
        std::size_t pos = 0;
        for (const json& entry : c.header.at("profiles")) {
            const int count = entry.at("count").get<int>();
            if (pos + count > c.payload.size())
                throw IoError("payload size does not match the header");
            VectorR values(count);
            for (int i = 0; i < count; ++i) values(i) = c.payload[pos++];
            std::optional<int> bin;
            if (entry.contains("bin")) bin = entry.at("bin").get<int>();
            est.per_bin_profiles.emplace_back(values, bin);
        }
        if (pos != c.payload.size()) throw IoError("payload size does not match the header");
    } catch (const json::exception& e) {
        throw IoError("bad estimate header in " + path + ": " + e.what());
    }
    return est;
}

}  // namespace mdlsim
