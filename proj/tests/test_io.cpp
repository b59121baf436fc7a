#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "mdlsim/channel.hpp"
#include "mdlsim/dsp.hpp"
#include "mdlsim/io.hpp"
#include "mdlsim/mdl_core.hpp"

using namespace mdlsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::current_path() / "io_test_out") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

ChannelSpectrum sample_channel(std::uint64_t seed) {
    LinkSpec spec;
    spec.seed = seed;
    spec.bins = 8;
    return normalize_gain(apply_emulator(
        synthesize_link(spec),
        EmulatorProfile{Placement::TxSide, 0, constant_power_profile(4.0)}));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

bool identical(const MatrixC& a, const MatrixC& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(Complex) * a.size()) == 0;
}

}  // namespace

TEST_CASE("channel container round trip is exact") {
    TempDir dir;
    const ChannelSpectrum chan = sample_channel(3);
    save_channel(chan, dir.file("chan.mdlsim"));
    const ChannelSpectrum back = load_channel(dir.file("chan.mdlsim"));

    CHECK(back.layout.spatial_modes == chan.layout.spatial_modes);
    CHECK(back.layout.polarizations_per_mode == chan.layout.polarizations_per_mode);
    CHECK(back.bin_spacing_hz == chan.bin_spacing_hz);
    REQUIRE(back.bin_count() == chan.bin_count());
    for (int f = 0; f < chan.bin_count(); ++f) CHECK(identical(back.bins[f], chan.bins[f]));
    CHECK(true_mdl(back).db == true_mdl(chan).db);
}

TEST_CASE("saving twice produces byte-identical files") {
    TempDir dir;
    const ChannelSpectrum chan = sample_channel(4);
    save_channel(chan, dir.file("a.mdlsim"));
    save_channel(chan, dir.file("b.mdlsim"));
    CHECK(slurp(dir.file("a.mdlsim")) == slurp(dir.file("b.mdlsim")));
}

TEST_CASE("equalizer container round trip is exact") {
    TempDir dir;
    const ChannelSpectrum chan = sample_channel(5);
    const EqualizerSolution eq = wiener_equalizer(chan, SnrValue::from_db(14.0));
    save_equalizer(eq, dir.file("eq.mdlsim"));
    const EqualizerSolution back = load_equalizer(dir.file("eq.mdlsim"));

    CHECK(back.layout.spatial_modes == eq.layout.spatial_modes);
    CHECK(back.bin_spacing_hz == eq.bin_spacing_hz);
    CHECK(back.fitted_snr_linear == eq.fitted_snr_linear);
    CHECK(back.training_length == eq.training_length);
    REQUIRE(back.bin_count() == eq.bin_count());
    for (int f = 0; f < eq.bin_count(); ++f) CHECK(identical(back.bins[f], eq.bins[f]));

    // a reloaded equalizer estimates exactly like the original
    const SnrValue snr = SnrValue::from_db(14.0);
    CHECK(estimate_mdl(back, snr).uncorrected.db == estimate_mdl(eq, snr).uncorrected.db);
}

TEST_CASE("estimate container round trip is exact") {
    TempDir dir;
    const ChannelSpectrum chan = sample_channel(6);
    const SnrValue snr = SnrValue::from_db(12.0);
    const MdlEstimate est = estimate_mdl(wiener_equalizer(chan, snr), snr);
    save_estimate(est, dir.file("est.mdlsim"));
    const MdlEstimate back = load_estimate(dir.file("est.mdlsim"));

    CHECK(back.uncorrected.db == est.uncorrected.db);
    CHECK(back.corrected.db == est.corrected.db);
    CHECK(back.snr_linear == est.snr_linear);
    CHECK(back.failed_bins == est.failed_bins);
    CHECK(back.clamped_values == est.clamped_values);
    REQUIRE(back.per_bin_profiles.size() == est.per_bin_profiles.size());
    for (std::size_t i = 0; i < est.per_bin_profiles.size(); ++i) {
        CHECK(back.per_bin_profiles[i].bin_index() == est.per_bin_profiles[i].bin_index());
        CHECK((back.per_bin_profiles[i].values() - est.per_bin_profiles[i].values()).norm() ==
              0.0);
    }
}

TEST_CASE("containers reject the wrong kind and damaged data") {
    TempDir dir;
    const ChannelSpectrum chan = sample_channel(7);
    save_channel(chan, dir.file("chan.mdlsim"));

    CHECK_THROWS_AS(load_equalizer(dir.file("chan.mdlsim")), IoError);
    CHECK_THROWS_AS(load_channel(dir.file("missing.mdlsim")), IoError);

    // truncate the payload
    std::string bytes = slurp(dir.file("chan.mdlsim"));
    std::ofstream out(dir.file("cut.mdlsim"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 13));
    out.close();
    CHECK_THROWS_AS(load_channel(dir.file("cut.mdlsim")), IoError);

    // flip the magic
    bytes[0] = 'X';
    std::ofstream bad(dir.file("bad.mdlsim"), std::ios::binary);
    bad.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    bad.close();
    CHECK_THROWS_AS(load_channel(dir.file("bad.mdlsim")), IoError);
}
