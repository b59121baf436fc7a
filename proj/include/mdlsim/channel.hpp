#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlsim/types.hpp"

namespace mdlsim {

/// Mode/polarization layout of the transmission matrix. Channel indices are
/// mode-major: row r carries spatial mode r / polarizations, polarization
/// r % polarizations.
struct ModeLayout {
    std::vector<std::string> spatial_modes{"LP01", "LP11a", "LP11b"};
    int polarizations_per_mode = 2;

    int mode_count() const noexcept { return static_cast<int>(spatial_modes.size()); }
    int dimension() const noexcept { return mode_count() * polarizations_per_mode; }
    void validate() const;
};

/// Frequency-resolved transmission matrix. Bins are stored in DFT order:
/// bin i maps to frequency i·spacing for i < bins/2 and (i - bins)·spacing
/// above, matching the discrete spectrum of a block DFT at the symbol rate.
struct ChannelSpectrum {
    ModeLayout layout;
    double bin_spacing_hz = 0.0;
    std::vector<MatrixC> bins;

    int dimension() const noexcept { return layout.dimension(); }
    int bin_count() const noexcept { return static_cast<int>(bins.size()); }
    void validate() const;
};

inline double bin_frequency_hz(int index, int bin_count, double spacing_hz) {
    return (index < (bin_count + 1) / 2 ? index : index - bin_count) * spacing_hz;
}

/// Parameters of a synthesized multi-section link.
struct LinkSpec {
    int sections = 16;
    double delay_spread_s = 10e-12;       ///< per-channel group delays ~ U[0, spread]
    double lantern_mdl_spread_db = 4.0;   ///< per-mode gains of each lantern ~ U[-s/2, s/2]
    std::uint64_t seed = 1;
    ModeLayout layout{};
    int bins = 64;
    double symbol_rate_hz = 25e9;

    void validate() const;
};

enum class Placement { TxSide, InSpan };

inline const char* to_string(Placement p) {
    return p == Placement::TxSide ? "tx-side" : "in-span";
}

/// Where and how hard the per-mode attenuator bank squeezes the link.
/// `in_span_section` counts sections traversed before the bank (1..K-1);
/// ignored for TxSide. Attenuations are positive-dB losses, one per spatial
/// mode, applied to both polarizations of that mode.
struct EmulatorProfile {
    Placement placement = Placement::TxSide;
    int in_span_section = 0;
    std::vector<double> attenuation_db;

    void validate(const ModeLayout& layout, int sections) const;
};

/// The drawn random factors of one link: input lantern, per-section unitaries
/// and delay lines, and the lantern pair that would sandwich an in-span
/// attenuator bank. Holding the factors (not just their product) is what
/// makes mid-link insertion possible.
class LinkRealization {
public:
    explicit LinkRealization(const LinkSpec& spec);

    const LinkSpec& spec() const noexcept { return spec_; }

    /// Transmission spectrum, optionally with an attenuator bank inserted.
    ChannelSpectrum spectrum() const;
    ChannelSpectrum spectrum(const EmulatorProfile& emulator) const;

private:
    LinkSpec spec_;
    VectorR input_lantern_amp_;      // per-channel amplitude gains
    VectorR sandwich_in_amp_;
    VectorR sandwich_out_amp_;
    std::vector<MatrixC> section_unitaries_;
    std::vector<VectorR> section_delays_s_;
};

inline LinkRealization synthesize_link(const LinkSpec& spec) { return LinkRealization(spec); }

/// Attenuator bank at the transmitter output of an already-synthesized
/// spectrum: H'(f) = H(f)·A. Only TxSide placement is possible here; in-span
/// insertion needs the LinkRealization.
ChannelSpectrum apply_emulator(const ChannelSpectrum& channel, const EmulatorProfile& emulator);

inline ChannelSpectrum apply_emulator(const LinkRealization& link, const EmulatorProfile& emulator) {
    return link.spectrum(emulator);
}

/// Per-mode attenuations (dB) realizing a target peak-to-peak ratio at
/// constant total bank loss: {base - r/2, base + r/2, ..., base + r/2}.
/// Throws InfeasibleProfileError when any entry would turn into gain.
std::vector<double> constant_power_profile(double ratio_db, double base_db = 5.0,
                                           int mode_count = 3);

/// Descending power eigenvalues (squared singular values of H) per bin.
std::vector<EigenvalueProfile> eigenvalue_profiles(const ChannelSpectrum& channel);

/// Rank-wise mean across equally sized profiles; the aggregate of
/// AggregationRule::RankAverage.
EigenvalueProfile rank_average(const std::vector<EigenvalueProfile>& profiles);

MdlValue aggregate_mdl(const std::vector<EigenvalueProfile>& profiles, AggregationRule rule);

/// Ground-truth MDL of a spectrum under the chosen aggregation rule.
MdlValue true_mdl(const ChannelSpectrum& channel,
                  AggregationRule rule = AggregationRule::RankAverage);

/// Grand mean power gain: average eigenvalue of H·H^H over all bins.
double mean_power_gain(const ChannelSpectrum& channel);

/// Rescales the spectrum so mean_power_gain == 1, i.e. the channel neither
/// amplifies nor attenuates on average. Keeps SNR receiver-referenced.
ChannelSpectrum normalize_gain(ChannelSpectrum channel);

/// Adds circularly symmetric white gaussian noise at the given SNR. The
/// per-row noise variance is signal_power / snr; rows are channels, columns
/// samples. Draws are column-major and deterministic in the seed.
MatrixC awgn(const MatrixC& samples, SnrValue snr, const VectorR& signal_power,
             std::uint64_t seed);
MatrixC awgn(const MatrixC& samples, SnrValue snr, double signal_power, std::uint64_t seed);

}  // namespace mdlsim
