#pragma once

#include <cstdint>
#include <vector>

#include "mdlsim/channel.hpp"
#include "mdlsim/types.hpp"

namespace mdlsim {

/// Known transmit symbols, one row per channel (mode-major). Each row is a
/// cyclic shift of one of `polarizations_per_mode` base sequences, so
/// different spatial modes carry decorrelated copies while the transmitter
/// only needs one pattern generator per polarization.
struct FrameSet {
    ModeLayout layout;
    MatrixC symbols;                        // dimension x length
    std::vector<int> decorrelation_shifts;  // per spatial mode
    std::uint64_t seed = 0;

    int length() const noexcept { return static_cast<int>(symbols.cols()); }
};

/// Unit-power gray-mapped 16-QAM training frames. `shifts` gives the cyclic
/// advance per spatial mode; defaults to mode·(length/mode_count), spacing
/// the copies far beyond any DFT block. Shifts must be distinct mod length.
FrameSet generate_frames(const ModeLayout& layout, int length, std::uint64_t seed,
                         const std::vector<int>& shifts = {});

/// Channel output: block-circular convolution with the bin matrices plus
/// AWGN at `snr` referenced to unit signal power per channel.
struct ReceivedFrameSet {
    MatrixC samples;  // dimension x (blocks·bins)
    int bins = 0;
    double snr_linear = 0.0;
    std::uint64_t noise_seed = 0;
};

ReceivedFrameSet transmit(const FrameSet& frames, const ChannelSpectrum& channel,
                          SnrValue snr, std::uint64_t noise_seed);

/// Frequency-resolved linear equalizer. `training_length` is 0 for the
/// analytic solution.
struct EqualizerSolution {
    ModeLayout layout;
    double bin_spacing_hz = 0.0;
    std::vector<MatrixC> bins;
    double fitted_snr_linear = 0.0;
    int training_length = 0;

    int dimension() const noexcept { return layout.dimension(); }
    int bin_count() const noexcept { return static_cast<int>(bins.size()); }
};

/// Analytic MMSE equalizer W(f) = H^H (H H^H + I/SNR)^{-1} for a known
/// channel; the noiseless limit of fit_equalizer.
EqualizerSolution wiener_equalizer(const ChannelSpectrum& channel, SnrValue snr);

/// Least-squares fit W(f) = S_xy(f)·S_yy(f)^{-1} from per-bin sample
/// cross- and auto-covariances of the block DFTs. Requires at least
/// 4·dimension·bins training symbols; throws InsufficientTrainingError when
/// the training is too short or any S_yy is numerically singular
/// (condition > 1e12).
EqualizerSolution fit_equalizer(const FrameSet& frames, const ReceivedFrameSet& received,
                                SnrValue snr_hint);

/// MDL read off an equalizer: per bin, the squared singular values of
/// W(f)^{-1} (computed as 1/sigma(W)^2, no inversion) are the
/// equalizer-side eigenvalue profile; `corrected` additionally inverts the
/// finite-SNR forward distortion per bin before aggregation.
struct MdlEstimate {
    MdlValue uncorrected;
    MdlValue corrected;
    std::vector<EigenvalueProfile> per_bin_profiles;  // raw equalizer-side values
    double snr_linear = 0.0;
    int failed_bins = 0;      // singular W or (under SkipBin) below-floor bins
    int clamped_values = 0;   // values clamped to 1/SNR under ClampToFloor
};

MdlEstimate estimate_mdl(const EqualizerSolution& eq, SnrValue snr,
                         AggregationRule rule = AggregationRule::RankAverage,
                         ClampPolicy policy = ClampPolicy::ClampToFloor);

/// Error-vector-magnitude SNR estimate after equalization: 1/e - 1 with
/// e the mean squared symbol error. Exact for unitary channels; biased low
/// when MDL is present (the equalizer cannot restore the squeezed modes).
SnrValue estimate_snr_evm(const FrameSet& frames, const ReceivedFrameSet& received,
                          const EqualizerSolution& eq);

}  // namespace mdlsim
