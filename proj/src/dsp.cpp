#include "mdlsim/dsp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <set>

#include "mdlsim/mdl_core.hpp"
#include "mdlsim/rng.hpp"

namespace mdlsim {

namespace {

/// Unitary DFT matrix; right-multiplying a (streams x time) block by it
/// yields the block spectrum, and by its adjoint the inverse transform.
MatrixC dft_matrix(int f_count) {
    MatrixC w(f_count, f_count);
    const double scale = 1.0 / std::sqrt(static_cast<double>(f_count));
    for (int t = 0; t < f_count; ++t)
        for (int f = 0; f < f_count; ++f) {
            const double phi = -2.0 * std::numbers::pi * t * f / f_count;
            w(t, f) = Complex(scale * std::cos(phi), scale * std::sin(phi));
        }
    return w;
}

// Gray-mapped 16-QAM: per axis, bit pair b1b0 indexes {-3,-1,+3,+1} so
// adjacent levels differ in one bit; scaled to unit mean symbol power.
constexpr double kQamLevels[4] = {-3.0, -1.0, 3.0, 1.0};
constexpr double kQamScale = 0.31622776601683794;  // 1/sqrt(10)

Complex qam16_symbol(Rng& rng) {
    const std::uint64_t bits = rng.next_u64();
    return Complex(kQamLevels[bits & 3] * kQamScale,
                   kQamLevels[(bits >> 2) & 3] * kQamScale);
}

void check_compatible(const FrameSet& frames, const ReceivedFrameSet& received) {
    if (frames.symbols.rows() != received.samples.rows())
        throw std::invalid_argument("frame and received stream counts differ");
    if (frames.symbols.cols() < received.samples.cols())
        throw std::invalid_argument("received run is longer than the known frames");
    if (received.bins < 1 || received.samples.cols() % received.bins != 0)
        throw std::invalid_argument("received length is not a whole number of blocks");
}

}  // namespace

FrameSet generate_frames(const ModeLayout& layout, int length, std::uint64_t seed,
                         const std::vector<int>& shifts) {
    layout.validate();
    if (length < 1024) throw std::invalid_argument("training frames need at least 1024 symbols");

    const int modes = layout.mode_count();
    const int pols = layout.polarizations_per_mode;

    std::vector<int> shift(modes);
    if (shifts.empty()) {
        for (int m = 0; m < modes; ++m) shift[m] = m * (length / modes);
    } else {
        if (static_cast<int>(shifts.size()) != modes)
            throw std::invalid_argument("need one decorrelation shift per spatial mode");
        shift = shifts;
    }
    std::set<int> unique;
    for (int& s : shift) {
        s = ((s % length) + length) % length;
        unique.insert(s);
    }
    if (static_cast<int>(unique.size()) != modes)
        throw std::invalid_argument("decorrelation shifts must be distinct modulo the length");

    // One base sequence per polarization; all draws come from one stream in
    // polarization-major order so the set is a pure function of the seed.
    Rng rng(mix_seed({seed, tag64("frames")}));
    MatrixC base(pols, length);
    for (int p = 0; p < pols; ++p)
        for (int t = 0; t < length; ++t) base(p, t) = qam16_symbol(rng);

    FrameSet out;
    out.layout = layout;
    out.seed = seed;
    out.decorrelation_shifts = shift;
    out.symbols.resize(layout.dimension(), length);
    for (int m = 0; m < modes; ++m)
        for (int p = 0; p < pols; ++p) {
            const int row = m * pols + p;
            for (int t = 0; t < length; ++t)
                out.symbols(row, t) = base(p, (t + shift[m]) % length);
        }
    return out;
}

ReceivedFrameSet transmit(const FrameSet& frames, const ChannelSpectrum& channel,
                          SnrValue snr, std::uint64_t noise_seed) {
    channel.validate();
    if (frames.symbols.rows() != channel.dimension())
        throw std::invalid_argument("frame streams do not match the channel dimension");
    const int f_count = channel.bin_count();
    const int blocks = frames.length() / f_count;
    if (blocks < 1) throw std::invalid_argument("frames are shorter than one DFT block");

    const MatrixC w = dft_matrix(f_count);
    const int n = channel.dimension();
    MatrixC y(n, blocks * f_count);
    MatrixC spec(n, f_count);
    for (int b = 0; b < blocks; ++b) {
        spec.noalias() = frames.symbols.middleCols(b * f_count, f_count) * w;
        for (int f = 0; f < f_count; ++f)
            spec.col(f) = channel.bins[f] * spec.col(f).eval();
        y.middleCols(b * f_count, f_count).noalias() = spec * w.adjoint();
    }

    ReceivedFrameSet out;
    out.bins = f_count;
    out.snr_linear = snr.linear();
    out.noise_seed = noise_seed;
    out.samples = awgn(y, snr, 1.0, noise_seed);
    return out;
}

EqualizerSolution wiener_equalizer(const ChannelSpectrum& channel, SnrValue snr) {
    channel.validate();
    EqualizerSolution eq;
    eq.layout = channel.layout;
    eq.bin_spacing_hz = channel.bin_spacing_hz;
    eq.fitted_snr_linear = snr.linear();
    eq.training_length = 0;
    eq.bins.reserve(channel.bins.size());
    for (const MatrixC& h : channel.bins) {
        MatrixC m = h * h.adjoint();
        m.diagonal().array() += 1.0 / snr.linear();
        // W = H^H M^{-1} computed as (M^{-1} H)^H; M is hermitian positive
        // definite by construction.
        MatrixC w = m.ldlt().solve(h).adjoint();
        if (!w.allFinite()) throw NumericalError("equalizer solve produced non-finite taps");
        eq.bins.push_back(std::move(w));
    }
    return eq;
}

EqualizerSolution fit_equalizer(const FrameSet& frames, const ReceivedFrameSet& received,
                                SnrValue snr_hint) {
    check_compatible(frames, received);
    const int f_count = received.bins;
    const int n = static_cast<int>(received.samples.rows());
    const int blocks = static_cast<int>(received.samples.cols()) / f_count;
    if (blocks * f_count < 4 * n * f_count)
        throw InsufficientTrainingError("need at least 4 x dimension x bins training symbols");

    const MatrixC w = dft_matrix(f_count);
    std::vector<MatrixC> sxy(f_count, MatrixC::Zero(n, n));
    std::vector<MatrixC> syy(f_count, MatrixC::Zero(n, n));
    MatrixC xs(n, f_count), ys(n, f_count);
    for (int b = 0; b < blocks; ++b) {
        xs.noalias() = frames.symbols.middleCols(b * f_count, f_count) * w;
        ys.noalias() = received.samples.middleCols(b * f_count, f_count) * w;
        for (int f = 0; f < f_count; ++f) {
            sxy[f].noalias() += xs.col(f) * ys.col(f).adjoint();
            syy[f].noalias() += ys.col(f) * ys.col(f).adjoint();
        }
    }

    EqualizerSolution eq;
    eq.layout = frames.layout;
    eq.bin_spacing_hz = 0.0;
    eq.fitted_snr_linear = snr_hint.linear();
    eq.training_length = blocks * f_count;
    eq.bins.reserve(f_count);
    const double inv_b = 1.0 / blocks;
    for (int f = 0; f < f_count; ++f) {
        sxy[f] *= inv_b;
        MatrixC s = (syy[f] + syy[f].adjoint()) * (0.5 * inv_b);
        Eigen::SelfAdjointEigenSolver<MatrixC> es(s, Eigen::EigenvaluesOnly);
        const VectorR ev = es.eigenvalues();
        if (!(ev(0) > 0.0) || ev(n - 1) / ev(0) > 1e12)
            throw InsufficientTrainingError("received covariance is numerically singular");
        MatrixC taps = s.ldlt().solve(sxy[f].adjoint()).adjoint();
        if (!taps.allFinite())
            throw InsufficientTrainingError("equalizer fit produced non-finite taps");
        eq.bins.push_back(std::move(taps));
    }
    return eq;
}

MdlEstimate estimate_mdl(const EqualizerSolution& eq, SnrValue snr, AggregationRule rule,
                         ClampPolicy policy) {
    if (eq.bins.empty()) throw EstimationError("equalizer has no bins");
    const int n = eq.dimension();

    MdlEstimate est;
    est.snr_linear = snr.linear();

    std::vector<EigenvalueProfile> uncorrected;
    std::vector<EigenvalueProfile> corrected;
    for (int f = 0; f < eq.bin_count(); ++f) {
        Eigen::JacobiSVD<MatrixC> svd(eq.bins[f]);
        const VectorR sv = svd.singularValues();
        if (!(sv(n - 1) > 0.0) || sv(0) / sv(n - 1) > 1e8) {
            ++est.failed_bins;
            continue;
        }
        // sigma(W^{-1}) = 1/sigma(W); squared and reversed this is the
        // equalizer-side eigenvalue profile, largest first.
        VectorR lambda_mmse(n);
        for (int i = 0; i < n; ++i) lambda_mmse(i) = 1.0 / (sv(n - 1 - i) * sv(n - 1 - i));
        EigenvalueProfile raw(lambda_mmse, f);
        est.per_bin_profiles.push_back(raw);

        if (policy == ClampPolicy::SkipBin) {
            try {
                corrected.push_back(correct_profile(raw, snr, ClampPolicy::Strict));
            } catch (const NoiseDominatedBin&) {
                ++est.failed_bins;
                continue;  // bin leaves both aggregates
            }
        } else {
            int adjusted = 0;
            corrected.push_back(correct_profile(raw, snr, policy, &adjusted));
            est.clamped_values += adjusted;
        }
        uncorrected.push_back(std::move(raw));
    }
    if (uncorrected.empty())
        throw EstimationError("no usable frequency bins in the equalizer");

    est.uncorrected = aggregate_mdl(uncorrected, rule);
    est.corrected = aggregate_mdl(corrected, rule);
    return est;
}

SnrValue estimate_snr_evm(const FrameSet& frames, const ReceivedFrameSet& received,
                          const EqualizerSolution& eq) {
    check_compatible(frames, received);
    const int f_count = received.bins;
    if (eq.bin_count() != f_count)
        throw std::invalid_argument("equalizer bin count does not match the received data");
    const int n = static_cast<int>(received.samples.rows());
    const int blocks = static_cast<int>(received.samples.cols()) / f_count;

    const MatrixC w = dft_matrix(f_count);
    MatrixC spec(n, f_count);
    double err = 0.0;
    for (int b = 0; b < blocks; ++b) {
        spec.noalias() = received.samples.middleCols(b * f_count, f_count) * w;
        for (int f = 0; f < f_count; ++f) spec.col(f) = eq.bins[f] * spec.col(f).eval();
        err += (spec * w.adjoint() - frames.symbols.middleCols(b * f_count, f_count))
                   .squaredNorm();
    }
    const double evm_sq = err / (static_cast<double>(blocks) * f_count * n);
    return SnrValue::from_linear(std::max(1.0 / evm_sq - 1.0, 1e-12));
}

}  // namespace mdlsim
