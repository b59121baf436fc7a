#include "mdlsim/channel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <set>

#include "mdlsim/rng.hpp"

namespace mdlsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double db_to_amp(double db) { return std::pow(10.0, -db / 20.0); }

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of R's diagonal folded into Q, which removes the sign/phase ambiguity
/// that would otherwise bias the distribution.
MatrixC haar_unitary(int n, Rng& rng) {
    MatrixC a(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) a(i, j) = rng.complex_gaussian();
    Eigen::HouseholderQR<MatrixC> qr(a);
    MatrixC q = qr.householderQ();
    const MatrixC& r = qr.matrixQR();
    for (int k = 0; k < n; ++k) {
        const Complex d = r(k, k);
        const double mag = std::abs(d);
        if (mag > 0.0) q.col(k) *= d / mag;
    }
    return q;
}

/// Per-channel amplitude vector of a photonic lantern: one dB gain per
/// spatial mode, uniform on [-spread/2, spread/2], shared by both
/// polarizations of the mode.
VectorR lantern_amplitudes(const ModeLayout& layout, double spread_db, Rng& rng) {
    VectorR amp(layout.dimension());
    for (int m = 0; m < layout.mode_count(); ++m) {
        const double gain_db = rng.uniform(-spread_db / 2.0, spread_db / 2.0);
        for (int p = 0; p < layout.polarizations_per_mode; ++p)
            amp(m * layout.polarizations_per_mode + p) = db_to_amp(-gain_db);
    }
    return amp;
}

VectorR attenuation_amplitudes(const ModeLayout& layout, const std::vector<double>& att_db) {
    VectorR amp(layout.dimension());
    for (int m = 0; m < layout.mode_count(); ++m)
        for (int p = 0; p < layout.polarizations_per_mode; ++p)
            amp(m * layout.polarizations_per_mode + p) = db_to_amp(att_db[m]);
    return amp;
}

}  // namespace

void ModeLayout::validate() const {
    if (spatial_modes.empty()) throw InvalidChannelError("layout needs spatial modes");
    if (polarizations_per_mode < 1)
        throw InvalidChannelError("layout needs at least one polarization per mode");
    if (dimension() < 2) throw InvalidChannelError("layout dimension must be >= 2");
    std::set<std::string> unique(spatial_modes.begin(), spatial_modes.end());
    if (unique.size() != spatial_modes.size())
        throw InvalidChannelError("spatial mode labels must be unique");
}

void ChannelSpectrum::validate() const {
    layout.validate();
    if (bins.empty()) throw InvalidChannelError("spectrum needs at least one bin");
    if (!(bin_spacing_hz >= 0.0) || !std::isfinite(bin_spacing_hz))
        throw InvalidChannelError("bin spacing must be finite and non-negative");
    const int n = dimension();
    for (const MatrixC& h : bins) {
        if (h.rows() != n || h.cols() != n)
            throw InvalidChannelError("bin matrix does not match the mode layout");
        if (!h.allFinite()) throw InvalidChannelError("bin matrix has non-finite entries");
    }
}

void LinkSpec::validate() const {
    layout.validate();
    if (sections < 1) throw InvalidChannelError("link needs at least one section");
    if (!(delay_spread_s >= 0.0) || !std::isfinite(delay_spread_s))
        throw InvalidChannelError("delay spread must be finite and non-negative");
    if (!(lantern_mdl_spread_db >= 0.0) || !std::isfinite(lantern_mdl_spread_db))
        throw InvalidChannelError("lantern MDL spread must be finite and non-negative");
    if (bins < 1) throw InvalidChannelError("link needs at least one frequency bin");
    if (!(symbol_rate_hz > 0.0) || !std::isfinite(symbol_rate_hz))
        throw InvalidChannelError("symbol rate must be positive and finite");
}

void EmulatorProfile::validate(const ModeLayout& layout, int sections) const {
    if (static_cast<int>(attenuation_db.size()) != layout.mode_count())
        throw InvalidProfileError("need one attenuation per spatial mode");
    for (double a : attenuation_db) {
        if (!(a >= 0.0) || !std::isfinite(a))
            throw InvalidProfileError("attenuations must be finite and non-negative");
    }
    if (placement == Placement::InSpan &&
        (in_span_section < 1 || in_span_section >= sections))
        throw InvalidProfileError("in-span insertion point must lie strictly inside the link");
}

LinkRealization::LinkRealization(const LinkSpec& spec) : spec_(spec) {
    spec_.validate();
    Rng rng(mix_seed({spec_.seed, tag64("link")}));
    const int n = spec_.layout.dimension();

    // Draw order is part of the format: lanterns first, then per section one
    // unitary followed by its delays.
    input_lantern_amp_ = lantern_amplitudes(spec_.layout, spec_.lantern_mdl_spread_db, rng);
    sandwich_in_amp_ = lantern_amplitudes(spec_.layout, spec_.lantern_mdl_spread_db, rng);
    sandwich_out_amp_ = lantern_amplitudes(spec_.layout, spec_.lantern_mdl_spread_db, rng);

    section_unitaries_.reserve(spec_.sections);
    section_delays_s_.reserve(spec_.sections);
    for (int k = 0; k < spec_.sections; ++k) {
        section_unitaries_.push_back(haar_unitary(n, rng));
        VectorR tau(n);
        for (int i = 0; i < n; ++i) tau(i) = rng.uniform(0.0, spec_.delay_spread_s);
        section_delays_s_.push_back(std::move(tau));
    }
}

ChannelSpectrum LinkRealization::spectrum() const {
    return spectrum(EmulatorProfile{
        Placement::TxSide, 0, std::vector<double>(spec_.layout.mode_count(), 0.0)});
}

ChannelSpectrum LinkRealization::spectrum(const EmulatorProfile& emulator) const {
    emulator.validate(spec_.layout, spec_.sections);
    const int n = spec_.layout.dimension();
    const int f_count = spec_.bins;
    const double spacing = spec_.symbol_rate_hz / f_count;

    const VectorR bank_amp = attenuation_amplitudes(spec_.layout, emulator.attenuation_db);
    VectorR input_amp = input_lantern_amp_;
    if (emulator.placement == Placement::TxSide)
        input_amp = input_amp.cwiseProduct(bank_amp);
    // In-span, the bank sits between a fan-in/fan-out lantern pair.
    const VectorR sandwich_amp =
        sandwich_out_amp_.cwiseProduct(bank_amp).cwiseProduct(sandwich_in_amp_);

    ChannelSpectrum out;
    out.layout = spec_.layout;
    out.bin_spacing_hz = spacing;
    out.bins.reserve(f_count);

    VectorC phases(n);
    for (int fi = 0; fi < f_count; ++fi) {
        const double f = bin_frequency_hz(fi, f_count, spacing);
        MatrixC h = input_amp.cast<Complex>().asDiagonal();
        for (int k = 0; k < spec_.sections; ++k) {
            const VectorR& tau = section_delays_s_[k];
            for (int i = 0; i < n; ++i) {
                const double phi = -kTwoPi * f * tau(i);
                phases(i) = Complex(std::cos(phi), std::sin(phi));
            }
            h = section_unitaries_[k] * (phases.asDiagonal() * h);
            if (emulator.placement == Placement::InSpan && k + 1 == emulator.in_span_section)
                h = sandwich_amp.cast<Complex>().asDiagonal() * h;
        }
        out.bins.push_back(std::move(h));
    }
    return out;
}

ChannelSpectrum apply_emulator(const ChannelSpectrum& channel, const EmulatorProfile& emulator) {
    channel.validate();
    if (emulator.placement != Placement::TxSide)
        throw InvalidProfileError(
            "in-span emulation needs the link realization, not just its spectrum");
    emulator.validate(channel.layout, 1);
    const VectorR amp = attenuation_amplitudes(channel.layout, emulator.attenuation_db);
    ChannelSpectrum out = channel;
    for (MatrixC& h : out.bins) h = h * amp.cast<Complex>().asDiagonal();
    return out;
}

std::vector<double> constant_power_profile(double ratio_db, double base_db, int mode_count) {
    if (mode_count < 2) throw InvalidProfileError("profile needs at least two modes");
    if (!(ratio_db >= 0.0) || !std::isfinite(ratio_db))
        throw InvalidProfileError("ratio must be finite and non-negative");
    if (!(base_db >= 0.0) || !std::isfinite(base_db))
        throw InvalidProfileError("base attenuation must be finite and non-negative");
    if (ratio_db > 2.0 * base_db)
        throw InfeasibleProfileError("ratio exceeds the attenuator range at this base loss");
    std::vector<double> att(mode_count, base_db + ratio_db / 2.0);
    att[0] = base_db - ratio_db / 2.0;
    return att;
}

std::vector<EigenvalueProfile> eigenvalue_profiles(const ChannelSpectrum& channel) {
    channel.validate();
    std::vector<EigenvalueProfile> out;
    out.reserve(channel.bins.size());
    for (int fi = 0; fi < channel.bin_count(); ++fi) {
        Eigen::JacobiSVD<MatrixC> svd(channel.bins[fi]);
        const VectorR lambda_sq = svd.singularValues().array().square();
        if (!(lambda_sq(lambda_sq.size() - 1) > 0.0))
            throw InvalidChannelError("channel bin is singular");
        out.emplace_back(lambda_sq, fi);
    }
    return out;
}

EigenvalueProfile rank_average(const std::vector<EigenvalueProfile>& profiles) {
    if (profiles.empty()) throw InvalidProfileError("nothing to aggregate");
    const Eigen::Index n = profiles.front().size();
    VectorR mean = VectorR::Zero(n);
    for (const EigenvalueProfile& p : profiles) {
        if (p.size() != n)
            throw InvalidProfileError("rank averaging needs equally sized profiles");
        mean += p.values();
    }
    mean /= static_cast<double>(profiles.size());
    return EigenvalueProfile(mean);
}

MdlValue aggregate_mdl(const std::vector<EigenvalueProfile>& profiles, AggregationRule rule) {
    if (profiles.empty()) throw InvalidProfileError("nothing to aggregate");
    switch (rule) {
        case AggregationRule::RankAverage: {
            const EigenvalueProfile mean = rank_average(profiles);
            return MdlValue{10.0 * std::log10(mean.largest() / mean.smallest())};
        }
        case AggregationRule::PerBinMeanMdl: {
            double sum = 0.0;
            for (const EigenvalueProfile& p : profiles)
                sum += 10.0 * std::log10(p.largest() / p.smallest());
            return MdlValue{sum / static_cast<double>(profiles.size())};
        }
        case AggregationRule::WorstBin: {
            double worst = 0.0;
            for (const EigenvalueProfile& p : profiles)
                worst = std::max(worst, 10.0 * std::log10(p.largest() / p.smallest()));
            return MdlValue{worst};
        }
    }
    throw std::logic_error("unreachable aggregation rule");
}

MdlValue true_mdl(const ChannelSpectrum& channel, AggregationRule rule) {
    return aggregate_mdl(eigenvalue_profiles(channel), rule);
}

double mean_power_gain(const ChannelSpectrum& channel) {
    channel.validate();
    double sum = 0.0;
    for (const MatrixC& h : channel.bins) sum += h.squaredNorm();
    return sum / (static_cast<double>(channel.bin_count()) * channel.dimension());
}

ChannelSpectrum normalize_gain(ChannelSpectrum channel) {
    const double gain = mean_power_gain(channel);
    if (!(gain > 0.0)) throw InvalidChannelError("channel has zero mean power gain");
    const double scale = 1.0 / std::sqrt(gain);
    for (MatrixC& h : channel.bins) h *= scale;
    return channel;
}

MatrixC awgn(const MatrixC& samples, SnrValue snr, const VectorR& signal_power,
             std::uint64_t seed) {
    if (signal_power.size() != samples.rows())
        throw std::invalid_argument("need one signal power per row");
    VectorR sigma(signal_power.size());
    for (Eigen::Index i = 0; i < signal_power.size(); ++i) {
        if (!(signal_power(i) > 0.0) || !std::isfinite(signal_power(i)))
            throw std::domain_error("signal power must be positive and finite");
        sigma(i) = std::sqrt(signal_power(i) / snr.linear() / 2.0);
    }
    Rng rng(mix_seed({seed, tag64("awgn")}));
    MatrixC out = samples;
    for (Eigen::Index t = 0; t < out.cols(); ++t)
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const double re = rng.gaussian();
            const double im = rng.gaussian();
            out(i, t) += Complex(sigma(i) * re, sigma(i) * im);
        }
    return out;
}

MatrixC awgn(const MatrixC& samples, SnrValue snr, double signal_power, std::uint64_t seed) {
    return awgn(samples, snr, VectorR::Constant(samples.rows(), signal_power), seed);
}

}  // namespace mdlsim
