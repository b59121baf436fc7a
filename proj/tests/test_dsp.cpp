#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "mdlsim/channel.hpp"
#include "mdlsim/dsp.hpp"
#include "mdlsim/mdl_core.hpp"
#include "mdlsim/rng.hpp"

using namespace mdlsim;

namespace {

ModeLayout two_channel_layout() {
    ModeLayout layout;
    layout.spatial_modes = {"A", "B"};
    layout.polarizations_per_mode = 1;
    return layout;
}

ChannelSpectrum diagonal_channel(const std::vector<double>& gains_sq) {
    ChannelSpectrum c;
    c.layout = two_channel_layout();
    REQUIRE(gains_sq.size() == 2);
    c.bin_spacing_hz = 1e9;
    MatrixC h = MatrixC::Zero(2, 2);
    h(0, 0) = std::sqrt(gains_sq[0]);
    h(1, 1) = std::sqrt(gains_sq[1]);
    c.bins.push_back(h);
    return c;
}

ChannelSpectrum flat_identity(const ModeLayout& layout, int bins) {
    ChannelSpectrum c;
    c.layout = layout;
    c.bin_spacing_hz = 25e9 / bins;
    for (int i = 0; i < bins; ++i)
        c.bins.push_back(MatrixC::Identity(layout.dimension(), layout.dimension()));
    return c;
}

LinkSpec mixing_spec(std::uint64_t seed, int bins = 16) {
    LinkSpec spec;
    spec.seed = seed;
    spec.bins = bins;
    return spec;
}

}  // namespace

TEST_CASE("frames are unit power 16-qam with distinct shifted rows") {
    const ModeLayout layout;  // 3 modes x 2 pols
    const FrameSet frames = generate_frames(layout, 4096, 7);
    REQUIRE(frames.symbols.rows() == 6);
    REQUIRE(frames.length() == 4096);
    REQUIRE(frames.decorrelation_shifts == std::vector<int>{0, 1365, 2730});

    const double power = frames.symbols.squaredNorm() / (6.0 * 4096.0);
    CHECK(power == doctest::Approx(1.0).epsilon(0.02));

    // every symbol sits on the 16-point grid
    std::vector<double> levels;
    for (Eigen::Index t = 0; t < 64; ++t) {
        levels.push_back(frames.symbols(0, t).real());
        levels.push_back(frames.symbols(0, t).imag());
    }
    for (double l : levels) {
        const double scaled = l * std::sqrt(10.0);
        CHECK(std::abs(scaled - std::round(scaled)) < 1e-12);
        CHECK(std::abs(scaled) <= 3.0 + 1e-12);
    }

    // row (m, p) is row (0, p) advanced by the mode shift
    const int L = frames.length();
    for (int m = 1; m < 3; ++m)
        for (int p = 0; p < 2; ++p) {
            const int shift = frames.decorrelation_shifts[m];
            bool match = true;
            for (int t = 0; t < L && match; ++t)
                match = frames.symbols(m * 2 + p, t) == frames.symbols(p, (t + shift) % L);
            CHECK(match);
        }

    // determinism and seed sensitivity
    const FrameSet again = generate_frames(layout, 4096, 7);
    CHECK(std::memcmp(frames.symbols.data(), again.symbols.data(),
                      sizeof(Complex) * frames.symbols.size()) == 0);
    const FrameSet other = generate_frames(layout, 4096, 8);
    CHECK(std::memcmp(frames.symbols.data(), other.symbols.data(),
                      sizeof(Complex) * frames.symbols.size()) != 0);
}

TEST_CASE("frame generation validates its inputs") {
    const ModeLayout layout;
    CHECK_THROWS_AS(generate_frames(layout, 512, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_frames(layout, 4096, 1, {0, 0, 512}), std::invalid_argument);
    CHECK_THROWS_AS(generate_frames(layout, 4096, 1, {0, 512}), std::invalid_argument);
    const FrameSet custom = generate_frames(layout, 4096, 1, {0, 512, 1024});
    CHECK(custom.decorrelation_shifts == std::vector<int>{0, 512, 1024});
}

TEST_CASE("circular cross-correlation between modes peaks at the shift difference") {
    const ModeLayout layout;
    const int L = 2048;
    const FrameSet frames = generate_frames(layout, L, 3);

    const auto row0 = frames.symbols.row(0);  // mode 0, pol 0
    const auto row1 = frames.symbols.row(2);  // mode 1, pol 0
    double peak = 0.0, second = 0.0;
    int peak_lag = -1;
    for (int lag = 0; lag < L; ++lag) {
        Complex acc(0.0, 0.0);
        for (int t = 0; t < L; ++t) acc += row1(t) * std::conj(row0((t + lag) % L));
        const double mag = std::abs(acc) / L;
        if (mag > peak) {
            second = peak;
            peak = mag;
            peak_lag = lag;
        } else if (mag > second) {
            second = mag;
        }
    }
    // row1(t) = base((t + s1) mod L) so the aligned lag satisfies
    // (t + lag + s0) = (t + s1), i.e. lag = s1 - s0
    const int expected =
        (frames.decorrelation_shifts[1] - frames.decorrelation_shifts[0] + L) % L;
    CHECK(peak_lag == expected);
    CHECK(peak == doctest::Approx(1.0).epsilon(0.01));
    CHECK(second < 0.1);
}

TEST_CASE("identity channel passes frames through") {
    const ModeLayout layout;
    const ChannelSpectrum chan = flat_identity(layout, 16);
    const FrameSet frames = generate_frames(layout, 2048, 5);
    const ReceivedFrameSet rx =
        transmit(frames, chan, SnrValue::from_linear(1e12), 1);
    REQUIRE(rx.samples.cols() == 2048);
    const double err = (rx.samples - frames.symbols).norm() / frames.symbols.norm();
    CHECK(err < 1e-5);
}

TEST_CASE("pure delay channel circularly shifts each block") {
    const ModeLayout layout;
    const int bins = 16, shift_samples = 3;
    const double rate = 25e9;

    ChannelSpectrum chan;
    chan.layout = layout;
    chan.bin_spacing_hz = rate / bins;
    const double tau = shift_samples / rate;
    for (int i = 0; i < bins; ++i) {
        const double phi = -2.0 * std::numbers::pi * bin_frequency_hz(i, bins, chan.bin_spacing_hz) * tau;
        chan.bins.push_back(Complex(std::cos(phi), std::sin(phi)) *
                            MatrixC::Identity(6, 6));
    }

    const FrameSet frames = generate_frames(layout, 1024 + bins, 9);
    const ReceivedFrameSet rx = transmit(frames, chan, SnrValue::from_linear(1e14), 2);
    const int blocks = static_cast<int>(rx.samples.cols()) / bins;
    double worst = 0.0;
    for (int b = 0; b < blocks; ++b)
        for (int t = 0; t < bins; ++t) {
            const int src = (t - shift_samples + bins) % bins;
            worst = std::max(worst, (rx.samples.col(b * bins + t) -
                                     frames.symbols.col(b * bins + src))
                                        .norm());
        }
    CHECK(worst < 1e-6);
}

TEST_CASE("transmit validates shapes and is noise-seed deterministic") {
    const ModeLayout layout;
    const ChannelSpectrum chan = flat_identity(layout, 16);
    const FrameSet frames = generate_frames(layout, 2048, 5);
    CHECK_THROWS_AS(
        transmit(generate_frames(two_channel_layout(), 2048, 5), chan,
                 SnrValue::from_linear(10.0), 1),
        std::invalid_argument);

    const ReceivedFrameSet a = transmit(frames, chan, SnrValue::from_db(10.0), 77);
    const ReceivedFrameSet b = transmit(frames, chan, SnrValue::from_db(10.0), 77);
    CHECK(std::memcmp(a.samples.data(), b.samples.data(),
                      sizeof(Complex) * a.samples.size()) == 0);
    const ReceivedFrameSet c = transmit(frames, chan, SnrValue::from_db(10.0), 78);
    CHECK(std::memcmp(a.samples.data(), c.samples.data(),
                      sizeof(Complex) * a.samples.size()) != 0);
}

TEST_CASE("wiener taps match the scalar formula on a diagonal channel") {
    const ChannelSpectrum chan = diagonal_channel({1.0, 0.25});
    const double s = 10.0;
    const EqualizerSolution eq = wiener_equalizer(chan, SnrValue::from_linear(s));
    REQUIRE(eq.bin_count() == 1);
    // w = h* / (|h|^2 + 1/S) per channel
    CHECK(eq.bins[0](0, 0).real() == doctest::Approx(1.0 / 1.1).epsilon(1e-12));
    CHECK(eq.bins[0](1, 1).real() == doctest::Approx(0.5 / 0.35).epsilon(1e-12));
    CHECK(std::abs(eq.bins[0](0, 1)) < 1e-15);
    CHECK(eq.training_length == 0);
    CHECK(eq.fitted_snr_linear == doctest::Approx(s));
}

TEST_CASE("equalizer-side eigenvalues reproduce the forward map analytically") {
    // random mixing channels: sorted 1/sigma(W)^2 == mmse_forward(sigma(H)^2)
    for (std::uint64_t seed : {1ull, 2ull}) {
        const ChannelSpectrum chan = normalize_gain(apply_emulator(
            synthesize_link(mixing_spec(seed)),
            EmulatorProfile{Placement::TxSide, 0, constant_power_profile(6.0)}));
        for (double snr_db : {5.0, 15.0, 30.0}) {
            const SnrValue snr = SnrValue::from_db(snr_db);
            const EqualizerSolution eq = wiener_equalizer(chan, snr);
            const std::vector<EigenvalueProfile> truth = eigenvalue_profiles(chan);
            const MdlEstimate est = estimate_mdl(eq, snr);
            REQUIRE(est.per_bin_profiles.size() == truth.size());
            for (std::size_t f = 0; f < truth.size(); ++f) {
                VectorR predicted(truth[f].size());
                for (Eigen::Index i = 0; i < truth[f].size(); ++i)
                    predicted(i) = mmse_forward(truth[f].values()(i), snr);
                std::sort(predicted.data(), predicted.data() + predicted.size(),
                          std::greater<double>());
                const VectorR& measured = est.per_bin_profiles[f].values();
                for (Eigen::Index i = 0; i < predicted.size(); ++i)
                    CHECK(std::abs(measured(i) - predicted(i)) / predicted(i) < 1e-10);
            }
        }
    }
}

TEST_CASE("mdl estimate on a known diagonal channel") {
    const ChannelSpectrum chan = diagonal_channel({1.0, 0.25});
    const SnrValue snr = SnrValue::from_linear(10.0);
    const MdlEstimate est = estimate_mdl(wiener_equalizer(chan, snr), snr);

    // forward values 1.21 and 0.49 squeeze the 6.02 dB spread to 3.925 dB
    CHECK(est.uncorrected.db ==
          doctest::Approx(10.0 * std::log10(1.21 / 0.49)).epsilon(1e-9));
    CHECK(est.corrected.db == doctest::Approx(6.0205999).epsilon(1e-6));
    CHECK(est.failed_bins == 0);
    CHECK(est.clamped_values == 0);
    REQUIRE(est.per_bin_profiles.size() == 1);
    CHECK(est.per_bin_profiles[0].values()(0) == doctest::Approx(1.21).epsilon(1e-12));
    CHECK(est.per_bin_profiles[0].values()(1) == doctest::Approx(0.49).epsilon(1e-12));
    CHECK(est.corrected.db >= est.uncorrected.db);
}

TEST_CASE("estimate clamp policies on a synthetic below-floor equalizer") {
    // eigenvalues {1.21, 0.39} at S = 10: the small one sits under 4/S
    EqualizerSolution eq;
    eq.layout = two_channel_layout();
    eq.bins.push_back(MatrixC::Zero(2, 2));
    eq.bins[0](0, 0) = 1.0 / std::sqrt(1.21);
    eq.bins[0](1, 1) = 1.0 / std::sqrt(0.39);
    const SnrValue snr = SnrValue::from_linear(10.0);

    const MdlEstimate clamped =
        estimate_mdl(eq, snr, AggregationRule::RankAverage, ClampPolicy::ClampToFloor);
    CHECK(clamped.clamped_values == 1);
    CHECK(clamped.failed_bins == 0);
    CHECK(clamped.corrected.db == doctest::Approx(10.0).epsilon(1e-9));  // 1.0 vs 1/S

    CHECK_THROWS_AS(
        estimate_mdl(eq, snr, AggregationRule::RankAverage, ClampPolicy::Strict),
        NoiseDominatedBin);
    // the only bin fails, so skipping leaves nothing to aggregate
    CHECK_THROWS_AS(
        estimate_mdl(eq, snr, AggregationRule::RankAverage, ClampPolicy::SkipBin),
        EstimationError);
}

TEST_CASE("fitted equalizer converges to the analytic one") {
    // tap error should roughly halve per quadrupling of the training length
    const ModeLayout layout;
    std::vector<double> ratios_12_14, ratios_14_16;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ChannelSpectrum chan = normalize_gain(apply_emulator(
            synthesize_link(mixing_spec(seed)),
            EmulatorProfile{Placement::TxSide, 0, constant_power_profile(4.0)}));
        const SnrValue snr = SnrValue::from_db(20.0);
        const EqualizerSolution reference = wiener_equalizer(chan, snr);

        auto tap_error = [&](int length) {
            const FrameSet frames = generate_frames(layout, length, seed + 100);
            const ReceivedFrameSet rx = transmit(frames, chan, snr, seed + 200);
            const EqualizerSolution fitted = fit_equalizer(frames, rx, snr);
            double err = 0.0, norm = 0.0;
            for (int f = 0; f < fitted.bin_count(); ++f) {
                err += (fitted.bins[f] - reference.bins[f]).squaredNorm();
                norm += reference.bins[f].squaredNorm();
            }
            return std::sqrt(err / norm);
        };
        const double e12 = tap_error(1 << 12);
        const double e14 = tap_error(1 << 14);
        const double e16 = tap_error(1 << 16);
        ratios_12_14.push_back(e14 / e12);
        ratios_14_16.push_back(e16 / e14);
    }
    std::sort(ratios_12_14.begin(), ratios_12_14.end());
    std::sort(ratios_14_16.begin(), ratios_14_16.end());
    const double med_a = 0.5 * (ratios_12_14[4] + ratios_12_14[5]);
    const double med_b = 0.5 * (ratios_14_16[4] + ratios_14_16[5]);
    CHECK(med_a > 0.3);
    CHECK(med_a < 0.7);
    CHECK(med_b > 0.3);
    CHECK(med_b < 0.7);
}

TEST_CASE("fit refuses too-short training") {
    const ModeLayout layout;
    const ChannelSpectrum chan = flat_identity(layout, 64);  // needs 4*6*64 = 1536
    const FrameSet frames = generate_frames(layout, 1024, 1);
    const ReceivedFrameSet rx = transmit(frames, chan, SnrValue::from_db(20.0), 1);
    CHECK_THROWS_AS(fit_equalizer(frames, rx, SnrValue::from_db(20.0)),
                    InsufficientTrainingError);
}

TEST_CASE("fitted estimate tracks the analytic estimate") {
    const ChannelSpectrum chan = normalize_gain(apply_emulator(
        synthesize_link(mixing_spec(42)),
        EmulatorProfile{Placement::TxSide, 0, constant_power_profile(6.0)}));
    const SnrValue snr = SnrValue::from_db(18.0);
    const ModeLayout layout;

    const FrameSet frames = generate_frames(layout, 1 << 14, 5);
    const ReceivedFrameSet rx = transmit(frames, chan, snr, 6);
    const MdlEstimate fitted = estimate_mdl(fit_equalizer(frames, rx, snr), snr);
    const MdlEstimate analytic = estimate_mdl(wiener_equalizer(chan, snr), snr);

    CHECK(std::abs(fitted.uncorrected.db - analytic.uncorrected.db) < 0.35);
    CHECK(std::abs(fitted.corrected.db - analytic.corrected.db) < 0.6);
    CHECK(fitted.failed_bins == 0);
}

TEST_CASE("evm snr estimate is calibrated on unitary channels") {
    const ModeLayout layout;
    LinkSpec spec = mixing_spec(3, 64);
    spec.lantern_mdl_spread_db = 0.0;  // keeps every bin exactly unitary
    const ChannelSpectrum chan = synthesize_link(spec).spectrum();
    const SnrValue snr = SnrValue::from_db(15.0);
    const FrameSet frames = generate_frames(layout, 1 << 13, 21);
    const ReceivedFrameSet rx = transmit(frames, chan, snr, 22);
    const EqualizerSolution eq = wiener_equalizer(chan, snr);
    const SnrValue est = estimate_snr_evm(frames, rx, eq);
    CHECK(est.db() == doctest::Approx(15.0).epsilon(0.04));
}
