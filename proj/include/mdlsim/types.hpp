#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace mdlsim {

using Real = double;
using Complex = std::complex<Real>;
using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;
using VectorR = Eigen::VectorXd;

// --------------------------------------------------------------------------
// Errors

struct InvalidProfileError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidChannelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InfeasibleProfileError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientTrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an equalizer-side eigenvalue falls below the 4/SNR floor of
/// the forward map and therefore has no real preimage. Carries the deficit
/// 4/SNR - lambda_sq_mmse so callers can decide a clamping policy.
class NoiseDominatedBin : public std::domain_error {
public:
    explicit NoiseDominatedBin(double deficit, std::optional<int> bin = {})
        : std::domain_error("eigenvalue below the 4/SNR noise floor (deficit " +
                            std::to_string(deficit) + ")"),
          deficit_(deficit),
          bin_(bin) {}

    double deficit() const noexcept { return deficit_; }
    std::optional<int> bin() const noexcept { return bin_; }

private:
    double deficit_;
    std::optional<int> bin_;
};

// --------------------------------------------------------------------------
// Scalar domain types

/// Signal-to-noise ratio kept in linear units; dB only at I/O boundaries.
class SnrValue {
public:
    static SnrValue from_linear(double linear) {
        if (!(linear > 0.0) || !std::isfinite(linear))
            throw std::domain_error("SNR must be a positive finite linear ratio");
        return SnrValue(linear);
    }
    static SnrValue from_db(double db) { return from_linear(std::pow(10.0, db / 10.0)); }

    double linear() const noexcept { return linear_; }
    double db() const noexcept { return 10.0 * std::log10(linear_); }

private:
    explicit SnrValue(double linear) noexcept : linear_(linear) {}
    double linear_;
};

/// Peak-to-peak mode-dependent loss in dB (>= 0).
struct MdlValue {
    double db = 0.0;
};

/// Descending, strictly positive power eigenvalues of H·H^H for one
/// frequency bin (or an aggregate), optionally tagged with the bin index.
class EigenvalueProfile {
public:
    explicit EigenvalueProfile(VectorR values, std::optional<int> bin_index = {})
        : values_(std::move(values)), bin_index_(bin_index) {
        if (values_.size() == 0)
            throw InvalidProfileError("eigenvalue profile must be non-empty");
        for (Eigen::Index i = 0; i < values_.size(); ++i) {
            if (!(values_(i) > 0.0) || !std::isfinite(values_(i)))
                throw InvalidProfileError("eigenvalues must be positive and finite");
        }
        std::sort(values_.data(), values_.data() + values_.size(), std::greater<double>());
    }

    EigenvalueProfile(std::initializer_list<double> values, std::optional<int> bin_index = {})
        : EigenvalueProfile(
              Eigen::Map<const VectorR>(values.begin(),
                                        static_cast<Eigen::Index>(values.size()))
                  .eval(),
              bin_index) {}

    const VectorR& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double largest() const noexcept { return values_(0); }
    double smallest() const noexcept { return values_(values_.size() - 1); }
    std::optional<int> bin_index() const noexcept { return bin_index_; }

private:
    VectorR values_;
    std::optional<int> bin_index_;
};

// --------------------------------------------------------------------------
// Policies

/// What to do with eigenvalues that fall below the correction floor.
enum class ClampPolicy {
    Strict,        ///< propagate NoiseDominatedBin
    ClampToFloor,  ///< replace with 1/SNR, the zero-discriminant preimage
    SkipBin,       ///< drop the offending values (callers skip whole bins)
};

/// How per-bin eigenvalue profiles collapse into one MDL number.
enum class AggregationRule {
    RankAverage,   ///< average each rank across bins, then max/min ratio
    PerBinMeanMdl, ///< mean of the per-bin MDL values
    WorstBin,      ///< max of the per-bin MDL values
};

inline const char* to_string(ClampPolicy p) {
    switch (p) {
        case ClampPolicy::Strict: return "strict";
        case ClampPolicy::ClampToFloor: return "clamp-to-floor";
        case ClampPolicy::SkipBin: return "skip-bin";
    }
    return "?";
}

inline const char* to_string(AggregationRule r) {
    switch (r) {
        case AggregationRule::RankAverage: return "rank-average";
        case AggregationRule::PerBinMeanMdl: return "per-bin-mean-mdl";
        case AggregationRule::WorstBin: return "worst-bin";
    }
    return "?";
}

inline ClampPolicy clamp_policy_from_string(const std::string& s) {
    if (s == "strict") return ClampPolicy::Strict;
    if (s == "clamp-to-floor") return ClampPolicy::ClampToFloor;
    if (s == "skip-bin") return ClampPolicy::SkipBin;
    throw ConfigError("unknown clamp policy: " + s);
}

inline AggregationRule aggregation_from_string(const std::string& s) {
    if (s == "rank-average") return AggregationRule::RankAverage;
    if (s == "per-bin-mean-mdl") return AggregationRule::PerBinMeanMdl;
    if (s == "worst-bin") return AggregationRule::WorstBin;
    throw ConfigError("unknown aggregation rule: " + s);
}

}  // namespace mdlsim
