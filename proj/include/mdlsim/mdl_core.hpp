#pragma once

#include <cmath>
#include <type_traits>

#include "mdlsim/types.hpp"

namespace mdlsim {

namespace detail {

template <typename Scalar>
void require_positive_finite(Scalar v, const char* what) {
    static_assert(std::is_floating_point_v<Scalar>);
    if (!(v > Scalar(0)) || !std::isfinite(v))
        throw std::domain_error(std::string(what) + " must be positive and finite");
}

}  // namespace detail

/// Peak-to-peak MDL of a power-eigenvalue profile: 10·log10(max/min).
inline MdlValue mdl_db(const EigenvalueProfile& profile) {
    return MdlValue{10.0 * std::log10(profile.largest() / profile.smallest())};
}

/// Power eigenvalue of the inverted equalizer response that an MMSE-style
/// equalizer fitted at `snr_linear` exposes for a channel eigenvalue
/// `lambda_sq`:
///
///     m(x) = 1/(SNR^2 x) + 2/SNR + x,  x = lambda_sq.
///
/// The map is symmetric under x <-> 1/(SNR^2 x) and attains its minimum
/// 4/SNR at x = 1/SNR, so the eigenvalue spread (and with it the MDL) is
/// compressed at finite SNR.
template <typename Scalar>
Scalar mmse_forward(Scalar lambda_sq, Scalar snr_linear) {
    detail::require_positive_finite(lambda_sq, "lambda_sq");
    detail::require_positive_finite(snr_linear, "snr_linear");
    return Scalar(1) / (snr_linear * snr_linear * lambda_sq) +
           Scalar(2) / snr_linear + lambda_sq;
}

inline double mmse_forward(double lambda_sq, SnrValue snr) {
    return mmse_forward(lambda_sq, snr.linear());
}

/// Smallest forward-map output at a given SNR; inputs below this have no
/// real preimage.
template <typename Scalar>
Scalar correction_floor(Scalar snr_linear) {
    detail::require_positive_finite(snr_linear, "snr_linear");
    return Scalar(4) / snr_linear;
}

/// Inverts mmse_forward on its upper branch, returning the preimage
/// >= 1/SNR. Solving m = 1/(SNR^2 x) + 2/SNR + x for x gives
///
///     x = ( m - 2/SNR + sqrt(m·(m - 4/SNR)) ) / 2,
///
/// where the discriminant is kept in the factored form m·(m - 4/SNR); the
/// expanded form (SNR^2 m - 2 SNR)^2 - 4 SNR^2 cancels catastrophically near
/// the floor. Inputs below 4/SNR throw NoiseDominatedBin carrying the
/// deficit.
template <typename Scalar>
Scalar correct_eigenvalue(Scalar lambda_sq_mmse, Scalar snr_linear) {
    detail::require_positive_finite(lambda_sq_mmse, "lambda_sq_mmse");
    detail::require_positive_finite(snr_linear, "snr_linear");
    const Scalar floor_gap = lambda_sq_mmse - Scalar(4) / snr_linear;
    if (floor_gap < Scalar(0)) throw NoiseDominatedBin(static_cast<double>(-floor_gap));
    return (lambda_sq_mmse - Scalar(2) / snr_linear +
            std::sqrt(lambda_sq_mmse * floor_gap)) / Scalar(2);
}

inline double correct_eigenvalue(double lambda_sq_mmse, SnrValue snr) {
    return correct_eigenvalue(lambda_sq_mmse, snr.linear());
}

/// Applies correct_eigenvalue to every entry of a profile. Entries below the
/// floor are handled per policy: Strict rethrows, ClampToFloor substitutes
/// 1/SNR (the zero-discriminant preimage), SkipBin drops them (throwing if
/// nothing survives). `adjusted_count`, when given, receives the number of
/// clamped or dropped entries.
inline EigenvalueProfile correct_profile(const EigenvalueProfile& profile, SnrValue snr,
                                         ClampPolicy policy = ClampPolicy::ClampToFloor,
                                         int* adjusted_count = nullptr) {
    const double s = snr.linear();
    VectorR out(profile.size());
    Eigen::Index n = 0;
    int adjusted = 0;
    double worst_deficit = 0.0;
    for (Eigen::Index i = 0; i < profile.size(); ++i) {
        const double m = profile.values()(i);
        const double floor_gap = m - 4.0 / s;
        if (floor_gap >= 0.0) {
            out(n++) = (m - 2.0 / s + std::sqrt(m * floor_gap)) / 2.0;
            continue;
        }
        ++adjusted;
        switch (policy) {
            case ClampPolicy::Strict:
                throw NoiseDominatedBin(-floor_gap, profile.bin_index());
            case ClampPolicy::ClampToFloor:
                out(n++) = 1.0 / s;
                break;
            case ClampPolicy::SkipBin:
                worst_deficit = std::max(worst_deficit, -floor_gap);
                break;
        }
    }
    if (adjusted_count) *adjusted_count = adjusted;
    if (n == 0) throw NoiseDominatedBin(worst_deficit, profile.bin_index());
    return EigenvalueProfile(out.head(n).eval(), profile.bin_index());
}

/// OSNR in a 12.5 GHz (0.1 nm) reference bandwidth to per-symbol SNR:
/// SNR_dB = OSNR_dB + 10·log10(12.5 GHz / symbol_rate).
inline SnrValue osnr_to_snr(double osnr_db, double symbol_rate_hz) {
    if (!(symbol_rate_hz > 0.0) || !std::isfinite(symbol_rate_hz))
        throw std::domain_error("symbol rate must be positive and finite");
    return SnrValue::from_db(osnr_db + 10.0 * std::log10(12.5e9 / symbol_rate_hz));
}

/// Signed estimation error in dB; positive means underestimation.
inline double estimation_error(MdlValue reference, MdlValue estimated) {
    return reference.db - estimated.db;
}

}  // namespace mdlsim
