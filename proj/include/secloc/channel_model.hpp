#ifndef SECLOC_CHANNEL_MODEL_HPP
#define SECLOC_CHANNEL_MODEL_HPP

// Log-distance path loss: p = p0 - 10 n log10(d) + eta, eta ~ N(0, sigma^2).
// Everything in this header is a pure function; powers are dBm, distances m.

#include <cmath>
#include <numbers>
#include <string>

#include "secloc/errors.hpp"

namespace secloc {

struct PathLossParams {
  double p0 = -10.0;    // transmit power, dBm
  double n = 4.0;       // path-loss exponent
  double sigma = 2.0;   // measurement noise std-dev, dB

  void validate() const {
    if (!std::isfinite(p0) || !std::isfinite(n) || !std::isfinite(sigma))
      throw DomainError("path-loss parameters must be finite");
    if (n <= 0.0) throw DomainError("path-loss exponent must be positive");
    if (sigma < 0.0) throw DomainError("noise sigma must be non-negative");
  }
};

struct DistanceStats {
  double mean_distance = 0.0;
  double var_d = 0.0;
  double var_d2 = 0.0;
};

enum class PerturbationDirection { positive, negative };

namespace detail {

inline constexpr double kLn10 = std::numbers::ln10;

// 100 / ln^2(10) ~= 18.8611; the printed 18.86 is a truncation of this.
inline constexpr double kVarDConstant = 100.0 / (kLn10 * kLn10);
// 25 / ln^2(10) ~= 4.7153.
inline constexpr double kVarD2Constant = 25.0 / (kLn10 * kLn10);

inline void require_positive_distance(double d, const char* what) {
  if (!std::isfinite(d) || d <= 0.0)
    throw DomainError(std::string(what) + " must be positive and finite");
}

}  // namespace detail

/// Noise-free received power at `distance` metres.
inline double mean_rssi(const PathLossParams& params, double distance) {
  detail::require_positive_distance(distance, "distance");
  return params.p0 - 10.0 * params.n * std::log10(distance);
}

/// Inverts the path-loss law: 10^((p0 - rssi) / (10 n)).
inline double distance_from_rssi(const PathLossParams& params, double rssi) {
  if (!std::isfinite(rssi)) throw DomainError("rssi must be finite");
  return std::pow(10.0, (params.p0 - rssi) / (10.0 * params.n));
}

/// c * (1 - 10^(-x / 10n)) with c = 10^(p0 / 10n). Shifting the received
/// power by +x shrinks the range estimate by g(x) * 10^(-rssi / 10n).
inline double perturbation_g(const PathLossParams& params, double x) {
  if (!std::isfinite(x)) throw DomainError("perturbation must be finite");
  const double c = std::pow(10.0, params.p0 / (10.0 * params.n));
  // -expm1 keeps g(x) + g(-x) <= 0 exact in sign for tiny |x|.
  return -c * std::expm1(-x * detail::kLn10 / (10.0 * params.n));
}

/// Magnitude of the range change caused by a received-power deviation of
/// `delta_p` dB. `positive` means the power went up (range shrinks, the
/// delta-d-minus quantity); `negative` means it went down (range grows).
inline double distance_perturbation(const PathLossParams& params, double rssi,
                                    double delta_p,
                                    PerturbationDirection direction) {
  if (!std::isfinite(rssi)) throw DomainError("rssi must be finite");
  if (!(delta_p >= 0.0)) throw DomainError("delta_p must be non-negative");
  const double scale = std::pow(10.0, -rssi / (10.0 * params.n));
  if (direction == PerturbationDirection::positive)
    return perturbation_g(params, delta_p) * scale;
  return -perturbation_g(params, -delta_p) * scale;
}

/// Density of the single-packet range estimate when the true range is
/// `true_distance`. Log-normal in gamma; undefined for sigma == 0.
inline double distance_pdf(const PathLossParams& params, double true_distance,
                           double gamma) {
  detail::require_positive_distance(true_distance, "true distance");
  detail::require_positive_distance(gamma, "gamma");
  if (!(params.sigma > 0.0))
    throw DomainError("distance pdf is degenerate for sigma = 0");
  const double ln10 = detail::kLn10;
  const double log_ratio = std::log(gamma / true_distance);
  const double lead = 5.0 * params.n / (gamma * params.sigma * ln10) *
                      std::sqrt(2.0 / std::numbers::pi);
  return lead * std::exp(-50.0 * params.n * params.n * log_ratio * log_ratio /
                         (params.sigma * params.sigma * ln10 * ln10));
}

/// Var(d) for the range estimate with median `mean_distance`.
inline double distance_variance(const PathLossParams& params,
                                double mean_distance) {
  detail::require_positive_distance(mean_distance, "mean distance");
  const double s = params.sigma * params.sigma /
                   (detail::kVarDConstant * params.n * params.n);
  return mean_distance * mean_distance * std::exp(s) * std::expm1(s);
}

/// Var(d^2); inverse of this is the WLS weight.
inline double distance_sq_variance(const PathLossParams& params,
                                   double mean_distance) {
  detail::require_positive_distance(mean_distance, "mean distance");
  const double s = params.sigma * params.sigma /
                   (detail::kVarD2Constant * params.n * params.n);
  const double d2 = mean_distance * mean_distance;
  return d2 * d2 * std::exp(s) * std::expm1(s);
}

inline DistanceStats distance_stats(const PathLossParams& params,
                                    double mean_distance) {
  return {mean_distance, distance_variance(params, mean_distance),
          distance_sq_variance(params, mean_distance)};
}

/// Closed-form noise std-dev whose range variance equals `sample_variance`
/// at `mean_distance`; params.sigma is ignored, params.n is used.
inline double estimate_noise_sigma(const PathLossParams& params,
                                   double sample_variance,
                                   double mean_distance) {
  if (!(sample_variance >= 0.0) || !std::isfinite(sample_variance))
    throw DomainError("sample variance must be non-negative and finite");
  detail::require_positive_distance(mean_distance, "mean distance");
  const double ratio = sample_variance / (mean_distance * mean_distance);
  // ln(0.5 + 0.5 sqrt(1 + 4r)) written via log1p so small ratios keep
  // their relative precision.
  const double root = std::sqrt(1.0 + 4.0 * ratio);
  const double x = std::log1p(2.0 * ratio / (1.0 + root));
  return std::sqrt(detail::kVarDConstant * params.n * params.n * x);
}

}  // namespace secloc

#endif  // SECLOC_CHANNEL_MODEL_HPP
