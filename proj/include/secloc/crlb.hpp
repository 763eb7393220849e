#ifndef SECLOC_CRLB_HPP
#define SECLOC_CRLB_HPP

// Fisher information for the target position given known malicious identity,
// known sigma and (uncoordinated) known sigma_att. The resulting bound is a
// benchmark; the estimators in this library are biased.

#include <cmath>
#include <cstddef>
#include <numbers>

#include "secloc/attack_sim.hpp"
#include "secloc/channel_model.hpp"
#include "secloc/errors.hpp"

namespace secloc {

/// Symmetric 2x2 Fisher information matrix.
struct Fim {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double det() const { return xx * yy - xy * xy; }
  double trace() const { return xx + yy; }

  Fim operator*(double s) const { return {xx * s, xy * s, yy * s}; }
};

namespace detail {

// Adds w * d d^T / ||d||^4 for d = anchor - at.
inline void accumulate(Fim& f, const Point& anchor, const Point& at, double w) {
  const Point d = anchor - at;
  const double r2 = d.squaredNorm();
  if (!(r2 > 0.0)) throw DomainError("anchor coincides with evaluation point");
  const double s = w / (r2 * r2);
  f.xx += s * d.x() * d.x();
  f.xy += s * d.x() * d.y();
  f.yy += s * d.y() * d.y();
}

inline double fim_prefactor(const PathLossParams& params, std::size_t packets) {
  params.validate();
  if (packets < 1) throw DomainError("packets must be >= 1");
  const double ln10 = std::numbers::ln10;
  return 100.0 * static_cast<double>(packets) * params.n * params.n / (ln10 * ln10);
}

}  // namespace detail

/// Uncoordinated attack: malicious rows carry variance sigma^2 + sigma_att^2.
inline Fim fim_uncoordinated(const Topology& topo, const PathLossParams& params,
                             double sigma_att, std::size_t packets) {
  const double pre = detail::fim_prefactor(params, packets);
  if (!(params.sigma > 0.0)) throw DomainError("FIM needs sigma > 0");
  if (!(sigma_att >= 0.0)) throw DomainError("sigma_att must be non-negative");
  const double w_honest = 1.0 / (params.sigma * params.sigma);
  const double w_bad = 1.0 / (params.sigma * params.sigma + sigma_att * sigma_att);
  Fim f;
  for (std::size_t i = 0; i < topo.size(); ++i)
    detail::accumulate(f, topo.anchors[i], topo.target,
                       topo.is_malicious(i) ? w_bad : w_honest);
  return f * pre;
}

/// No attack: every anchor weighted 1 / sigma^2.
inline Fim fim_no_attack(const Topology& topo, const PathLossParams& params,
                         std::size_t packets) {
  Topology clean = topo;
  clean.malicious.clear();
  return fim_uncoordinated(clean, params, 0.0, packets);
}

/// Coordinated attack: malicious terms are evaluated at t_att, which moves
/// rigidly with the target (t_att = t + offset).
inline Fim fim_coordinated(const Topology& topo, const PathLossParams& params,
                           const Point& t_att, std::size_t packets) {
  const double pre = detail::fim_prefactor(params, packets);
  if (!(params.sigma > 0.0)) throw DomainError("FIM needs sigma > 0");
  Fim f;
  for (std::size_t i = 0; i < topo.size(); ++i)
    detail::accumulate(f, topo.anchors[i],
                       topo.is_malicious(i) ? t_att : topo.target, 1.0);
  return f * (pre / (params.sigma * params.sigma));
}

/// sqrt(trace(F^-1)) by closed-form 2x2 inversion.
inline double crlb_bound(const Fim& f) {
  const double det = f.det();
  if (!(det > 1e-15) || !std::isfinite(det))
    throw DomainError("Fisher information is singular");
  return std::sqrt(f.trace() / det);
}

/// Bound for the attack described by `attack`.
inline double crlb_for(const Topology& topo, const PathLossParams& params,
                       const AttackSpec& attack, std::size_t packets) {
  switch (attack.kind) {
    case AttackKind::none:
      return crlb_bound(fim_no_attack(topo, params, packets));
    case AttackKind::uncoordinated:
      return crlb_bound(fim_uncoordinated(topo, params, attack.sigma_att.value_or(0.0), packets));
    case AttackKind::coordinated:
      return crlb_bound(fim_coordinated(topo, params, attack.t_att.value(), packets));
  }
  throw ConfigError("unknown attack kind");
}

}  // namespace secloc

#endif  // SECLOC_CRLB_HPP
