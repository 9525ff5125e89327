#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "ipcc/error.hpp"
#include "ipcc/scene.hpp"

namespace ipcc {

struct MetricResult {
  double value = 0.0;  ///< meters
  std::size_t argmin_mode = 0;
};

namespace detail {

inline void check_modes(const ModeSet& pred, const AgentPaths& gt) {
  if (gt.empty() || gt.front().size() == 0) throw Error(ErrorKind::Shape, "ground truth is empty");
  pred.validate(gt.size(), gt.front().size());
  for (const Trajectory& traj : gt) {
    if (traj.size() != gt.front().size()) throw Error(ErrorKind::Shape, "ragged ground truth");
  }
}

/// Minimum over modes of `per_mode`; ties go to the lowest index.
template <typename PerMode>
MetricResult min_over_modes(const ModeSet& pred, PerMode&& per_mode) {
  MetricResult best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t m = 0; m < pred.mode_count(); ++m) {
    const double v = per_mode(pred.modes[m]);
    if (v < best.value) best = {v, m};
  }
  return best;
}

}  // namespace detail

/// Joint ADE: one mode index shared by every agent, error averaged over
/// agents and steps.
inline MetricResult min_joint_ade(const ModeSet& pred, const AgentPaths& gt) {
  detail::check_modes(pred, gt);
  const double norm = static_cast<double>(gt.size() * gt.front().size());
  return detail::min_over_modes(pred, [&](const AgentPaths& mode) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
      for (std::size_t t = 0; t < gt[i].size(); ++t) sum += (mode[i][t] - gt[i][t]).norm();
    return sum / norm;
  });
}

/// Joint FDE: final-step error averaged over agents, shared mode index.
inline MetricResult min_joint_fde(const ModeSet& pred, const AgentPaths& gt) {
  detail::check_modes(pred, gt);
  const std::size_t last = gt.front().size() - 1;
  return detail::min_over_modes(pred, [&](const AgentPaths& mode) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) sum += (mode[i][last] - gt[i][last]).norm();
    return sum / static_cast<double>(gt.size());
  });
}

}  // namespace ipcc
