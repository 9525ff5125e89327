#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipcc/error.hpp"
#include "ipcc/gaussian.hpp"
#include "ipcc/json_io.hpp"

namespace ipcc {

using Point = Eigen::Vector2d;

struct Trajectory {
  std::vector<Point> positions;

  std::size_t size() const noexcept { return positions.size(); }
  const Point& operator[](std::size_t k) const { return positions[k]; }
  Point& operator[](std::size_t k) { return positions[k]; }

  bool operator==(const Trajectory&) const = default;
};

/// N trajectories of equal length: one predicted (or observed) future.
using AgentPaths = std::vector<Trajectory>;

inline bool yaw_in_range(double yaw) { return yaw > -std::numbers::pi && yaw <= std::numbers::pi; }

namespace detail {

inline void check_paths(const AgentPaths& paths, std::size_t agents, std::size_t length,
                        const char* what) {
  if (paths.size() != agents) {
    throw Error(ErrorKind::Shape, std::string(what) + ": expected " + std::to_string(agents) +
                                      " agents, got " + std::to_string(paths.size()));
  }
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].size() != length) {
      throw Error(ErrorKind::Shape, std::string(what) + ": agent " + std::to_string(i) +
                                        " has " + std::to_string(paths[i].size()) +
                                        " steps, expected " + std::to_string(length));
    }
    for (const Point& p : paths[i].positions) {
      if (!p.allFinite()) {
        throw Error(ErrorKind::NonFinite, std::string(what) + ": agent " + std::to_string(i) +
                                              " has a non-finite coordinate");
      }
    }
  }
}

}  // namespace detail

/// Ground-truth scene. Agents are identified by index. Validated on
/// construction; immutable afterwards.
class SceneSpec {
 public:
  SceneSpec(AgentPaths past, AgentPaths future, Matrix true_yaw)
      : past_(std::move(past)), future_(std::move(future)), yaw_(std::move(true_yaw)) {
    if (past_.empty()) throw Error(ErrorKind::Shape, "scene needs at least one agent");
    const std::size_t n = past_.size();
    if (past_.front().size() == 0) throw Error(ErrorKind::Shape, "past length must be positive");
    if (future_.empty() || future_.front().size() == 0) {
      throw Error(ErrorKind::Shape, "future length must be positive");
    }
    t_obs_ = past_.front().size();
    t_fut_ = future_.front().size();
    detail::check_paths(past_, n, t_obs_, "past");
    detail::check_paths(future_, n, t_fut_, "future");
    if (yaw_.rows() != static_cast<Index>(n) || yaw_.cols() != static_cast<Index>(t_fut_)) {
      throw Error(ErrorKind::Shape, "yaw must be N x t_fut");
    }
    if (!yaw_.allFinite()) throw Error(ErrorKind::NonFinite, "yaw has a non-finite entry");
    for (Index i = 0; i < yaw_.rows(); ++i) {
      for (Index t = 0; t < yaw_.cols(); ++t) {
        if (!yaw_in_range(yaw_(i, t))) {
          throw Error(ErrorKind::Domain, "yaw outside (-pi, pi] at agent " + std::to_string(i) +
                                             ", step " + std::to_string(t));
        }
      }
    }
  }

  std::size_t agent_count() const noexcept { return past_.size(); }
  std::size_t past_len() const noexcept { return t_obs_; }
  std::size_t future_len() const noexcept { return t_fut_; }
  const AgentPaths& past() const noexcept { return past_; }
  const AgentPaths& future() const noexcept { return future_; }
  const Matrix& true_yaw() const noexcept { return yaw_; }

  const Point& current(std::size_t agent) const { return past_[agent].positions.back(); }

  Matrix current_positions() const {
    Matrix out(agent_count(), 2);
    for (std::size_t i = 0; i < agent_count(); ++i) out.row(i) = current(i).transpose();
    return out;
  }

  /// Future positions at step t as [x1, y1, ..., xN, yN].
  Vector future_stacked(std::size_t t) const {
    Vector out(2 * agent_count());
    for (std::size_t i = 0; i < agent_count(); ++i) out.segment<2>(2 * i) = future_[i][t];
    return out;
  }

  bool operator==(const SceneSpec& other) const {
    return past_ == other.past_ && future_ == other.future_ && yaw_.rows() == other.yaw_.rows() &&
           yaw_.cols() == other.yaw_.cols() && yaw_ == other.yaw_;
  }

 private:
  AgentPaths past_;
  AgentPaths future_;
  Matrix yaw_;
  std::size_t t_obs_ = 0;
  std::size_t t_fut_ = 0;
};

/// M alternative futures for a whole scene, optionally scored.
struct ModeSet {
  std::vector<AgentPaths> modes;
  std::optional<std::vector<double>> scores;

  std::size_t mode_count() const noexcept { return modes.size(); }

  void validate(std::size_t agents, std::size_t steps) const {
    if (modes.empty()) throw Error(ErrorKind::Shape, "mode set is empty");
    for (const AgentPaths& mode : modes) detail::check_paths(mode, agents, steps, "mode");
    if (scores && scores->size() != modes.size()) {
      throw Error(ErrorKind::Shape, "scores length does not match mode count");
    }
    if (scores) {
      for (double s : *scores) {
        if (!std::isfinite(s)) throw Error(ErrorKind::NonFinite, "mode score is not finite");
      }
    }
  }
};

namespace detail {

inline json_io::Json paths_to_json(const AgentPaths& paths) {
  json_io::Json out = json_io::Json::array();
  for (const Trajectory& traj : paths) {
    json_io::Json steps = json_io::Json::array();
    for (const Point& p : traj.positions) steps.push_back({p.x(), p.y()});
    out.push_back(std::move(steps));
  }
  return out;
}

inline AgentPaths paths_from_json(const json_io::Json& v, std::size_t agents, std::size_t length,
                                  const char* what) {
  json_io::array(v, agents, what);
  AgentPaths out(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    const auto& steps = json_io::array(v[i], length, what);
    out[i].positions.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      const auto& xy = json_io::array(steps[t], 2, what);
      out[i][t] = Point(json_io::number(xy[0], what), json_io::number(xy[1], what));
    }
  }
  return out;
}

inline std::size_t positive_count(const json_io::Json& v, const char* what) {
  const long long n = json_io::integer(v, what);
  if (n < 1) throw Error(ErrorKind::Shape, std::string(what) + " must be positive");
  return static_cast<std::size_t>(n);
}

}  // namespace detail

inline json_io::Json scene_to_json(const SceneSpec& scene) {
  json_io::Json yaw = json_io::Json::array();
  for (Index i = 0; i < scene.true_yaw().rows(); ++i) {
    json_io::Json row = json_io::Json::array();
    for (Index t = 0; t < scene.true_yaw().cols(); ++t) row.push_back(scene.true_yaw()(i, t));
    yaw.push_back(std::move(row));
  }
  return json_io::Json{{"n", scene.agent_count()},
                       {"t_obs", scene.past_len()},
                       {"t_fut", scene.future_len()},
                       {"past", detail::paths_to_json(scene.past())},
                       {"future", detail::paths_to_json(scene.future())},
                       {"yaw", std::move(yaw)}};
}

inline SceneSpec scene_from_json(const json_io::Json& doc) {
  const std::size_t n = detail::positive_count(json_io::field(doc, "n"), "n");
  const std::size_t t_obs = detail::positive_count(json_io::field(doc, "t_obs"), "t_obs");
  const std::size_t t_fut = detail::positive_count(json_io::field(doc, "t_fut"), "t_fut");
  AgentPaths past = detail::paths_from_json(json_io::field(doc, "past"), n, t_obs, "past");
  AgentPaths future = detail::paths_from_json(json_io::field(doc, "future"), n, t_fut, "future");
  const auto& yaw_json = json_io::array(json_io::field(doc, "yaw"), n, "yaw");
  Matrix yaw(static_cast<Index>(n), static_cast<Index>(t_fut));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = json_io::array(yaw_json[i], t_fut, "yaw");
    for (std::size_t t = 0; t < t_fut; ++t) yaw(i, t) = json_io::number(row[t], "yaw");
  }
  return SceneSpec(std::move(past), std::move(future), std::move(yaw));
}

inline SceneSpec load_scene(const std::filesystem::path& path) {
  return scene_from_json(json_io::read_file(path));
}

inline void save_scene(const SceneSpec& scene, const std::filesystem::path& path) {
  json_io::write_file(path, scene_to_json(scene));
}

inline json_io::Json modes_to_json(const ModeSet& set) {
  json_io::Json modes = json_io::Json::array();
  for (const AgentPaths& m : set.modes) modes.push_back(detail::paths_to_json(m));
  json_io::Json doc{{"modes", std::move(modes)}};
  if (set.scores) doc["scores"] = *set.scores;
  return doc;
}

/// Parses a ModeSet; shapes are taken from the first mode and checked for
/// consistency, and later against a scene by the caller.
inline ModeSet modes_from_json(const json_io::Json& doc) {
  const auto& modes = json_io::field(doc, "modes");
  if (!modes.is_array() || modes.empty()) throw Error(ErrorKind::Shape, "modes must be a nonempty array");
  const auto& first = modes[0];
  if (!first.is_array() || first.empty() || !first[0].is_array() || first[0].empty()) {
    throw Error(ErrorKind::Shape, "modes must be M x N x T x 2");
  }
  const std::size_t agents = first.size();
  const std::size_t steps = first[0].size();
  ModeSet set;
  for (const auto& m : modes) set.modes.push_back(detail::paths_from_json(m, agents, steps, "mode"));
  if (auto it = doc.find("scores"); it != doc.end()) {
    json_io::array(*it, set.modes.size(), "scores");
    std::vector<double> scores;
    for (const auto& s : *it) scores.push_back(json_io::number(s, "score"));
    set.scores = std::move(scores);
  }
  set.validate(agents, steps);
  return set;
}

inline ModeSet load_modes(const std::filesystem::path& path) {
  return modes_from_json(json_io::read_file(path));
}

inline void save_modes(const ModeSet& set, const std::filesystem::path& path) {
  json_io::write_file(path, modes_to_json(set));
}

}  // namespace ipcc
