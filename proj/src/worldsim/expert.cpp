#include "gridnav/worldsim/expert.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

#include "gridnav/numcore/rng.hpp"
#include "gridnav/worldsim/motion.hpp"
#include "gridnav/worldsim/sensor.hpp"

namespace worldsim {

namespace {

// Free distance straight ahead, used to cap speed so a clean expert never
// drives into a wall within one control period.
float clearance_ahead(const World& w, const Pose& p) {
  return cast_ray(w, p.x, p.y, p.theta).distance;
}

}  // namespace

ExpertResult expert_collect(const World& w, const Embodiment& emb, uint64_t seed, int n_steps,
                            float noise_level, int img_h, int img_w) {
  if (w.spawn_points.empty()) throw std::invalid_argument("expert_collect: world has no free cells");
  numcore::Rng rng(seed);
  numcore::Rng spawn_rng = rng.split(1);
  numcore::Rng goal_rng = rng.split(2);
  numcore::Rng noise_rng = rng.split(3);

  Pose pose = w.spawn_points[spawn_rng.uniform_int(0, static_cast<int>(w.spawn_points.size()) - 1)];
  pose.theta = wrap_angle(static_cast<float>(spawn_rng.uniform() * 2.0 * M_PI));

  ExpertResult out;
  out.trajectory.embodiment = emb;
  out.trajectory.period = emb.control_period;
  out.trajectory.steps.reserve(n_steps);

  std::deque<Pose> waypoints;  // cell centers of the current planned path
  ExpertSegment seg;
  bool seg_open = false;
  auto replan = [&](int step) {
    if (seg_open) {
      seg.end_step = step;
      out.segments.push_back(seg);
    }
    waypoints.clear();
    std::pair<int, int> cur{w.cell_row(pose.y), w.cell_col(pose.x)};
    for (int tries = 0; tries < 64 && waypoints.empty(); ++tries) {
      const Pose& goal =
          w.spawn_points[goal_rng.uniform_int(0, static_cast<int>(w.spawn_points.size()) - 1)];
      std::pair<int, int> gc{w.cell_row(goal.y), w.cell_col(goal.x)};
      if (gc == cur) continue;
      auto cells = bfs_path(w, cur, gc);
      if (cells.size() < 2) continue;  // unreachable; resample
      for (size_t i = 1; i < cells.size(); ++i)
        waypoints.push_back(w.cell_center(cells[i].first, cells[i].second));
      seg.begin_step = step;
      seg.planned_path_len = static_cast<float>(cells.size() - 1) * w.cell_size;
      seg_open = true;
    }
    if (waypoints.empty())
      throw std::runtime_error("expert_collect: no reachable waypoint found");
  };

  const float reach_r = 0.45f * w.cell_size;
  const float kw = 2.5f;
  for (int step = 0; step < n_steps; ++step) {
    out.trajectory.steps.push_back({pose, render_observation(w, pose, emb, img_h, img_w)});

    while (!waypoints.empty()) {
      float d0 = std::hypot(waypoints.front().x - pose.x, waypoints.front().y - pose.y);
      if (d0 < reach_r) {
        waypoints.pop_front();
        continue;
      }
      // already closer to the next waypoint: the current one was passed
      if (waypoints.size() >= 2 &&
          std::hypot(waypoints[1].x - pose.x, waypoints[1].y - pose.y) < d0) {
        waypoints.pop_front();
        continue;
      }
      break;
    }
    if (waypoints.empty()) replan(step);

    // head for the farthest of the next two cells that is still in line of
    // sight of the current bearing, which smooths the zig-zag of grid paths
    Pose target = waypoints.front();
    if (waypoints.size() >= 2) {
      float d0 = std::hypot(waypoints[0].x - pose.x, waypoints[0].y - pose.y);
      if (d0 < 1.1f * w.cell_size) target = waypoints[1];
    }

    float bearing = wrap_angle(std::atan2(target.y - pose.y, target.x - pose.x) - pose.theta);
    Command cmd;
    cmd.omega = std::clamp(kw * bearing, -emb.turn_rate_max, emb.turn_rate_max);
    float align = std::cos(bearing);
    float v_des = emb.top_speed * std::max(0.0f, align);
    // never outrun the free space directly ahead
    float free_ahead = clearance_ahead(w, pose) - 0.30f * w.cell_size;
    float v_safe = std::max(0.0f, 0.8f * free_ahead / emb.control_period);
    cmd.v = std::min(v_des, v_safe);

    if (noise_level > 0.0f) {
      cmd.v += noise_level * emb.top_speed * static_cast<float>(noise_rng.uniform() * 2.0 - 1.0);
      cmd.omega +=
          noise_level * emb.turn_rate_max * static_cast<float>(noise_rng.uniform() * 2.0 - 1.0);
    }

    StepResult res = step_dynamics(w, pose, emb, cmd);
    if (res.collided) {
      ++out.collisions;
      // turn in place to recover
      res = step_dynamics(w, pose, emb, Command{0.0f, emb.turn_rate_max * 0.5f});
    }
    pose = res.pose;
  }
  return out;
}

}  // namespace worldsim
