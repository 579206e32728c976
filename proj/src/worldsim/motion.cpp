#include "gridnav/worldsim/motion.hpp"

#include <algorithm>
#include <cmath>

namespace worldsim {

StepResult step_dynamics(const World& w, const Pose& pose, const Embodiment& emb, Command cmd) {
  cmd.v = std::clamp(cmd.v, -emb.top_speed, emb.top_speed);
  cmd.omega = std::clamp(cmd.omega, -emb.turn_rate_max, emb.turn_rate_max);
  const int substeps = 8;
  const float dt = emb.control_period / substeps;
  float x = pose.x, y = pose.y, th = pose.theta;
  for (int k = 0; k < substeps; ++k) {
    x += cmd.v * std::cos(th) * dt;
    y += cmd.v * std::sin(th) * dt;
    th = wrap_angle(th + cmd.omega * dt);
    if (w.blocked_at(x, y)) return {pose, true};
  }
  return {Pose{x, y, th}, false};
}

}  // namespace worldsim
