#pragma once

#include "gridnav/worldsim/world.hpp"

namespace worldsim {

struct Command {
  float v = 0.0f;      // m/s, forward
  float omega = 0.0f;  // rad/s, counter-clockwise
};

struct StepResult {
  Pose pose;
  bool collided = false;
};

// Unicycle integration over one control period, with the command clamped to
// the embodiment's limits. Collision anywhere along the swept motion leaves
// the pose unchanged and sets the flag.
StepResult step_dynamics(const World& w, const Pose& pose, const Embodiment& emb, Command cmd);

}  // namespace worldsim
