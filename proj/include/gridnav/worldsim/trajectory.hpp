#pragma once

#include <vector>

#include "gridnav/worldsim/image.hpp"
#include "gridnav/worldsim/world.hpp"

namespace worldsim {

struct TrajectoryStep {
  Pose pose;
  Image observation;
};

// One recorded drive of one embodiment; the unit of training data.
struct Trajectory {
  Embodiment embodiment;
  float period = 0.25f;  // equals embodiment.control_period
  std::vector<TrajectoryStep> steps;
};

}  // namespace worldsim
