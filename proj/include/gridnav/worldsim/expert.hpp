#pragma once

#include "gridnav/worldsim/trajectory.hpp"

namespace worldsim {

// One planned leg between random waypoints: recorded so efficiency against
// the grid-shortest path can be audited.
struct ExpertSegment {
  int begin_step = 0;
  int end_step = 0;            // step at which the goal waypoint was reached
  float planned_path_len = 0;  // BFS path length in meters
};

struct ExpertResult {
  Trajectory trajectory;
  int collisions = 0;
  std::vector<ExpertSegment> segments;  // completed legs only
};

// Scripted data collector: plans grid-shortest paths between random free
// waypoints and tracks them with a proportional controller, optionally
// corrupted by uniform action noise so the corpus contains suboptimal, weavy
// motion. Records (pose, observation) every control period.
ExpertResult expert_collect(const World& w, const Embodiment& emb, uint64_t seed, int n_steps,
                            float noise_level, int img_h, int img_w);

}  // namespace worldsim
