#pragma once

#include "gridnav/worldsim/world.hpp"

namespace worldsim {

struct RayHit {
  float distance = 0.0f;
  int cell_r = -1;
  int cell_c = -1;
  bool vertical_face = false;  // hit an east/west cell face
};

// Grid DDA from (x,y) along `angle`; the boundary is always blocked, so a
// hit is guaranteed.
RayHit cast_ray(const World& w, float x, float y, float angle);

// Egocentric view by per-column raycasting inside the embodiment's FOV.
// Nearer walls fill more rows, scaled by camera_height_scale; floor and
// ceiling fill the rest with a depth-graded tint. Pure in all arguments.
Image render_observation(const World& w, const Pose& pose, const Embodiment& emb, int img_h,
                         int img_w);

}  // namespace worldsim
