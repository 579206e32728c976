#include "gridnav/worldsim/sensor.hpp"

#include <cmath>
#include <stdexcept>

namespace worldsim {

RayHit cast_ray(const World& w, float x, float y, float angle) {
  // Amanatides-Woo traversal in cell units.
  double cs = w.cell_size;
  double px = x / cs, py = y / cs;
  double dx = std::cos(angle), dy = std::sin(angle);
  int c = static_cast<int>(px), r = static_cast<int>(py);
  int step_c = dx > 0 ? 1 : -1;
  int step_r = dy > 0 ? 1 : -1;
  double tdx = dx != 0.0 ? std::fabs(1.0 / dx) : 1e30;
  double tdy = dy != 0.0 ? std::fabs(1.0 / dy) : 1e30;
  double tmax_x = dx != 0.0 ? ((dx > 0 ? (c + 1 - px) : (px - c)) * tdx) : 1e30;
  double tmax_y = dy != 0.0 ? ((dy > 0 ? (r + 1 - py) : (py - r)) * tdy) : 1e30;
  double t = 0.0;
  bool vertical = true;
  for (int iter = 0; iter < 4 * (w.width + w.height); ++iter) {
    if (tmax_x < tmax_y) {
      c += step_c;
      t = tmax_x;
      tmax_x += tdx;
      vertical = true;
    } else {
      r += step_r;
      t = tmax_y;
      tmax_y += tdy;
      vertical = false;
    }
    if (w.blocked(r, c)) {
      RayHit hit;
      hit.distance = static_cast<float>(t * cs);
      hit.cell_r = r;
      hit.cell_c = c;
      hit.vertical_face = vertical;
      return hit;
    }
  }
  // unreachable with a sealed boundary
  RayHit hit;
  hit.distance = static_cast<float>((w.width + w.height) * cs);
  return hit;
}

Image render_observation(const World& w, const Pose& pose, const Embodiment& emb, int img_h,
                         int img_w) {
  if (w.blocked_at(pose.x, pose.y))
    throw std::invalid_argument("render_observation: pose (" + std::to_string(pose.x) + "," +
                                std::to_string(pose.y) + ") lies in a blocked cell");
  Image img(img_h, img_w);
  const float fov = emb.camera_fov;
  const float col_step = fov / static_cast<float>(img_w);
  for (int j = 0; j < img_w; ++j) {
    float rel = fov * 0.5f - (j + 0.5f) * col_step;
    RayHit hit = cast_ray(w, pose.x, pose.y, pose.theta + rel);
    float perp = hit.distance * std::cos(rel);  // remove fisheye
    perp = std::max(perp, 0.05f);
    int wall_px = static_cast<int>(emb.camera_height_scale * img_h * w.cell_size / perp);
    wall_px = std::min(wall_px, img_h);
    int top = (img_h - wall_px) / 2;
    int bot = top + wall_px;
    float shade = 1.0f / (1.0f + 0.22f * perp);
    if (!hit.vertical_face) shade *= 0.82f;
    const auto& pal = w.palette[w.color_idx[hit.cell_r * w.width + hit.cell_c]];
    for (int i = 0; i < img_h; ++i) {
      float rgb[3];
      if (i < top) {  // ceiling, darker toward the top
        float f = 0.10f + 0.10f * static_cast<float>(i) / std::max(1, img_h / 2);
        rgb[0] = f;
        rgb[1] = f;
        rgb[2] = f * 1.25f;
      } else if (i >= bot) {  // floor, brighter toward the camera
        float f = 0.22f + 0.30f * static_cast<float>(i - img_h / 2) / std::max(1, img_h / 2);
        rgb[0] = f;
        rgb[1] = f * 0.95f;
        rgb[2] = f * 0.88f;
      } else {
        rgb[0] = pal[0] * shade;
        rgb[1] = pal[1] * shade;
        rgb[2] = pal[2] * shade;
      }
      for (int ch = 0; ch < 3; ++ch) {
        float v = std::fmin(std::fmax(rgb[ch], 0.0f), 1.0f);
        img.at(ch, i, j) = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return img;
}

}  // namespace worldsim
