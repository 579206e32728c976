#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridnav/worldsim/image.hpp"

namespace worldsim {

// World frame: x right, y up, theta counter-clockwise from +x, in (-pi, pi].
struct Pose {
  float x = 0.0f;
  float y = 0.0f;
  float theta = 0.0f;
};

float wrap_angle(float a);  // into (-pi, pi]

struct Embodiment {
  std::string id;
  float top_speed = 1.0f;           // m/s
  float turn_rate_max = 2.0f;       // rad/s
  float camera_fov = 1.6f;          // radians
  float camera_height_scale = 1.0f; // vertical wall extent multiplier
  float control_period = 0.25f;     // s
};

// Four simulated platforms spanning a 10x speed range with distinct optics,
// so cross-embodiment visual and dynamic shift is real.
std::vector<Embodiment> default_embodiments();

struct World {
  int height = 0;  // rows
  int width = 0;   // cols
  float cell_size = 1.0f;
  uint64_t seed = 0;
  std::vector<uint8_t> occupancy;  // row-major, 1 = blocked
  std::vector<uint8_t> color_idx;  // palette index per cell
  std::vector<std::array<float, 3>> palette;
  std::vector<Pose> spawn_points;  // centers of free cells

  bool in_grid(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
  bool blocked(int r, int c) const { return !in_grid(r, c) || occupancy[r * width + c] != 0; }
  // Meters; anything outside the grid counts as blocked.
  bool blocked_at(float x, float y) const;
  int cell_row(float y) const { return static_cast<int>(y / cell_size); }
  int cell_col(float x) const { return static_cast<int>(x / cell_size); }
  Pose cell_center(int r, int c) const {
    return Pose{(c + 0.5f) * cell_size, (r + 0.5f) * cell_size, 0.0f};
  }
};

// Procedurally carves obstacles while keeping the free space one connected
// component. Deterministic in (seed, size, density). Density is the target
// blocked fraction of the interior, valid in [0, 0.4].
World generate_world(uint64_t seed, int size, float obstacle_density);

// Text header (dims, cell size, seed) + run-length-encoded occupancy and
// color indices + palette.
void save_world(const World& w, const std::string& path);
World load_world(const std::string& path);

// Top-down RGB of the whole grid; the context image C for learned heuristics.
Image render_overhead(const World& w, int px_per_cell = 4);

// 4-connected BFS path between cells; empty if unreachable.
std::vector<std::pair<int, int>> bfs_path(const World& w, std::pair<int, int> from,
                                          std::pair<int, int> to);

// Metric shortest-path length through free cells (8-connected, corner cuts
// disallowed); nullopt if unreachable. Ground-truth oracle for metrics.
std::optional<float> grid_shortest_path_length(const World& w, Pose from, Pose to);

int count_free_cells(const World& w);

}  // namespace worldsim
