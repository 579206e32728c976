#include "gridnav/worldsim/world.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "gridnav/numcore/rng.hpp"

namespace worldsim {

float wrap_angle(float a) {
  while (a > static_cast<float>(M_PI)) a -= 2.0f * static_cast<float>(M_PI);
  while (a <= -static_cast<float>(M_PI)) a += 2.0f * static_cast<float>(M_PI);
  return a;
}

std::vector<Embodiment> default_embodiments() {
  return {
      {"turtle", 0.5f, 1.6f, 1.4f, 0.85f, 0.25f},
      {"scout", 1.0f, 2.0f, 1.7f, 1.00f, 0.25f},
      {"rover", 2.0f, 2.4f, 2.0f, 1.20f, 0.25f},
      {"sprinter", 5.0f, 3.0f, 2.3f, 1.45f, 0.25f},
  };
}

bool World::blocked_at(float x, float y) const {
  if (x < 0.0f || y < 0.0f) return true;
  int c = cell_col(x), r = cell_row(y);
  return blocked(r, c);
}

namespace {

// hsv in [0,1] -> rgb
std::array<float, 3> hsv_to_rgb(float h, float s, float v) {
  float r = 0, g = 0, b = 0;
  int i = static_cast<int>(h * 6.0f) % 6;
  float f = h * 6.0f - std::floor(h * 6.0f);
  float p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {r, g, b};
}

int flood_count_from_first_free(const std::vector<uint8_t>& occ, int h, int w) {
  std::vector<uint8_t> seen(occ.size(), 0);
  int start = -1;
  for (size_t i = 0; i < occ.size(); ++i)
    if (!occ[i]) {
      start = static_cast<int>(i);
      break;
    }
  if (start < 0) return 0;
  std::deque<int> q{start};
  seen[start] = 1;
  int count = 0;
  while (!q.empty()) {
    int cur = q.front();
    q.pop_front();
    ++count;
    int r = cur / w, c = cur % w;
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
      int ni = nr * w + nc;
      if (!occ[ni] && !seen[ni]) {
        seen[ni] = 1;
        q.push_back(ni);
      }
    }
  }
  return count;
}

}  // namespace

int count_free_cells(const World& w) {
  int n = 0;
  for (uint8_t o : w.occupancy) n += (o == 0);
  return n;
}

World generate_world(uint64_t seed, int size, float obstacle_density) {
  if (obstacle_density < 0.0f || obstacle_density > 0.4f)
    throw std::invalid_argument("generate_world: density " + std::to_string(obstacle_density) +
                                " outside [0, 0.4]");
  if (size < 4) throw std::invalid_argument("generate_world: size must be >= 4");
  World w;
  w.height = size;
  w.width = size;
  w.seed = seed;
  w.cell_size = 1.0f;
  w.occupancy.assign(static_cast<size_t>(size) * size, 0);
  w.color_idx.assign(static_cast<size_t>(size) * size, 0);

  numcore::Rng rng(seed);
  numcore::Rng palette_rng = rng.split(1);
  numcore::Rng wall_rng = rng.split(2);
  numcore::Rng obstacle_rng = rng.split(3);

  int n_colors = 12;
  float hue0 = palette_rng.uniformf();
  for (int i = 0; i < n_colors; ++i) {
    float h = std::fmod(hue0 + static_cast<float>(i) / n_colors, 1.0f);
    float s = 0.55f + 0.4f * palette_rng.uniformf();
    float v = 0.55f + 0.4f * palette_rng.uniformf();
    w.palette.push_back(hsv_to_rgb(h, s, v));
  }

  auto set_blocked = [&](int r, int c, uint8_t color) {
    w.occupancy[r * size + c] = 1;
    w.color_idx[r * size + c] = color;
  };

  // boundary walls, colored in segments so directions are distinguishable
  int seg_len = std::max(3, size / 4);
  int running = 0;
  uint8_t cur_color = static_cast<uint8_t>(wall_rng.next_u64() % n_colors);
  auto next_seg_color = [&]() {
    if (++running % seg_len == 0)
      cur_color = static_cast<uint8_t>(wall_rng.next_u64() % n_colors);
    return cur_color;
  };
  for (int c = 0; c < size; ++c) set_blocked(0, c, next_seg_color());
  for (int r = 1; r < size; ++r) set_blocked(r, size - 1, next_seg_color());
  for (int c = size - 2; c >= 0; --c) set_blocked(size - 1, c, next_seg_color());
  for (int r = size - 2; r >= 1; --r) set_blocked(r, 0, next_seg_color());

  int interior = (size - 2) * (size - 2);
  int target = static_cast<int>(std::lround(obstacle_density * interior));
  int placed = 0;
  int attempts = 0;
  int max_attempts = 200 + 80 * target;
  while (placed < target && attempts < max_attempts) {
    ++attempts;
    int sh = 1 + static_cast<int>(obstacle_rng.next_u64() % 2);
    int sw = 1 + static_cast<int>(obstacle_rng.next_u64() % 2);
    int r0 = obstacle_rng.uniform_int(1, size - 1 - sh);
    int c0 = obstacle_rng.uniform_int(1, size - 1 - sw);
    bool overlap = false;
    for (int r = r0; r < r0 + sh && !overlap; ++r)
      for (int c = c0; c < c0 + sw && !overlap; ++c) overlap = w.blocked(r, c);
    if (overlap) continue;
    uint8_t color = static_cast<uint8_t>(obstacle_rng.next_u64() % n_colors);
    for (int r = r0; r < r0 + sh; ++r)
      for (int c = c0; c < c0 + sw; ++c) set_blocked(r, c, color);
    int free_cells = count_free_cells(w);
    if (flood_count_from_first_free(w.occupancy, size, size) != free_cells) {
      // carving this obstacle split the free space; revert
      for (int r = r0; r < r0 + sh; ++r)
        for (int c = c0; c < c0 + sw; ++c) {
          w.occupancy[r * size + c] = 0;
          w.color_idx[r * size + c] = 0;
        }
      continue;
    }
    placed += sh * sw;
  }
  if (placed < target)
    throw std::runtime_error("generate_world: density " + std::to_string(obstacle_density) +
                             " too high to keep free space connected (placed " +
                             std::to_string(placed) + "/" + std::to_string(target) + ")");

  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (!w.blocked(r, c)) w.spawn_points.push_back(w.cell_center(r, c));
  return w;
}

// ---------------------------------------------------------------------------
// save / load

namespace {

void write_rle(std::ostream& os, const std::vector<uint8_t>& data) {
  size_t i = 0;
  while (i < data.size()) {
    size_t j = i;
    while (j + 1 < data.size() && data[j + 1] == data[i]) ++j;
    os << (j - i + 1) << " " << static_cast<int>(data[i]) << "\n";
    i = j + 1;
  }
  os << "end\n";
}

std::vector<uint8_t> read_rle(std::istream& is, size_t expected, const std::string& what) {
  std::vector<uint8_t> out;
  out.reserve(expected);
  std::string tok;
  while (is >> tok) {
    if (tok == "end") break;
    size_t count = std::stoul(tok);
    int value = 0;
    if (!(is >> value)) throw std::runtime_error("world file: truncated " + what);
    for (size_t k = 0; k < count; ++k) out.push_back(static_cast<uint8_t>(value));
  }
  if (out.size() != expected)
    throw std::runtime_error("world file: " + what + " has " + std::to_string(out.size()) +
                             " cells, expected " + std::to_string(expected));
  return out;
}

}  // namespace

void save_world(const World& w, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_world: cannot open '" + path + "'");
  os << "GNAVW 1\n";
  os << "dims " << w.height << " " << w.width << "\n";
  os << "cell_size " << w.cell_size << "\n";
  os << "seed " << w.seed << "\n";
  os << "palette " << w.palette.size() << "\n";
  for (const auto& c : w.palette) os << c[0] << " " << c[1] << " " << c[2] << "\n";
  os << "occupancy\n";
  write_rle(os, w.occupancy);
  os << "colors\n";
  write_rle(os, w.color_idx);
  if (!os) throw std::runtime_error("save_world: write failed for '" + path + "'");
}

World load_world(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_world: cannot open '" + path + "'");
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "GNAVW") throw std::runtime_error("load_world: bad magic in '" + path + "'");
  if (version != 1) throw std::runtime_error("load_world: unsupported version");
  World w;
  std::string key;
  is >> key >> w.height >> w.width;
  is >> key >> w.cell_size;
  is >> key >> w.seed;
  size_t n_palette = 0;
  is >> key >> n_palette;
  w.palette.resize(n_palette);
  for (auto& c : w.palette) is >> c[0] >> c[1] >> c[2];
  size_t cells = static_cast<size_t>(w.height) * w.width;
  is >> key;  // "occupancy"
  w.occupancy = read_rle(is, cells, "occupancy");
  is >> key;  // "colors"
  w.color_idx = read_rle(is, cells, "colors");
  for (int r = 0; r < w.height; ++r)
    for (int c = 0; c < w.width; ++c)
      if (!w.blocked(r, c)) w.spawn_points.push_back(w.cell_center(r, c));
  return w;
}

Image render_overhead(const World& w, int px_per_cell) {
  Image img(w.height * px_per_cell, w.width * px_per_cell);
  for (int r = 0; r < w.height; ++r)
    for (int c = 0; c < w.width; ++c) {
      float rgb[3] = {0.82f, 0.80f, 0.78f};  // floor
      if (w.blocked(r, c)) {
        const auto& p = w.palette[w.color_idx[r * w.width + c]];
        rgb[0] = p[0];
        rgb[1] = p[1];
        rgb[2] = p[2];
      }
      // row 0 of the image is the top of the map (max y)
      int ir0 = (w.height - 1 - r) * px_per_cell;
      for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < px_per_cell; ++i)
          for (int j = 0; j < px_per_cell; ++j)
            img.at(ch, ir0 + i, c * px_per_cell + j) =
                static_cast<uint8_t>(std::lround(rgb[ch] * 255.0f));
    }
  return img;
}

// ---------------------------------------------------------------------------
// grid paths

std::vector<std::pair<int, int>> bfs_path(const World& w, std::pair<int, int> from,
                                          std::pair<int, int> to) {
  if (w.blocked(from.first, from.second) || w.blocked(to.first, to.second)) return {};
  std::vector<int> prev(static_cast<size_t>(w.height) * w.width, -2);
  std::deque<int> q;
  int start = from.first * w.width + from.second;
  int goal = to.first * w.width + to.second;
  prev[start] = -1;
  q.push_back(start);
  while (!q.empty() && prev[goal] == -2) {
    int cur = q.front();
    q.pop_front();
    int r = cur / w.width, c = cur % w.width;
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (w.blocked(nr, nc)) continue;
      int ni = nr * w.width + nc;
      if (prev[ni] == -2) {
        prev[ni] = cur;
        q.push_back(ni);
      }
    }
  }
  if (prev[goal] == -2) return {};
  std::vector<std::pair<int, int>> path;
  for (int cur = goal; cur != -1; cur = prev[cur])
    path.emplace_back(cur / w.width, cur % w.width);
  std::reverse(path.begin(), path.end());
  return path;
}

std::optional<float> grid_shortest_path_length(const World& w, Pose from, Pose to) {
  int sr = w.cell_row(from.y), sc = w.cell_col(from.x);
  int gr = w.cell_row(to.y), gc = w.cell_col(to.x);
  if (w.blocked(sr, sc) || w.blocked(gr, gc)) return std::nullopt;
  size_t n = static_cast<size_t>(w.height) * w.width;
  std::vector<float> dist(n, std::numeric_limits<float>::infinity());
  using Entry = std::pair<float, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  int start = sr * w.width + sc, goal = gr * w.width + gc;
  dist[start] = 0.0f;
  pq.emplace(0.0f, start);
  const float diag = std::sqrt(2.0f) * w.cell_size;
  while (!pq.empty()) {
    auto [d, cur] = pq.top();
    pq.pop();
    if (d > dist[cur]) continue;
    if (cur == goal) break;
    int r = cur / w.width, c = cur % w.width;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        int nr = r + dr, nc = c + dc;
        if (w.blocked(nr, nc)) continue;
        if (dr != 0 && dc != 0 && (w.blocked(r + dr, c) || w.blocked(r, c + dc)))
          continue;  // no corner cutting
        float nd = d + ((dr != 0 && dc != 0) ? diag : w.cell_size);
        int ni = nr * w.width + nc;
        if (nd < dist[ni]) {
          dist[ni] = nd;
          pq.emplace(nd, ni);
        }
      }
  }
  if (!std::isfinite(dist[goal])) return std::nullopt;
  return dist[goal];
}

}  // namespace worldsim
