#include "gridnav/worldsim/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace worldsim {

numcore::Array to_array(const Image& img) {
  numcore::Array a({3, img.h, img.w});
  for (size_t i = 0; i < img.rgb.size(); ++i) a.data[i] = img.rgb[i] / 255.0f;
  return a;
}

Image from_array(const numcore::Array& a) {
  if (a.rank() != 3 || a.shape[0] != 3)
    throw std::invalid_argument("from_array: expected [3,h,w], got " + numcore::shape_str(a.shape));
  Image img(a.shape[1], a.shape[2]);
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    float v = std::clamp(a.data[i], 0.0f, 1.0f);
    img.rgb[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

Image resize_nearest(const Image& img, int h, int w) {
  Image out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < h; ++i) {
      int si = std::min(img.h - 1, i * img.h / h);
      for (int j = 0; j < w; ++j) {
        int sj = std::min(img.w - 1, j * img.w / w);
        out.at(c, i, j) = img.at(c, si, sj);
      }
    }
  return out;
}

void save_ppm(const Image& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_ppm: cannot open '" + path + "'");
  os << "P6\n" << img.w << " " << img.h << "\n255\n";
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      uint8_t px[3] = {img.at(0, i, j), img.at(1, i, j), img.at(2, i, j)};
      os.write(reinterpret_cast<const char*>(px), 3);
    }
  if (!os) throw std::runtime_error("save_ppm: write failed for '" + path + "'");
}

Image load_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_ppm: cannot open '" + path + "'");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255)
    throw std::runtime_error("load_ppm: unsupported format in '" + path + "'");
  is.get();  // single whitespace after header
  Image img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      char px[3];
      if (!is.read(px, 3)) throw std::runtime_error("load_ppm: truncated '" + path + "'");
      img.at(0, i, j) = static_cast<uint8_t>(px[0]);
      img.at(1, i, j) = static_cast<uint8_t>(px[1]);
      img.at(2, i, j) = static_cast<uint8_t>(px[2]);
    }
  return img;
}

Image tile_images(const std::vector<Image>& imgs, int cols) {
  if (imgs.empty()) return Image();
  int h = imgs[0].h, w = imgs[0].w;
  int rows = (static_cast<int>(imgs.size()) + cols - 1) / cols;
  Image out(rows * (h + 1), cols * (w + 1));
  for (size_t k = 0; k < imgs.size(); ++k) {
    int r0 = static_cast<int>(k) / cols * (h + 1);
    int c0 = static_cast<int>(k) % cols * (w + 1);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out.at(c, r0 + i, c0 + j) = imgs[k].at(c, i, j);
  }
  return out;
}

}  // namespace worldsim
