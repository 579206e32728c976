#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridnav/numcore/array.hpp"

namespace worldsim {

// Egocentric observation / generic RGB raster. Channel-major (CHW), 8-bit.
// Logical pixel values live in [0,1]; storage is quantized to 255ths so
// serialization round-trips are exact.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> rgb;  // 3*h*w, CHW

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), rgb(static_cast<size_t>(3) * h_ * w_, 0) {}

  uint8_t& at(int c, int i, int j) { return rgb[(static_cast<size_t>(c) * h + i) * w + j]; }
  uint8_t at(int c, int i, int j) const { return rgb[(static_cast<size_t>(c) * h + i) * w + j]; }
  bool operator==(const Image& o) const = default;
};

numcore::Array to_array(const Image& img);          // [3,h,w] floats in [0,1]
Image from_array(const numcore::Array& a);          // clips to [0,1], quantizes
Image resize_nearest(const Image& img, int h, int w);

void save_ppm(const Image& img, const std::string& path);
Image load_ppm(const std::string& path);

// Tile a set of equally sized images into one grid image (inspection dumps).
Image tile_images(const std::vector<Image>& imgs, int cols);

}  // namespace worldsim
