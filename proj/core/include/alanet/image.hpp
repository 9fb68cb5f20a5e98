/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ALANET_IMAGE_HPP_
#define ALANET_IMAGE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace alanet {

/// Grayscale image, row-major, intensities nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  bool empty() const { return height <= 0 || width <= 0; }

  bool operator==(const Image&) const = default;
};

// Bilinear resampling to (out_h, out_w) with pixel-center alignment: output
// pixel centers map to input positions (x + 0.5) * in_w / out_w - 0.5.
Image resample_bilinear(const Image& src, int out_h, int out_w);

// Mirror left-right.
Image flip_horizontal(const Image& src);

// Rounds every pixel to the nearest multiple of 1/255 after clamping to [0, 1].
void quantize_8bit(Image& img);

// Binary PGM (P5, maxval 255). Reading normalizes to [0, 1].
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

/// 8-bit RGB canvas for overlays.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  explicit RgbImage(const Image& gray);
  void set(int row, int col, std::array<std::uint8_t, 3> color);
};

void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace alanet

#endif  // ALANET_IMAGE_HPP_
