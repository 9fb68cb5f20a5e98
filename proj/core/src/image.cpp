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

#include "alanet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "alanet/error.hpp"

namespace alanet {

Image resample_bilinear(const Image& src, int out_h, int out_w) {
  if (src.empty() || out_h <= 0 || out_w <= 0) throw InvalidInput("resample: empty image");
  if (out_h == src.height && out_w == src.width) return src;
  Image dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ly = y - y0;
    for (int c = 0; c < out_w; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double lx = x - x0;
      dst.at(r, c) = (1 - ly) * ((1 - lx) * src.at(y0, x0) + lx * src.at(y0, x1)) +
                     ly * ((1 - lx) * src.at(y1, x0) + lx * src.at(y1, x1));
    }
  }
  return dst;
}

Image flip_horizontal(const Image& src) {
  Image dst(src.height, src.width);
  for (int r = 0; r < src.height; ++r) {
    for (int c = 0; c < src.width; ++c) dst.at(r, c) = src.at(r, src.width - 1 - c);
  }
  return dst;
}

void quantize_8bit(Image& img) {
  for (double& v : img.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  if (pnm_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(in));
    h = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported PGM");
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError(path.string() + ": truncated PGM data");
  }
  Image img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

RgbImage::RgbImage(const Image& gray) : height(gray.height), width(gray.width) {
  rgb.resize(static_cast<std::size_t>(height) * width * 3);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(gray.pixels[i], 0.0, 1.0) * 255.0));
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
  }
}

void RgbImage::set(int row, int col, std::array<std::uint8_t, 3> color) {
  if (row < 0 || row >= height || col < 0 || col >= width) return;
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  rgb[i] = color[0];
  rgb[i + 1] = color[1];
  rgb[i + 2] = color[2];
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

}  // namespace alanet
