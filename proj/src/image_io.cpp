// Copyright 2026 The protomatch Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "protomatch/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <png.h>

namespace protomatch {
namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::string& path) {
  NetpbmHeader h;
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("truncated netpbm header: " + path);
  };
  h.magic = next_token();
  h.width = std::stoi(next_token());
  h.height = std::stoi(next_token());
  h.maxval = std::stoi(next_token());
  in.get();  // single whitespace before the raster
  if (h.maxval != 255) throw std::runtime_error("only 8-bit netpbm supported: " + path);
  return h;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 3) throw ShapeError("write_png: image must have 3 channels");
  std::vector<unsigned char> raster(image.data.size());
  std::transform(image.data.begin(), image.data.end(), raster.begin(), to_byte);
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("png encoding failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, raster.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_ppm(const std::string& path, const Image& image) {
  if (image.channels != 3) throw ShapeError("write_ppm: image must have 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raster(image.data.size());
  std::transform(image.data.begin(), image.data.end(), raster.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto h = read_header(in, path);
  if (h.magic != "P6") throw std::runtime_error("not a P6 file: " + path);
  Image img(h.height, h.width, 3);
  std::vector<unsigned char> raster(img.data.size());
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (!in) throw std::runtime_error("truncated raster: " + path);
  for (std::size_t i = 0; i < raster.size(); ++i) img.data[i] = raster[i] / 255.0;
  return img;
}

void write_label_pgm(const std::string& path, const LabelMap& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << labels.width << " " << labels.height << "\n255\n";
  std::vector<unsigned char> raster(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 255) {
      throw ArgumentError("write_label_pgm: class id outside 0..255");
    }
    raster[i] = static_cast<unsigned char>(labels[i]);
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
}

LabelMap read_label_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto h = read_header(in, path);
  if (h.magic != "P5") throw std::runtime_error("not a P5 file: " + path);
  LabelMap labels(h.height, h.width, 0);
  std::vector<unsigned char> raster(labels.size());
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (!in) throw std::runtime_error("truncated raster: " + path);
  for (std::size_t i = 0; i < raster.size(); ++i) labels[i] = raster[i];
  return labels;
}

Image colorize_labels(const LabelMap& labels, int unknown_index) {
  static constexpr std::array<std::array<double, 3>, 12> kPalette = {{
      {0.50, 0.25, 0.50}, {0.96, 0.14, 0.91}, {0.27, 0.27, 0.27},
      {0.40, 0.40, 0.61}, {0.75, 0.60, 0.60}, {0.60, 0.60, 0.60},
      {0.98, 0.67, 0.12}, {0.86, 0.86, 0.00}, {0.42, 0.56, 0.14},
      {0.27, 0.51, 0.71}, {0.86, 0.08, 0.24}, {0.00, 0.00, 0.56},
  }};
  Image img(labels.height, labels.width, 3);
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const int cls = labels.at(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) = cls == unknown_index
                               ? 1.0
                               : kPalette[static_cast<std::size_t>(cls) % kPalette.size()][ch];
      }
    }
  }
  return img;
}

}  // namespace protomatch
