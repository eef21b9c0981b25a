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

#pragma once

#include <string>

#include "protomatch/common.hpp"

namespace protomatch {

// Binary netpbm I/O. Images are 8-bit P6 (RGB) files; label maps are 8-bit
// P5 files whose gray level is the class id.

void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);

void write_label_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_label_pgm(const std::string& path);

/// 8-bit RGB PNG.
void write_png(const std::string& path, const Image& image);

/// Fixed palette rendering; index == unknown_index is drawn white.
Image colorize_labels(const LabelMap& labels, int unknown_index);

}  // namespace protomatch
