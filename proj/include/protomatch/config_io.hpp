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

#include "protomatch/experiment.hpp"

namespace protomatch {

/// Reads an INI file with optional sections [scenario], [hyper], [toggles] and
/// [train]. Keys that are absent keep the defaults of `base`; unknown keys
/// raise ArgumentError.
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});
ExperimentConfig parse_config(const std::string& ini_text, const ExperimentConfig& base = {});

/// Inverse of parse_config; every field is written.
std::string config_to_ini(const ExperimentConfig& config);

}  // namespace protomatch
