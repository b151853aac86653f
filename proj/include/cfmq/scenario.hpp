// SPDX-License-Identifier: Apache-2.0
//
// cfmq — precode-and-compress fronthaul quantization for cell-free massive MIMO
// Copyright (C) 2026 the cfmq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmq/channel.hpp"
#include "cfmq/training.hpp"
#include "cfmq/types.hpp"

namespace cfmq {

/// Scenario-file violation; carries the JSON path of the offending field.
class SchemaError : public ConfigError {
  public:
    SchemaError(const std::string& path, const std::string& what)
        : ConfigError(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

struct SchemeSpec {
    std::string name; // vq | mq | smq | tree_mq | alpha_pmq | neural_mq | neural_vq | cp
    double alpha = 0.5;
    int iterations = 0; // alpha-PMQ T; 0 means one schedule cycle
    long long cap = kDefaultMqCap;
    int gd_steps = 100;
    double step_size = 0.1;
    int hidden_neurons = 0; // 0 means D_m = B_m
    int hidden_layers = 1;
    int epochs = 0; // 0 means the training section's epoch count
    double learning_rate = 1e-3;
    int b_cp = 16;  // compress-and-precode bits per precoder entry
    int reuse = 1;  // K_rep echoed into the overhead accounting
};

/// One experiment: system and channel description, precoder choice, scheme
/// list, training and evaluation sizes, and the master seed. Parsing rejects
/// unknown keys with the offending field path.
struct Scenario {
    std::uint64_t seed = 1;
    SystemConfig system;
    ChannelScenario channel;
    PrecoderKind precoder = PrecoderKind::mmse;

    int train_channels = 20;
    int train_symbols = 20;
    int train_rounds = 10;
    int train_epochs = 60;
    int lloyd_rounds_per_level = 4;

    int eval_channels = 3;
    int eval_gaussian_symbols = 400;
    int eval_qam_symbols = 400;

    std::vector<SchemeSpec> schemes;
    std::vector<int> sweep_bits; // optional uniform fronthaul sweep with nested inits
    std::string baseline;        // ratio reference; default first scheme

    int pilot_count = 0; // > 0 simulates pilot-based channel estimation
    PilotDesign pilot_design = PilotDesign::orthogonal;

    static Scenario from_json_text(const std::string& text);
    static Scenario from_file(const std::string& path);

    /// Scenario with all defaults made explicit, logged next to the results.
    std::string resolved_json() const;

    void validate() const;
};

} // namespace cfmq
