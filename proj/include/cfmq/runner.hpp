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

#include <string>
#include <vector>

#include "cfmq/metrics.hpp"
#include "cfmq/scenario.hpp"
#include "cfmq/training.hpp"

namespace cfmq {

/// One evaluated (scheme, fronthaul-bits) point.
struct ResultRow {
    std::string scheme;
    int bits = 0;
    double sum_se = 0.0;
    double ser = 0.0;
    double objective = 0.0; // mean sum-EI over the evaluation set
    arma::vec sinr;         // per UE
    double est_error_power = 0.0;
    long long op_count = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    MetricsReport metrics;  // full per-UE detail behind the flat columns
};

/// CSV with one row per (scheme, sweep point); the per-UE SINR occupies one
/// column per UE. Column order is fixed:
/// scheme,bits,sum_se,ser,objective,est_error_power,op_count,seed,sinr_ue0,...
/// Wall time is reported in summary.json so the CSV stays byte-identical
/// across reruns.
std::string results_to_csv(const std::vector<ResultRow>& rows, int num_ues);

/// Ratio table against a baseline scheme, one line per scheme per sweep
/// point. Throws ConfigError when the baseline has no rows.
std::string compare_schemes(const std::vector<ResultRow>& rows, const std::string& baseline);

struct RunOutput {
    std::vector<ResultRow> rows;
    std::string results_csv_path;
    std::string summary_json_path;
};

/// Full pipeline: trains codebooks per scheme (saving them under out_dir),
/// evaluates spectral efficiency, SER, SINR and the quantizer objective on
/// the seeded evaluation set, and writes results.csv, summary.json and the
/// resolved scenario. Deterministic for a fixed scenario.
RunOutput run_scenario(const Scenario& scenario, const std::string& out_dir, int threads);

/// Trains and saves codebooks only.
void train_scenario(const Scenario& scenario, const std::string& out_dir, int threads);

/// Flat CSV dump of a channel matrix (row, col, re, im) and the binary
/// counterpart (little-endian float64 pairs, row-major), for
/// cross-implementation comparison.
std::string channel_to_csv(const ChannelState& channel);
void channel_write_binary(const ChannelState& channel, const std::string& path);

} // namespace cfmq
