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

#include "cfmq/types.hpp"

namespace cfmq {

struct FlopItem {
    std::string name;
    std::string formula;
    long long flops = 0;
};

struct FlopReport {
    std::vector<FlopItem> items;

    long long total() const;
    const FlopItem& find(const std::string& name) const;
    std::string to_csv() const;
};

/// Sizes of the per-RU neural codebooks used by the flop model.
struct NeuralDims {
    int hidden_neurons = 64; // N_net (= D_m)
    int hidden_layers = 1;   // K_m
    int bits = 64;           // B_m
};

/// Per-channel-use flop counts on the DU side: the six MMSE precoding design
/// steps plus the per-GD-step cost of neural-MQ. Fractional formula results
/// round half up.
FlopReport flops_du(const SystemConfig& cfg, const NeuralDims& dims);

/// Per-channel-use flop counts on the RU side: precoder application for CP
/// and one neural-codebook inference per RU for PC.
FlopReport flops_ru(const SystemConfig& cfg, const NeuralDims& dims);

// ---------------------------------------------------------------------------
// Operation counts of the quantizers (EI evaluations; MACs for neural-MQ)
// ---------------------------------------------------------------------------

struct OpCount {
    long long total = 0;
    long long parallel = 0;
};

OpCount op_count_vq(int num_rus, int bits);
OpCount op_count_mq(int num_rus, int bits);
OpCount op_count_smq(int num_rus, int bits);
OpCount op_count_tree_mq(int num_rus, int bits);
/// avg_set_size is the average number of RUs updated per iteration (M').
OpCount op_count_alpha_pmq(int iterations, double avg_set_size, int max_bits);
/// MAC units per the 2 I sum_m D_m (B_m + D_m (K_m - 1) + 2 N_m^tx) model.
OpCount op_count_neural_mq(const SystemConfig& cfg, const NeuralDims& dims, int gd_steps);

// ---------------------------------------------------------------------------
// Fronthaul overhead
// ---------------------------------------------------------------------------

/// Bits per channel use a CP fronthaul link must carry:
///     R_sum / R_code + N_tx_m L B_CP / K_rep.
/// With R_code = 1 this is the plain overhead equation.
double cp_fronthaul_bits_per_use(double r_sum, double r_code, int n_tx_m, int streams, int b_cp,
                                 int reuse);

/// PC carries exactly the per-RU fronthaul bits; independent of the stream
/// count and antenna count by construction.
double pc_fronthaul_bits_per_use(int b_m);

/// OFDM resource grid used to convert per-RE bits into bits per second.
struct OfdmGrid {
    int n_rb = 273;
    int n_sc = 12;
    int n_ofdm = 14;
    int slots_per_sec = 2000;
    int n_rbg = 1; // resource blocks sharing one precoder
};

/// bits/s of a stream that spends bits_per_re on every resource element.
double stream_bps(double bits_per_re, const OfdmGrid& grid);

/// bits/s of the CP precoder stream: b_w n_tx L bits per precoder times
/// N_RB / N_RBG distinct precoders per slot.
double precoder_stream_bps(int b_w, int n_tx, int streams, const OfdmGrid& grid);

struct OverheadReport {
    double cp_bits_per_use = 0.0;
    double pc_bits_per_use = 0.0;
    double cp_precoder_bps = 0.0;
    double cp_data_bps = 0.0;
    double pc_bps = 0.0;
    // echoed inputs
    double r_sum = 0.0;
    double r_code = 1.0;
    int b_cp = 0;
    int reuse = 1;
    int b_m = 0;
    OfdmGrid grid;

    std::string to_csv() const;
};

} // namespace cfmq
