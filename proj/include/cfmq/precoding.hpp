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

#include <armadillo>
#include <vector>

#include "cfmq/types.hpp"
#include "cfmq/channel.hpp"

namespace cfmq {

/// Precoding matrix W of size total_tx x total_streams with per-UE column
/// and per-RU row views, plus the per-RU normalization scale used during
/// construction.
struct PrecodingMatrix {
    arma::cx_mat w;
    arma::vec ru_scale; // r[m]

    arma::cx_mat ue_cols(const SystemConfig& cfg, int n) const;
    arma::cx_mat ru_rows(const SystemConfig& cfg, int m) const;
    arma::cx_mat block(const SystemConfig& cfg, int m, int n) const;
};

/// Per-UE SVD dimension reduction to the dominant streams followed by a
/// regularized inverse and per-RU power scaling, so that
/// tr(W_m W_m^H) = P_m holds for every RU. The phase of each selected left
/// singular vector is fixed (largest-magnitude entry real positive) for
/// reproducibility.
PrecodingMatrix mmse_precoder(const ChannelState& channel, const SystemConfig& cfg);

/// Normalized zero-forcing precoder W = sqrt(P_tot / tr(Hp Hp^H)) Hp with Hp
/// the right pseudoinverse of the (stream-reduced) channel. Satisfies the
/// total power identity E||W s||^2 = sum_m P_m for unit-covariance symbols.
PrecodingMatrix zero_forcing_precoder(const ChannelState& channel, const SystemConfig& cfg);

/// Entry-wise arithmetic mean of equally shaped channels, used by the
/// compress-and-precode baseline when one precoder is shared across a block
/// of channel uses.
ChannelState cp_average_channel(const std::vector<ChannelState>& channels);

/// Precoder with every entry quantized on a per-axis uniform mid-rise grid.
struct QuantizedPrecoder {
    arma::cx_mat w_hat;
    int bits_per_entry = 0; // B_CP, split evenly between real and imaginary axes
    double range = 0.0;     // grid half width
};

/// Uniform quantization of each precoder entry with bits_per_entry/2 bits
/// per axis over [-1.96 sigma_w, +1.96 sigma_w], where sigma_w^2 =
/// P_tot / (2 N_tx L) models entries as Gaussian. Out-of-range values clamp
/// to the extreme levels. bits_per_entry must be even and >= 2.
QuantizedPrecoder cp_quantize_precoder(const arma::cx_mat& w, int bits_per_entry,
                                       const SystemConfig& cfg);

/// One axis of the mid-rise grid: quantizes v to the nearest of 2^axis_bits
/// levels spanning [-range, range].
double uniform_midrise_quantize(double v, double range, int axis_bits);

} // namespace cfmq
