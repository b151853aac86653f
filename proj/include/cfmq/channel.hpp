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

namespace cfmq {

/// Log-distance pathloss plus i.i.d. Rayleigh fading. RU positions are
/// fixed; UE positions are drawn uniformly from a bounding box for each
/// channel realization.
struct ChannelScenario {
    arma::mat ru_positions;       // num_rus x 2, meters
    double ue_box_min_x = 0.0;    // UE placement bounding box
    double ue_box_min_y = 0.0;
    double ue_box_max_x = 100.0;
    double ue_box_max_y = 100.0;
    double pathloss_exponent = 3.0;
    double reference_loss_db = 30.0;
    bool normalize_gain = false;  // divide H by the RMS pathloss over all (m,n) pairs

    void validate(const SystemConfig& cfg) const;
};

/// Linear pathloss gain 10^(-(L0 + 10 a log10 d) / 10).
double pathloss_gain(double distance, double pathloss_exponent, double reference_loss_db);

/// Draws UE positions and fading; entry (i, j) in the (UE n, RU m) block is
/// sqrt(pathloss(d_mn)) times a unit-variance complex Gaussian. A UE landing
/// exactly on an RU is resampled.
ChannelState generate_channel(const SystemConfig& cfg, const ChannelScenario& scenario, Rng& rng);

/// Pilot matrix S_p of size total_streams x pilot_count with per-UE row
/// blocks. Orthogonal pilots have mutually orthogonal rows so that
/// S_p_n pinv(S_p_n) = I and S_p_n' pinv(S_p_n) = 0 for n' != n.
struct PilotBlock {
    arma::cx_mat pilots; // total_streams x pilot_count
    int pilot_count = 0;
    bool orthogonal_across_ues = false;

    arma::cx_mat ue_rows(const SystemConfig& cfg, int n) const;
};

enum class PilotDesign { orthogonal, gaussian };

/// Builds pilots from a scaled DFT basis (unit per-entry power), or as
/// Gaussian CN(0,1) entries when design == gaussian. Needs
/// pilot_count >= max streams per UE; full cross-UE orthogonality needs
/// pilot_count >= total_streams (flagged in the result).
PilotBlock generate_pilots(const SystemConfig& cfg, int pilot_count, Rng& rng,
                           PilotDesign design = PilotDesign::orthogonal);

/// Per-UE effective-channel estimate G_hat_n = Y_p_n pinv(S_p_n) and, when
/// the simulator knows the ground truth G_n = H_n W_n, the estimation error
/// E_n = G_hat_n - G_n.
struct ChannelEstimate {
    arma::cx_mat g_hat; // rx_antennas[n] x streams[n]
    arma::cx_mat error; // same shape; empty when no ground truth supplied
};

/// Maximum-likelihood estimate from received pilots Y_p_n (rx_antennas[n] x
/// pilot_count) using the Moore-Penrose right pseudoinverse of the UE's
/// pilot block. Throws NumericError when the pilot block is rank deficient.
ChannelEstimate ml_pilot_estimate(const arma::cx_mat& y_pilot, const arma::cx_mat& pilot_rows,
                                  const arma::cx_mat* ground_truth = nullptr);

} // namespace cfmq
