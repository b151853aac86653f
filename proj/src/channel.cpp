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

#include "cfmq/channel.hpp"

#include <algorithm>
#include <cmath>

namespace cfmq {

void ChannelScenario::validate(const SystemConfig& cfg) const {
    if (ru_positions.n_rows != arma::uword(cfg.num_rus) || ru_positions.n_cols != 2)
        throw ConfigError("scenario: ru_positions must be num_rus x 2");
    if (!ru_positions.is_finite())
        throw ConfigError("scenario: ru_positions must be finite");
    if (!(pathloss_exponent >= 0.0) || !std::isfinite(pathloss_exponent))
        throw ConfigError("scenario: pathloss_exponent must be >= 0");
    if (!std::isfinite(reference_loss_db))
        throw ConfigError("scenario: reference_loss_db must be finite");
    if (!(ue_box_max_x >= ue_box_min_x) || !(ue_box_max_y >= ue_box_min_y))
        throw ConfigError("scenario: UE bounding box is empty");
}

double pathloss_gain(double distance, double pathloss_exponent, double reference_loss_db) {
    const double loss_db = reference_loss_db + 10.0 * pathloss_exponent * std::log10(distance);
    return std::pow(10.0, -loss_db / 10.0);
}

ChannelState generate_channel(const SystemConfig& cfg, const ChannelScenario& scenario, Rng& rng) {
    scenario.validate(cfg);
    const int n_rx = cfg.total_rx();
    const int n_tx = cfg.total_tx();

    // UE positions, resampling any draw that coincides with an RU.
    arma::mat ue_pos(arma::uword(cfg.num_ues), 2);
    for (int n = 0; n < cfg.num_ues; ++n) {
        for (;;) {
            const double x = rng.uniform(scenario.ue_box_min_x, scenario.ue_box_max_x);
            const double y = rng.uniform(scenario.ue_box_min_y, scenario.ue_box_max_y);
            bool coincident = false;
            for (int m = 0; m < cfg.num_rus; ++m) {
                const double dx = x - scenario.ru_positions(arma::uword(m), 0);
                const double dy = y - scenario.ru_positions(arma::uword(m), 1);
                if (dx * dx + dy * dy == 0.0) {
                    coincident = true;
                    break;
                }
            }
            if (!coincident) {
                ue_pos(arma::uword(n), 0) = x;
                ue_pos(arma::uword(n), 1) = y;
                break;
            }
        }
    }

    arma::mat gain(arma::uword(cfg.num_rus), arma::uword(cfg.num_ues));
    for (int m = 0; m < cfg.num_rus; ++m)
        for (int n = 0; n < cfg.num_ues; ++n) {
            const double dx = ue_pos(arma::uword(n), 0) - scenario.ru_positions(arma::uword(m), 0);
            const double dy = ue_pos(arma::uword(n), 1) - scenario.ru_positions(arma::uword(m), 1);
            const double d = std::sqrt(dx * dx + dy * dy);
            gain(arma::uword(m), arma::uword(n)) =
                (scenario.pathloss_exponent == 0.0 && scenario.reference_loss_db == 0.0)
                    ? 1.0
                    : pathloss_gain(d, scenario.pathloss_exponent, scenario.reference_loss_db);
        }

    ChannelState state;
    state.h.set_size(arma::uword(n_rx), arma::uword(n_tx));
    for (int n = 0; n < cfg.num_ues; ++n) {
        const int r0 = cfg.ue_row_offset(n);
        for (int m = 0; m < cfg.num_rus; ++m) {
            const int c0 = cfg.ru_col_offset(m);
            const double amp = std::sqrt(gain(arma::uword(m), arma::uword(n)));
            for (int i = 0; i < cfg.rx_antennas[n]; ++i)
                for (int j = 0; j < cfg.tx_antennas[m]; ++j)
                    state.h(arma::uword(r0 + i), arma::uword(c0 + j)) = amp * rng.cnormal();
        }
    }

    if (scenario.normalize_gain) {
        const double mean_gain = arma::accu(gain) / double(gain.n_elem);
        if (mean_gain > 0.0)
            state.h /= std::sqrt(mean_gain);
    }
    return state;
}

arma::cx_mat PilotBlock::ue_rows(const SystemConfig& cfg, int n) const {
    const int r0 = cfg.ue_stream_offset(n);
    return pilots.rows(arma::uword(r0), arma::uword(r0 + cfg.streams[n] - 1));
}

PilotBlock generate_pilots(const SystemConfig& cfg, int pilot_count, Rng& rng,
                           PilotDesign design) {
    const int l_tot = cfg.total_streams();
    const int l_max = *std::max_element(cfg.streams.begin(), cfg.streams.end());
    if (pilot_count < l_max)
        throw ConfigError("pilots: need pilot_count >= max streams per UE (" +
                          std::to_string(l_max) + ")");

    PilotBlock block;
    block.pilot_count = pilot_count;
    block.pilots.set_size(arma::uword(l_tot), arma::uword(pilot_count));

    if (design == PilotDesign::gaussian) {
        for (auto& v : block.pilots)
            v = rng.cnormal();
        block.orthogonal_across_ues = false;
        return block;
    }

    // Rows of a DFT basis scaled to unit per-entry power. With
    // pilot_count >= total_streams all rows are mutually orthogonal; with
    // fewer pilots, rows are reused modulo pilot_count and only per-UE
    // right-inverses survive.
    block.orthogonal_across_ues = pilot_count >= l_tot;
    for (int r = 0; r < l_tot; ++r) {
        const int tone = r % pilot_count;
        for (int c = 0; c < pilot_count; ++c) {
            const double phase = -2.0 * M_PI * double(tone) * double(c) / double(pilot_count);
            block.pilots(arma::uword(r), arma::uword(c)) = {std::cos(phase), std::sin(phase)};
        }
    }
    return block;
}

ChannelEstimate ml_pilot_estimate(const arma::cx_mat& y_pilot, const arma::cx_mat& pilot_rows,
                                  const arma::cx_mat* ground_truth) {
    if (y_pilot.n_cols != pilot_rows.n_cols)
        throw ConfigError("ml_pilot_estimate: pilot-count mismatch");
    // Right pseudoinverse; a rank-deficient pilot block cannot be inverted.
    const arma::cx_mat gram = pilot_rows * pilot_rows.t();
    if (int(arma::rank(gram)) < int(pilot_rows.n_rows))
        throw NumericError("ml_pilot_estimate: pilot block is rank deficient");
    const arma::cx_mat right_pinv = pilot_rows.t() * arma::inv(gram);

    ChannelEstimate est;
    est.g_hat = y_pilot * right_pinv;
    if (ground_truth != nullptr) {
        if (ground_truth->n_rows != est.g_hat.n_rows || ground_truth->n_cols != est.g_hat.n_cols)
            throw ConfigError("ml_pilot_estimate: ground-truth shape mismatch");
        est.error = est.g_hat - *ground_truth;
    }
    return est;
}

} // namespace cfmq
