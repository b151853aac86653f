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

#include "cfmq/precoding.hpp"

#include <cmath>

namespace cfmq {

arma::cx_mat PrecodingMatrix::ue_cols(const SystemConfig& cfg, int n) const {
    const int c0 = cfg.ue_stream_offset(n);
    return w.cols(arma::uword(c0), arma::uword(c0 + cfg.streams[n] - 1));
}

arma::cx_mat PrecodingMatrix::ru_rows(const SystemConfig& cfg, int m) const {
    const int r0 = cfg.ru_col_offset(m);
    return w.rows(arma::uword(r0), arma::uword(r0 + cfg.tx_antennas[m] - 1));
}

arma::cx_mat PrecodingMatrix::block(const SystemConfig& cfg, int m, int n) const {
    const int r0 = cfg.ru_col_offset(m);
    const int c0 = cfg.ue_stream_offset(n);
    return w.submat(arma::uword(r0), arma::uword(c0), arma::uword(r0 + cfg.tx_antennas[m] - 1),
                    arma::uword(c0 + cfg.streams[n] - 1));
}

// Stacks the per-UE dimension-reduced channels: each H_n is projected onto
// the L_n dominant left singular vectors of its own SVD.
static arma::cx_mat reduced_channel(const ChannelState& channel, const SystemConfig& cfg) {
    const int l_tot = cfg.total_streams();
    arma::cx_mat h_red(arma::uword(l_tot), channel.h.n_cols);
    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_mat h_n = channel.ue_rows(cfg, n);
        const int l_n = cfg.streams[n];
        if (int(h_n.n_rows) == l_n) {
            h_red.rows(arma::uword(cfg.ue_stream_offset(n)),
                       arma::uword(cfg.ue_stream_offset(n) + l_n - 1)) = h_n;
            continue;
        }
        arma::cx_mat u, v;
        arma::vec sv;
        if (!arma::svd(u, sv, v, h_n))
            throw NumericError("mmse_precoder: SVD failed");
        arma::cx_mat u_sel = u.cols(0, arma::uword(l_n - 1));
        // Phase convention: largest-magnitude entry of each column real positive.
        for (arma::uword j = 0; j < u_sel.n_cols; ++j) {
            const arma::uword imax = arma::index_max(arma::abs(u_sel.col(j)));
            const std::complex<double> pivot = u_sel(imax, j);
            if (std::abs(pivot) > 0.0)
                u_sel.col(j) *= std::conj(pivot) / std::abs(pivot);
        }
        h_red.rows(arma::uword(cfg.ue_stream_offset(n)),
                   arma::uword(cfg.ue_stream_offset(n) + l_n - 1)) = u_sel.t() * h_n;
    }
    return h_red;
}

PrecodingMatrix mmse_precoder(const ChannelState& channel, const SystemConfig& cfg) {
    if (channel.h.n_rows != arma::uword(cfg.total_rx()) ||
        channel.h.n_cols != arma::uword(cfg.total_tx()))
        throw ConfigError("mmse_precoder: channel shape mismatch");

    const arma::cx_mat h_red = reduced_channel(channel, cfg);
    const double xi = double(cfg.total_rx()) / cfg.total_power();
    const arma::uword l_tot = h_red.n_rows;

    const arma::cx_mat gram = h_red * h_red.t() + xi * arma::eye<arma::cx_mat>(l_tot, l_tot);
    const arma::cx_mat w_unnorm = h_red.t() * arma::inv_sympd(gram);

    PrecodingMatrix out;
    out.w = w_unnorm;
    out.ru_scale.set_size(arma::uword(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int r0 = cfg.ru_col_offset(m);
        const arma::cx_mat w_m =
            w_unnorm.rows(arma::uword(r0), arma::uword(r0 + cfg.tx_antennas[m] - 1));
        const double energy = std::real(arma::trace(w_m.t() * w_m));
        if (!(energy > 0.0))
            throw NumericError("mmse_precoder: RU " + std::to_string(m) +
                               " sees a degenerate channel (zero precoding energy)");
        const double r_m = std::sqrt(cfg.power[std::size_t(m)] / energy);
        out.ru_scale(arma::uword(m)) = r_m;
        out.w.rows(arma::uword(r0), arma::uword(r0 + cfg.tx_antennas[m] - 1)) *= r_m;
    }
    return out;
}

PrecodingMatrix zero_forcing_precoder(const ChannelState& channel, const SystemConfig& cfg) {
    if (channel.h.n_rows != arma::uword(cfg.total_rx()) ||
        channel.h.n_cols != arma::uword(cfg.total_tx()))
        throw ConfigError("zero_forcing_precoder: channel shape mismatch");

    const arma::cx_mat h_red = reduced_channel(channel, cfg);
    if (int(arma::rank(h_red)) < int(h_red.n_rows))
        throw NumericError("zero_forcing_precoder: channel is rank deficient");

    const arma::cx_mat h_pinv = h_red.t() * arma::inv(h_red * h_red.t());
    const double energy = std::real(arma::trace(h_pinv * h_pinv.t()));
    if (!(energy > 0.0))
        throw NumericError("zero_forcing_precoder: degenerate pseudoinverse");

    const double scale = std::sqrt(cfg.total_power() / energy);
    PrecodingMatrix out;
    out.w = scale * h_pinv;
    out.ru_scale = scale * arma::ones(arma::uword(cfg.num_rus));
    return out;
}

ChannelState cp_average_channel(const std::vector<ChannelState>& channels) {
    if (channels.empty())
        throw ConfigError("cp_average_channel: empty channel list");
    arma::cx_mat acc = channels.front().h;
    for (std::size_t i = 1; i < channels.size(); ++i) {
        if (channels[i].h.n_rows != acc.n_rows || channels[i].h.n_cols != acc.n_cols)
            throw ConfigError("cp_average_channel: shape mismatch in channel list");
        acc += channels[i].h;
    }
    return ChannelState{acc / double(channels.size())};
}

double uniform_midrise_quantize(double v, double range, int axis_bits) {
    const int levels = 1 << axis_bits;
    const double step = 2.0 * range / double(levels);
    // Level centers sit at -range + (k + 0.5) step; out-of-range input clamps.
    int k = int(std::floor((v + range) / step));
    if (k < 0)
        k = 0;
    if (k >= levels)
        k = levels - 1;
    return -range + (double(k) + 0.5) * step;
}

QuantizedPrecoder cp_quantize_precoder(const arma::cx_mat& w, int bits_per_entry,
                                       const SystemConfig& cfg) {
    if (bits_per_entry < 2 || bits_per_entry % 2 != 0)
        throw ConfigError("cp_quantize_precoder: bits_per_entry must be even and >= 2");
    const double sigma_w2 =
        cfg.total_power() / (2.0 * double(cfg.total_tx()) * double(cfg.total_streams()));
    const double range = 1.96 * std::sqrt(sigma_w2);
    const int axis_bits = bits_per_entry / 2;

    QuantizedPrecoder out;
    out.bits_per_entry = bits_per_entry;
    out.range = range;
    out.w_hat.set_size(w.n_rows, w.n_cols);
    for (arma::uword i = 0; i < w.n_elem; ++i)
        out.w_hat(i) = {uniform_midrise_quantize(w(i).real(), range, axis_bits),
                        uniform_midrise_quantize(w(i).imag(), range, axis_bits)};
    return out;
}

} // namespace cfmq
