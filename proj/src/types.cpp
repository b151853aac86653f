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

#include "cfmq/types.hpp"

#include <numeric>

namespace cfmq {

int SystemConfig::total_tx() const {
    return std::accumulate(tx_antennas.begin(), tx_antennas.end(), 0);
}

int SystemConfig::total_rx() const {
    return std::accumulate(rx_antennas.begin(), rx_antennas.end(), 0);
}

int SystemConfig::total_streams() const {
    return std::accumulate(streams.begin(), streams.end(), 0);
}

int SystemConfig::ru_col_offset(int m) const {
    return std::accumulate(tx_antennas.begin(), tx_antennas.begin() + m, 0);
}

int SystemConfig::ue_row_offset(int n) const {
    return std::accumulate(rx_antennas.begin(), rx_antennas.begin() + n, 0);
}

int SystemConfig::ue_stream_offset(int n) const {
    return std::accumulate(streams.begin(), streams.begin() + n, 0);
}

double SystemConfig::total_power() const {
    return std::accumulate(power.begin(), power.end(), 0.0);
}

void SystemConfig::validate() const {
    if (num_rus < 1 || num_ues < 1)
        throw ConfigError("system: need at least one RU and one UE");
    auto check_size = [&](std::size_t got, std::size_t want, const char* what) {
        if (got != want)
            throw ConfigError(std::string("system: ") + what + " has wrong length");
    };
    check_size(tx_antennas.size(), std::size_t(num_rus), "tx_antennas");
    check_size(fronthaul_bits.size(), std::size_t(num_rus), "fronthaul_bits");
    check_size(power.size(), std::size_t(num_rus), "power");
    check_size(rx_antennas.size(), std::size_t(num_ues), "rx_antennas");
    check_size(streams.size(), std::size_t(num_ues), "streams");

    for (int m = 0; m < num_rus; ++m) {
        if (tx_antennas[m] < 1)
            throw ConfigError("system: tx_antennas must be >= 1");
        if (fronthaul_bits[m] < 1)
            throw ConfigError("system: fronthaul_bits must be >= 1");
        if (!(power[m] > 0.0))
            throw ConfigError("system: power must be > 0");
    }
    for (int n = 0; n < num_ues; ++n) {
        if (rx_antennas[n] < 1)
            throw ConfigError("system: rx_antennas must be >= 1");
        if (streams[n] < 1 || streams[n] > rx_antennas[n])
            throw ConfigError("system: need 1 <= streams[n] <= rx_antennas[n]");
    }
    if (!(noise_var > 0.0))
        throw ConfigError("system: noise_var must be > 0");
}

bool SystemConfig::is_scalar() const {
    for (int a : tx_antennas)
        if (a != 1)
            return false;
    for (int a : rx_antennas)
        if (a != 1)
            return false;
    for (int l : streams)
        if (l != 1)
            return false;
    return true;
}

arma::cx_mat ChannelState::ue_rows(const SystemConfig& cfg, int n) const {
    const int r0 = cfg.ue_row_offset(n);
    return h.rows(r0, r0 + cfg.rx_antennas[n] - 1);
}

arma::cx_mat ChannelState::block(const SystemConfig& cfg, int m, int n) const {
    const int r0 = cfg.ue_row_offset(n);
    const int c0 = cfg.ru_col_offset(m);
    return h.submat(r0, c0, r0 + cfg.rx_antennas[n] - 1, c0 + cfg.tx_antennas[m] - 1);
}

arma::cx_mat ChannelState::ru_cols(const SystemConfig& cfg, int m) const {
    const int c0 = cfg.ru_col_offset(m);
    return h.cols(c0, c0 + cfg.tx_antennas[m] - 1);
}

arma::cx_mat SymbolBatch::ue_rows(const SystemConfig& cfg, int n) const {
    const int r0 = cfg.ue_stream_offset(n);
    return symbols.rows(r0, r0 + cfg.streams[n] - 1);
}

arma::cx_vec PrecodedSignal::ru_segment(const SystemConfig& cfg, int m) const {
    const int c0 = cfg.ru_col_offset(m);
    return x.subvec(c0, c0 + cfg.tx_antennas[m] - 1);
}

std::vector<std::uint8_t> index_to_bits(int index, int nbits) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(nbits), 0);
    for (int i = 0; i < nbits; ++i)
        bits[std::size_t(i)] = std::uint8_t((index >> (nbits - 1 - i)) & 1);
    return bits;
}

int bits_to_index(const std::vector<std::uint8_t>& bits) {
    int index = 0;
    for (std::uint8_t b : bits)
        index = (index << 1) | int(b & 1);
    return index;
}

PrecodedSignal assemble_precoded(const arma::cx_mat& w, const arma::cx_vec& s) {
    if (w.n_cols != s.n_elem)
        throw ConfigError("assemble_precoded: precoder has " + std::to_string(w.n_cols) +
                          " columns but symbol vector has " + std::to_string(s.n_elem) +
                          " entries");
    return PrecodedSignal{w * s};
}

arma::cx_vec apply_power_scaling(const SystemConfig& cfg, const arma::cx_vec& xhat,
                                 const arma::vec& gamma) {
    if (gamma.n_elem != arma::uword(cfg.num_rus) || xhat.n_elem != arma::uword(cfg.total_tx()))
        throw ConfigError("apply_power_scaling: size mismatch");
    arma::cx_vec out(xhat.n_elem);
    for (int m = 0; m < cfg.num_rus; ++m) {
        if (!(gamma(arma::uword(m)) > 0.0))
            throw ConfigError("apply_power_scaling: scales must be positive");
        const int c0 = cfg.ru_col_offset(m);
        out.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) =
            gamma(arma::uword(m)) *
            xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1));
    }
    return out;
}

SymbolBatch gaussian_symbols(const SystemConfig& cfg, arma::uword count, Rng& rng) {
    SymbolBatch batch;
    batch.symbols.set_size(arma::uword(cfg.total_streams()), count);
    for (arma::uword k = 0; k < count; ++k)
        for (arma::uword i = 0; i < batch.symbols.n_rows; ++i)
            batch.symbols(i, k) = rng.cnormal();
    return batch;
}

} // namespace cfmq
