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

#include "cfmq/accounting.hpp"

#include <cmath>
#include <sstream>

namespace cfmq {

long long FlopReport::total() const {
    long long acc = 0;
    for (const auto& item : items)
        acc += item.flops;
    return acc;
}

const FlopItem& FlopReport::find(const std::string& name) const {
    for (const auto& item : items)
        if (item.name == name)
            return item;
    throw ConfigError("flop report: no line item named " + name);
}

std::string FlopReport::to_csv() const {
    std::ostringstream out;
    out << "name,formula,flops\n";
    for (const auto& item : items)
        out << item.name << ",\"" << item.formula << "\"," << item.flops << "\n";
    return out.str();
}

static long long round_half_up(double v) {
    return (long long)(std::floor(v + 0.5));
}

// Uniform per-UE parameters required by the closed-form table entries.
static void uniform_dims(const SystemConfig& cfg, int& n_rx, int& l_n, int& n_tx_m) {
    n_rx = cfg.rx_antennas.front();
    l_n = cfg.streams.front();
    n_tx_m = cfg.tx_antennas.front();
    for (int v : cfg.rx_antennas)
        if (v != n_rx)
            throw ConfigError("flops: table formulas need uniform rx antennas");
    for (int v : cfg.streams)
        if (v != l_n)
            throw ConfigError("flops: table formulas need uniform streams");
    for (int v : cfg.tx_antennas)
        if (v != n_tx_m)
            throw ConfigError("flops: table formulas need uniform tx antennas");
}

FlopReport flops_du(const SystemConfig& cfg, const NeuralDims& dims) {
    int n_rx_n = 0, l_n = 0, n_tx_m = 0;
    uniform_dims(cfg, n_rx_n, l_n, n_tx_m);
    const double n = cfg.num_ues;
    const double m = cfg.num_rus;
    const double n_tx = cfg.total_tx();
    const double n_rx = cfg.total_rx();
    const double l = cfg.total_streams();

    FlopReport report;
    report.items.push_back(
        {"svd", "(2 N_tx N_rx_n^2 + 11 N_rx_n^3) N",
         round_half_up((2.0 * n_tx * n_rx_n * n_rx_n + 11.0 * std::pow(n_rx_n, 3)) * n)});
    report.items.push_back({"dimension_reduction", "(2 L_n N_rx_n N_tx) N",
                            round_half_up(2.0 * l_n * n_rx_n * n_tx * n)});
    report.items.push_back({"gram", "2 L^2 N_tx", round_half_up(2.0 * l * l * n_tx)});
    report.items.push_back({"inverse", "2 L^3 / 3", round_half_up(2.0 * l * l * l / 3.0)});
    report.items.push_back({"precoder_product", "2 N_tx L^2", round_half_up(2.0 * n_tx * l * l)});
    report.items.push_back(
        {"power_scaling", "2 min(L^2 N_tx_m, N_tx_m^2 L) M",
         round_half_up(2.0 * std::min(l * l * n_tx_m, double(n_tx_m) * n_tx_m * l) * m)});

    const double d = dims.hidden_neurons;
    const double b = dims.bits;
    const double per_ru_net = 2.0 * 2.0 * (b * d + 2.0 * d * n_tx_m) / 3.0;
    const double per_step = (per_ru_net + 2.0 * n_rx * (n_tx + l_n) + 3.0 * l) * m;
    report.items.push_back(
        {"neural_mq_per_gd_step",
         "(2*2 (B_m N_net + 2 N_net N_tx_m)/3 + 2 N_rx (N_tx + L_n) + 3 L) M per GD step",
         round_half_up(per_step)});
    return report;
}

FlopReport flops_ru(const SystemConfig& cfg, const NeuralDims& dims) {
    int n_rx_n = 0, l_n = 0, n_tx_m = 0;
    uniform_dims(cfg, n_rx_n, l_n, n_tx_m);
    const double n_tx = cfg.total_tx();
    const double l = cfg.total_streams();
    const double m = cfg.num_rus;
    const double d = dims.hidden_neurons;
    const double b = dims.bits;

    FlopReport report;
    report.items.push_back({"weight_application", "2 N_tx L", round_half_up(2.0 * n_tx * l)});
    report.items.push_back(
        {"neural_inference", "2 (B_m N_net + 2 N_net N_tx_m)/3 M",
         round_half_up(2.0 * (b * d + 2.0 * d * n_tx_m) / 3.0 * m)});
    return report;
}

OpCount op_count_vq(int num_rus, int bits) {
    const long long per_ru = 1LL << bits;
    return {num_rus * per_ru, per_ru};
}

OpCount op_count_mq(int num_rus, int bits) {
    const long long total = 1LL << (num_rus * bits);
    return {total, total};
}

OpCount op_count_smq(int num_rus, int bits) {
    const long long total = (long long)(num_rus) * (1LL << bits);
    return {total, total};
}

OpCount op_count_tree_mq(int num_rus, int bits) {
    const long long total = (long long)(bits) * (1LL << num_rus);
    return {total, total};
}

OpCount op_count_alpha_pmq(int iterations, double avg_set_size, int max_bits) {
    const long long per_search = 1LL << max_bits;
    return {(long long)(std::llround(double(iterations) * avg_set_size * double(per_search))),
            (long long)(iterations) * per_search};
}

OpCount op_count_neural_mq(const SystemConfig& cfg, const NeuralDims& dims, int gd_steps) {
    long long per_step = 0;
    for (int m = 0; m < cfg.num_rus; ++m) {
        const long long d = dims.hidden_neurons;
        const long long b = dims.bits;
        const long long k = dims.hidden_layers;
        per_step += d * (b + d * (k - 1) + 2LL * cfg.tx_antennas[std::size_t(m)]);
    }
    return {2LL * gd_steps * per_step, 2LL * gd_steps * per_step};
}

double cp_fronthaul_bits_per_use(double r_sum, double r_code, int n_tx_m, int streams, int b_cp,
                                 int reuse) {
    if (!(r_code > 0.0) || r_code > 1.0)
        throw ConfigError("overhead: code rate must lie in (0, 1]");
    if (reuse < 1)
        throw ConfigError("overhead: precoder reuse factor must be >= 1");
    return r_sum / r_code +
           double(n_tx_m) * double(streams) * double(b_cp) / double(reuse);
}

double pc_fronthaul_bits_per_use(int b_m) {
    return double(b_m);
}

double stream_bps(double bits_per_re, const OfdmGrid& grid) {
    if (grid.n_rb < 1 || grid.n_sc < 1 || grid.n_ofdm < 1 || grid.slots_per_sec < 1)
        throw ConfigError("overhead: OFDM grid fields must be positive");
    return bits_per_re * double(grid.n_rb) * double(grid.n_sc) * double(grid.n_ofdm) *
           double(grid.slots_per_sec);
}

double precoder_stream_bps(int b_w, int n_tx, int streams, const OfdmGrid& grid) {
    if (grid.n_rbg < 1)
        throw ConfigError("overhead: N_RBG must be positive");
    return double(b_w) * double(n_tx) * double(streams) *
           (double(grid.n_rb) / double(grid.n_rbg)) * double(grid.slots_per_sec);
}

std::string OverheadReport::to_csv() const {
    std::ostringstream out;
    out << "name,value\n";
    out << "cp_bits_per_use," << cp_bits_per_use << "\n";
    out << "pc_bits_per_use," << pc_bits_per_use << "\n";
    out << "cp_precoder_gbps," << cp_precoder_bps / 1e9 << "\n";
    out << "cp_data_gbps," << cp_data_bps / 1e9 << "\n";
    out << "pc_gbps," << pc_bps / 1e9 << "\n";
    out << "r_sum," << r_sum << "\n";
    out << "r_code," << r_code << "\n";
    out << "b_cp," << b_cp << "\n";
    out << "reuse," << reuse << "\n";
    out << "b_m," << b_m << "\n";
    out << "n_rb," << grid.n_rb << "\n";
    out << "n_rbg," << grid.n_rbg << "\n";
    return out.str();
}

} // namespace cfmq
