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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfmq/accounting.hpp"
#include "helpers.hpp"

using namespace cfmq;

namespace {

SystemConfig reference_config() {
    // M = 4 RUs with 16 antennas, N = 16 UEs with 4 antennas, one stream.
    return test::multi_config(4, 16, 16, 4, 1, 64);
}

} // namespace

TEST_CASE("DU flop table matches the reference integers") {
    NeuralDims dims;
    dims.bits = 64;
    dims.hidden_layers = 1;

    const FlopReport report = flops_du(reference_config(), dims);
    CHECK(report.find("svd").flops == 44032);
    CHECK(report.find("dimension_reduction").flops == 8192);
    CHECK(report.find("gram").flops == 32768);
    CHECK(report.find("inverse").flops == 2731);
    CHECK(report.find("precoder_product").flops == 32768);
    CHECK(report.find("power_scaling").flops == 32768);

    const long long expect[4] = {66240, 43712, 38592, 36032};
    const int hidden[4] = {64, 20, 10, 5};
    for (int i = 0; i < 4; ++i) {
        dims.hidden_neurons = hidden[i];
        CHECK(flops_du(reference_config(), dims).find("neural_mq_per_gd_step").flops ==
              expect[i]);
    }
}

TEST_CASE("RU flop table matches the reference integers") {
    NeuralDims dims;
    dims.bits = 64;
    dims.hidden_layers = 1;
    const FlopReport base = flops_ru(reference_config(), dims);
    CHECK(base.find("weight_application").flops == 2048);

    const long long expect[4] = {16384, 5120, 2560, 1280};
    const int hidden[4] = {64, 20, 10, 5};
    for (int i = 0; i < 4; ++i) {
        dims.hidden_neurons = hidden[i];
        CHECK(flops_ru(reference_config(), dims).find("neural_inference").flops == expect[i]);
    }
}

TEST_CASE("flop report CSV carries one row per line item") {
    NeuralDims dims;
    const FlopReport report = flops_du(reference_config(), dims);
    const std::string csv = report.to_csv();
    CHECK(csv.find("svd") != std::string::npos);
    CHECK(csv.find("44032") != std::string::npos);
    CHECK(report.total() > 0);
    CHECK_THROWS_AS(report.find("nonexistent"), ConfigError);
}

TEST_CASE("operation counts") {
    CHECK(op_count_smq(4, 3).total == 32);
    CHECK(op_count_tree_mq(2, 3).total == 12);
    CHECK(op_count_mq(6, 2).total == 4096);
    CHECK(op_count_vq(4, 3).total == 32);
    CHECK(op_count_vq(4, 3).parallel == 8);
    CHECK(op_count_alpha_pmq(5, 2.0, 3).parallel == 5 * 8);
    CHECK(op_count_alpha_pmq(5, 2.0, 3).total == 80);

    const SystemConfig cfg = test::multi_config(2, 2, 4, 2, 1, 8);
    NeuralDims dims;
    dims.bits = 8;
    dims.hidden_neurons = 8;
    dims.hidden_layers = 1;
    // 2 I sum_m D (B + D(K-1) + 2 N_tx) = 2 * 10 * 2 * 8 * (8 + 0 + 8).
    CHECK(op_count_neural_mq(cfg, dims, 10).total == 2 * 10 * 2 * 8 * 16);
}

TEST_CASE("CP overhead equation") {
    SUBCASE("large-scale reference point lands on 67") {
        const double b = cp_fronthaul_bits_per_use(64.0, 1.0, 8, 16, 16, 672);
        CHECK(std::abs(b - 67.0) < 0.1);
    }
    SUBCASE("zero precoding bits leave only the coded data term") {
        CHECK(cp_fronthaul_bits_per_use(48.0, 0.5, 8, 16, 0, 100) == doctest::Approx(96.0));
    }
    SUBCASE("main-experiment configuration lands on 65") {
        const double b = cp_fronthaul_bits_per_use(32.0, 0.5, 16, 8, 16, 2016);
        CHECK(b == doctest::Approx(65.0159).epsilon(1e-3));
    }
    SUBCASE("monotone in reuse, bits and sum rate") {
        const double base = cp_fronthaul_bits_per_use(64.0, 1.0, 8, 16, 16, 672);
        CHECK(cp_fronthaul_bits_per_use(64.0, 1.0, 8, 16, 16, 1344) < base);
        CHECK(cp_fronthaul_bits_per_use(64.0, 1.0, 8, 16, 32, 672) > base);
        CHECK(cp_fronthaul_bits_per_use(80.0, 1.0, 8, 16, 16, 672) > base);
    }
    SUBCASE("invalid code rate rejected") {
        CHECK_THROWS_AS(cp_fronthaul_bits_per_use(64.0, 0.0, 8, 16, 16, 672), ConfigError);
    }
}

TEST_CASE("bits-per-second totals") {
    OfdmGrid grid;
    grid.n_rb = 273;
    grid.n_rbg = 4;

    SUBCASE("PC stream is 0.0917 Gbps per fronthaul bit") {
        const double gbps = stream_bps(1.0, grid) / 1e9;
        CHECK(std::abs(gbps - 0.0917) < 5e-5);
    }
    SUBCASE("CP precoder stream reference point") {
        CHECK(precoder_stream_bps(16, 64, 16, grid) / 1e9 == doctest::Approx(2.24).epsilon(0.005));
    }
    SUBCASE("CP data stream reference point") {
        CHECK(stream_bps(8.0 * 16.0, grid) / 1e9 == doctest::Approx(11.74).epsilon(0.001));
    }
    SUBCASE("PC bits per use ignore antennas and streams by construction") {
        CHECK(pc_fronthaul_bits_per_use(7) == doctest::Approx(7.0));
    }
}
