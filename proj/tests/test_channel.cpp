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

#include "cfmq/channel.hpp"
#include "helpers.hpp"

using namespace cfmq;

namespace {

ChannelScenario pinned_scenario(double ru_x, double ue_x, double exponent, double ref_db) {
    ChannelScenario sc;
    sc.ru_positions = arma::mat{{ru_x, 0.0}};
    sc.ue_box_min_x = sc.ue_box_max_x = ue_x;
    sc.ue_box_min_y = sc.ue_box_max_y = 0.0;
    sc.pathloss_exponent = exponent;
    sc.reference_loss_db = ref_db;
    return sc;
}

} // namespace

TEST_CASE("disabled pathloss gives unit-variance entries") {
    const SystemConfig cfg = test::multi_config(1, 1, 10, 10, 1, 1);
    ChannelScenario sc = pinned_scenario(0.0, 25.0, 0.0, 0.0);
    Rng rng(1);
    double power = 0.0;
    arma::uword count = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const ChannelState h = generate_channel(cfg, sc, rng);
        power += std::real(arma::accu(h.h % arma::conj(h.h)));
        count += h.h.n_elem;
    }
    CHECK(std::abs(power / double(count) - 1.0) < 0.05);
}

TEST_CASE("doubling distance with exponent 2 quarters the entry variance") {
    const SystemConfig cfg = test::multi_config(1, 1, 10, 10, 1, 1);
    Rng rng_a(2), rng_b(2);
    ChannelScenario near = pinned_scenario(0.0, 10.0, 2.0, 0.0);
    ChannelScenario far = pinned_scenario(0.0, 20.0, 2.0, 0.0);
    double p_near = 0.0, p_far = 0.0;
    arma::uword count = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const ChannelState a = generate_channel(cfg, near, rng_a);
        const ChannelState b = generate_channel(cfg, far, rng_b);
        p_near += std::real(arma::accu(a.h % arma::conj(a.h)));
        p_far += std::real(arma::accu(b.h % arma::conj(b.h)));
        count += a.h.n_elem;
    }
    CHECK(std::abs((p_far / p_near) - 0.25) < 0.02);
}

TEST_CASE("same seed reproduces the channel bit for bit") {
    const SystemConfig cfg = test::multi_config(2, 3, 2, 2, 1, 1);
    ChannelScenario sc;
    sc.ru_positions = arma::mat{{0.0, 0.0}, {40.0, 0.0}};
    Rng a(77), b(77);
    const ChannelState ha = generate_channel(cfg, sc, a);
    const ChannelState hb = generate_channel(cfg, sc, b);
    CHECK(arma::norm(ha.h - hb.h, "fro") == 0.0);
}

TEST_CASE("gain normalization rescales by the RMS pathloss") {
    const SystemConfig cfg = test::multi_config(1, 1, 4, 4, 1, 1);
    ChannelScenario raw = pinned_scenario(0.0, 50.0, 3.0, 30.0);
    ChannelScenario norm = raw;
    norm.normalize_gain = true;
    Rng a(5), b(5);
    const ChannelState h_raw = generate_channel(cfg, raw, a);
    const ChannelState h_norm = generate_channel(cfg, norm, b);
    const double gain = pathloss_gain(50.0, 3.0, 30.0);
    CHECK(arma::norm(h_norm.h * std::sqrt(gain) - h_raw.h, "fro") /
              arma::norm(h_raw.h, "fro") <
          1e-12);
}

TEST_CASE("orthogonal pilots: square case is a scaled unitary with two-sided inverse") {
    const SystemConfig cfg = test::scalar_config(1, 2, 1);
    Rng rng(3);
    const PilotBlock block = generate_pilots(cfg, 2, rng);
    CHECK(block.orthogonal_across_ues);
    const arma::cx_mat gram = block.pilots * block.pilots.t();
    CHECK(arma::norm(gram - 2.0 * arma::eye<arma::cx_mat>(2, 2), "fro") < 1e-12);
    const arma::cx_mat pinv = arma::pinv(block.pilots);
    CHECK(arma::norm(block.pilots * pinv - arma::eye<arma::cx_mat>(2, 2), "fro") < 1e-12);
    CHECK(arma::norm(pinv * block.pilots - arma::eye<arma::cx_mat>(2, 2), "fro") < 1e-12);
}

TEST_CASE("orthogonal pilots: cross-UE products vanish and per-UE right inverse holds") {
    SystemConfig cfg = test::multi_config(1, 2, 2, 2, 1, 1);
    Rng rng(4);
    const PilotBlock block = generate_pilots(cfg, 4, rng);
    const arma::cx_mat s0 = block.ue_rows(cfg, 0);
    const arma::cx_mat s1 = block.ue_rows(cfg, 1);
    CHECK(arma::norm(s1 * arma::pinv(s0), "fro") < 1e-12);
    CHECK(arma::norm(s0 * arma::pinv(s1), "fro") < 1e-12);
    CHECK(arma::norm(s0 * arma::pinv(s0) - arma::eye<arma::cx_mat>(1, 1), "fro") < 1e-12);

    // Multi-stream UEs keep the identity too.
    SystemConfig cfg2 = test::multi_config(1, 2, 4, 2, 2, 1);
    const PilotBlock block2 = generate_pilots(cfg2, 8, rng);
    const arma::cx_mat b0 = block2.ue_rows(cfg2, 0);
    CHECK(arma::norm(b0 * arma::pinv(b0) - arma::eye<arma::cx_mat>(2, 2), "fro") < 1e-12);
}

TEST_CASE("pilot design rejects too few pilots") {
    SystemConfig cfg = test::multi_config(1, 1, 4, 4, 3, 1);
    Rng rng(5);
    CHECK_THROWS_AS(generate_pilots(cfg, 2, rng), ConfigError);
}

TEST_CASE("ml estimate is exact without noise or quantization") {
    const SystemConfig cfg = test::multi_config(2, 2, 2, 2, 1, 1);
    Rng rng(6);
    const ChannelState channel = test::random_channel(cfg, rng);
    const PrecodingMatrix prec = test::random_precoder(cfg, rng);
    const PilotBlock pilots = generate_pilots(cfg, 4, rng);

    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_mat x_p = prec.w * pilots.pilots; // unquantized pilot transmission
        const arma::cx_mat y_p = channel.ue_rows(cfg, n) * x_p;
        const arma::cx_mat truth = channel.ue_rows(cfg, n) * prec.ue_cols(cfg, n);
        const ChannelEstimate est = ml_pilot_estimate(y_p, pilots.ue_rows(cfg, n), &truth);
        CHECK(arma::norm(est.g_hat - truth, "fro") < 1e-12);
        CHECK(arma::norm(est.error, "fro") < 1e-12);
    }
}

TEST_CASE("zero received pilots estimate a zero channel") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1);
    Rng rng(7);
    const PilotBlock pilots = generate_pilots(cfg, 4, rng);
    const arma::cx_mat y(1, 4, arma::fill::zeros);
    const ChannelEstimate est = ml_pilot_estimate(y, pilots.ue_rows(cfg, 0));
    CHECK(arma::norm(est.g_hat, "fro") == doctest::Approx(0.0));
}

TEST_CASE("estimation error decomposes term by term") {
    const SystemConfig cfg = test::multi_config(2, 2, 2, 2, 1, 1);
    Rng rng(8);
    const ChannelState channel = test::random_channel(cfg, rng);
    const PrecodingMatrix prec = test::random_precoder(cfg, rng);
    const PilotBlock pilots = generate_pilots(cfg, 4, rng);

    // Quantized-ish pilot transmission: perturb the precoded pilots.
    const arma::cx_mat x_p = prec.w * pilots.pilots;
    const arma::cx_mat x_hat = x_p + 0.1 * test::random_cx_mat(x_p.n_rows, x_p.n_cols, rng);

    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_mat z = test::random_cx_mat(2, 4, rng);
        const arma::cx_mat y_p = channel.ue_rows(cfg, n) * x_hat + z;
        const arma::cx_mat truth = channel.ue_rows(cfg, n) * prec.ue_cols(cfg, n);
        const ChannelEstimate est = ml_pilot_estimate(y_p, pilots.ue_rows(cfg, n), &truth);

        const arma::cx_mat right_pinv = arma::pinv(pilots.ue_rows(cfg, n));
        const arma::cx_mat expect =
            channel.ue_rows(cfg, n) * x_hat * right_pinv - truth + z * right_pinv;
        CHECK(arma::norm(est.error - expect, "fro") / arma::norm(expect, "fro") < 1e-10);
    }
}

TEST_CASE("noise-induced error power decays like 1/N_p") {
    const SystemConfig cfg = test::multi_config(1, 1, 2, 2, 2, 1);
    Rng rng(9);
    const double sigma2 = 0.5;
    double power4 = 0.0, power16 = 0.0;
    const int trials = 10000;
    for (int pilot_count : {4, 16}) {
        const PilotBlock pilots = generate_pilots(cfg, pilot_count, rng);
        const arma::cx_mat right_pinv = arma::pinv(pilots.ue_rows(cfg, 0));
        double acc = 0.0;
        for (int t = 0; t < trials; ++t) {
            arma::cx_mat z(2, arma::uword(pilot_count));
            for (auto& v : z)
                v = std::sqrt(sigma2) * rng.cnormal();
            const arma::cx_mat term = z * right_pinv;
            acc += std::real(arma::accu(term % arma::conj(term)));
        }
        (pilot_count == 4 ? power4 : power16) = acc / trials;
    }
    CHECK(std::abs(power4 / power16 - 4.0) < 0.4); // within 10%
}
