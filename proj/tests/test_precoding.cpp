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

#include "cfmq/precoding.hpp"
#include "helpers.hpp"

using namespace cfmq;

TEST_CASE("mmse precoder: scalar magnitude is sqrt(P) independent of the channel") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1, 2.5);
    Rng rng(1);
    for (int trial = 0; trial < 8; ++trial) {
        ChannelState channel{arma::cx_mat(1, 1)};
        channel.h(0, 0) = rng.cnormal();
        if (std::abs(channel.h(0, 0)) < 1e-3)
            continue;
        const PrecodingMatrix prec = mmse_precoder(channel, cfg);
        CHECK(std::abs(prec.w(0, 0)) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-9));
    }
}

TEST_CASE("mmse precoder: per-RU power is met exactly") {
    Rng rng(2);
    for (const SystemConfig& cfg :
         {test::multi_config(3, 2, 2, 2, 1, 1, 1.7), test::multi_config(2, 2, 4, 3, 2, 1, 0.4),
          test::scalar_config(4, 3, 1, 2.0)}) {
        for (int trial = 0; trial < 5; ++trial) {
            const ChannelState channel = test::random_channel(cfg, rng);
            const PrecodingMatrix prec = mmse_precoder(channel, cfg);
            for (int m = 0; m < cfg.num_rus; ++m) {
                const arma::cx_mat w_m = prec.ru_rows(cfg, m);
                const double power = std::real(arma::trace(w_m * w_m.t()));
                CHECK(power ==
                      doctest::Approx(cfg.power[std::size_t(m)]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("mmse precoder: L_n = n_rx case matches an independent re-derivation") {
    // With full streams the per-UE reduction is a unitary row mixing, so the
    // precoder must equal the one computed directly from H.
    Rng rng(3);
    const SystemConfig cfg = test::multi_config(2, 2, 3, 2, 2, 1, 1.3);
    const ChannelState channel = test::random_channel(cfg, rng);
    const PrecodingMatrix prec = mmse_precoder(channel, cfg);

    const double xi = double(cfg.total_rx()) / cfg.total_power();
    const arma::cx_mat gram =
        channel.h * channel.h.t() + xi * arma::eye<arma::cx_mat>(4, 4);
    arma::cx_mat expect = channel.h.t() * arma::inv(gram);
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int r0 = cfg.ru_col_offset(m);
        arma::cx_mat rows = expect.rows(arma::uword(r0), arma::uword(r0 + 2));
        const double energy = std::real(arma::trace(rows.t() * rows));
        expect.rows(arma::uword(r0), arma::uword(r0 + 2)) *=
            std::sqrt(cfg.power[std::size_t(m)] / energy);
    }
    CHECK(arma::norm(prec.w - expect, "fro") / arma::norm(expect, "fro") < 1e-9);

    // The SVD path (L_n < n_rx) yields the documented shapes.
    const SystemConfig reduced_cfg = test::multi_config(2, 2, 3, 2, 1, 1);
    const PrecodingMatrix reduced = mmse_precoder(channel, reduced_cfg);
    CHECK(reduced.w.n_rows == 6);
    CHECK(reduced.w.n_cols == 2);
}

TEST_CASE("zero-forcing precoder on a unitary channel") {
    Rng rng(4);
    const int n = 4;
    arma::cx_mat q, r;
    arma::qr(q, r, test::random_cx_mat(n, n, rng));
    const SystemConfig cfg = test::scalar_config(n, n, 1, 1.5);
    const ChannelState channel{q};
    const PrecodingMatrix prec = zero_forcing_precoder(channel, cfg);

    const double expect_scale = std::sqrt(double(n) * 1.5 / double(n));
    CHECK(arma::norm(prec.w - expect_scale * q.t(), "fro") < 1e-9);
    const arma::cx_mat prod = q * prec.w;
    CHECK(arma::norm(prod - expect_scale * arma::eye<arma::cx_mat>(n, n), "fro") < 1e-9);
}

TEST_CASE("zero-forcing precoder: total power identity and diagonalization") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemConfig cfg = test::scalar_config(3, 3, 1, 0.8);
        const ChannelState channel = test::random_channel(cfg, rng);
        const PrecodingMatrix prec = zero_forcing_precoder(channel, cfg);
        // E||W s||^2 = tr(W W^H) for unit-covariance symbols.
        const double total = std::real(arma::trace(prec.w * prec.w.t()));
        CHECK(total == doctest::Approx(cfg.total_power()).epsilon(1e-9));

        const arma::cx_mat prod = channel.h * prec.w;
        arma::cx_mat off = prod;
        off.diag().zeros();
        CHECK(arma::norm(off, "fro") < 1e-8 * arma::norm(prod, "fro") + 1e-10);
        for (arma::uword i = 1; i < prod.n_rows; ++i)
            CHECK(std::abs(prod(i, i) - prod(0, 0)) < 1e-8 * std::abs(prod(0, 0)));
    }
}

TEST_CASE("cp_average_channel") {
    Rng rng(6);
    const arma::cx_mat h = test::random_cx_mat(3, 4, rng);
    SUBCASE("single element") {
        const ChannelState out = cp_average_channel({ChannelState{h}});
        CHECK(arma::norm(out.h - h, "fro") == doctest::Approx(0.0));
    }
    SUBCASE("opposite pair cancels") {
        const ChannelState out = cp_average_channel({ChannelState{h}, ChannelState{-h}});
        CHECK(arma::norm(out.h, "fro") == doctest::Approx(0.0));
    }
    SUBCASE("three random matrices match a direct mean") {
        const arma::cx_mat a = test::random_cx_mat(3, 4, rng);
        const arma::cx_mat b = test::random_cx_mat(3, 4, rng);
        const ChannelState out =
            cp_average_channel({ChannelState{h}, ChannelState{a}, ChannelState{b}});
        arma::cx_mat expect(3, 4);
        for (arma::uword i = 0; i < expect.n_elem; ++i)
            expect(i) = (h(i) + a(i) + b(i)) / 3.0;
        CHECK(arma::norm(out.h - expect, "fro") < 1e-12);
    }
    SUBCASE("empty list rejected") {
        CHECK_THROWS_AS(cp_average_channel({}), ConfigError);
    }
}

TEST_CASE("cp precoder quantization") {
    const SystemConfig cfg = test::multi_config(2, 2, 2, 1, 1, 1, 1.0);
    const double sigma_w =
        std::sqrt(cfg.total_power() / (2.0 * cfg.total_tx() * cfg.total_streams()));
    const double range = 1.96 * sigma_w;

    SUBCASE("zero entry lands within half a step per axis") {
        arma::cx_mat w(1, 1, arma::fill::zeros);
        const QuantizedPrecoder q = cp_quantize_precoder(w, 4, cfg);
        const double step = 2.0 * range / 4.0;
        CHECK(std::abs(q.w_hat(0, 0).real()) <= step / 2 + 1e-15);
        CHECK(std::abs(q.w_hat(0, 0).imag()) <= step / 2 + 1e-15);
    }
    SUBCASE("the upper range edge clamps to the top level center") {
        arma::cx_mat w(1, 1);
        w(0, 0) = {range, 0.0};
        const QuantizedPrecoder q = cp_quantize_precoder(w, 4, cfg);
        const double step = 2.0 * range / 4.0;
        CHECK(q.w_hat(0, 0).real() == doctest::Approx(range - step / 2));
    }
    SUBCASE("high-rate quantization is near lossless for in-range entries") {
        Rng rng(7);
        arma::cx_mat w(4, 4);
        for (auto& v : w)
            v = {rng.uniform(-range, range), rng.uniform(-range, range)};
        const QuantizedPrecoder q = cp_quantize_precoder(w, 32, cfg);
        const double step_half = range / double(1 << 16);
        double max_err = 0.0;
        for (arma::uword i = 0; i < w.n_elem; ++i)
            max_err = std::max({max_err, std::abs(w(i).real() - q.w_hat(i).real()),
                                std::abs(w(i).imag() - q.w_hat(i).imag())});
        CHECK(max_err <= step_half + 1e-15);
        CHECK(max_err < 1e-4 * sigma_w);
    }
    SUBCASE("more bits never increase the max entry error") {
        Rng rng(8);
        arma::cx_mat w(3, 3);
        for (auto& v : w)
            v = 2.5 * sigma_w * rng.cnormal(); // includes out-of-range entries
        double prev = std::numeric_limits<double>::infinity();
        for (int bits : {2, 4, 6, 8, 10, 12}) {
            const QuantizedPrecoder q = cp_quantize_precoder(w, bits, cfg);
            double max_err = 0.0;
            for (arma::uword i = 0; i < w.n_elem; ++i)
                max_err = std::max(max_err, std::abs(w(i) - q.w_hat(i)));
            CHECK(max_err <= prev + 1e-15);
            prev = max_err;
        }
    }
    SUBCASE("odd bit widths are rejected") {
        arma::cx_mat w(1, 1, arma::fill::zeros);
        CHECK_THROWS_AS(cp_quantize_precoder(w, 3, cfg), ConfigError);
    }
}
