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

#include "cfmq/training.hpp"
#include "helpers.hpp"

using namespace cfmq;

namespace {

// Scalar training set with explicit targets: H = 1, W = 1, x = s.
TrainingSet explicit_scalar_set(const SystemConfig& cfg, const arma::cx_mat& symbols) {
    TrainingSet ts;
    ts.kind = EiKind::single_antenna;
    ts.channels.push_back(
        ChannelState{arma::eye<arma::cx_mat>(arma::uword(cfg.num_ues),
                                             arma::uword(cfg.num_rus))});
    PrecodingMatrix prec;
    prec.w = arma::eye<arma::cx_mat>(arma::uword(cfg.num_rus), arma::uword(cfg.num_ues));
    prec.ru_scale = arma::ones(arma::uword(cfg.num_rus));
    ts.precoders.push_back(std::move(prec));
    ts.symbols.push_back(SymbolBatch{symbols});
    return ts;
}

arma::cx_mat pm_one_targets(int count) {
    arma::cx_mat symbols(1, arma::uword(count), arma::fill::zeros);
    for (int i = 0; i < count; ++i)
        symbols(0, arma::uword(i)) = {i % 2 == 0 ? 1.0 : -1.0, 0.0};
    return symbols;
}

TrainingSet random_training_set(const SystemConfig& cfg, std::uint64_t seed, int channels,
                                int symbols) {
    ChannelScenario scenario;
    scenario.ru_positions.set_size(arma::uword(cfg.num_rus), 2);
    for (int m = 0; m < cfg.num_rus; ++m) {
        scenario.ru_positions(arma::uword(m), 0) = 40.0 * m;
        scenario.ru_positions(arma::uword(m), 1) = 0.0;
    }
    scenario.pathloss_exponent = 0.0;
    scenario.reference_loss_db = 0.0;
    return make_training_set(cfg, scenario, PrecoderKind::mmse,
                             cfg.is_scalar() ? EiKind::single_antenna
                                             : EiKind::multi_antenna,
                             channels, symbols, seed);
}

std::vector<double> effective_scalars(const LookupCodebook& book, double gamma) {
    std::vector<double> out;
    for (int j = 0; j < book.size(); ++j)
        out.push_back(gamma * book.codewords(0, arma::uword(j)).real());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves the parameters unchanged") {
        AdamState state(3);
        arma::vec params{1.0, -2.0, 0.5};
        const arma::vec before = params;
        state.update(params, arma::vec(3, arma::fill::zeros), AdamConfig{});
        CHECK(arma::norm(params - before) == doctest::Approx(0.0));
    }
    SUBCASE("three bias-corrected steps match hand-rolled arithmetic") {
        AdamConfig cfg;
        cfg.lr = 0.1;
        AdamState state(1);
        arma::vec params{0.0};
        const double grads[3] = {1.0, -0.5, 2.0};

        double m = 0.0, v = 0.0, theta = 0.0;
        for (int t = 1; t <= 3; ++t) {
            arma::vec g{grads[t - 1]};
            state.update(params, g, cfg);

            m = 0.9 * m + 0.1 * grads[t - 1];
            v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
            const double m_hat = m / (1.0 - std::pow(0.9, t));
            const double v_hat = v / (1.0 - std::pow(0.999, t));
            theta -= 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
            CHECK(params(0) == doctest::Approx(theta).epsilon(1e-12));
        }
    }
}

TEST_CASE("lloyd-max on the one-dimensional two-point source") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1, 1.0);
    const TrainingSet ts = explicit_scalar_set(cfg, pm_one_targets(200));

    std::vector<LookupCodebook> init(1);
    init[0].bits = 1;
    init[0].codewords = arma::cx_mat(1, 2, arma::fill::zeros);
    init[0].codewords(0, 0) = {0.4, 0.0};
    init[0].codewords(0, 1) = {-0.2, 0.0};

    LloydOptions opts;
    opts.rounds = 15;
    const TrainedLookup trained = lloyd_max_train(LookupKind::mq, cfg, ts, init, opts);

    // 1-D k-means on equal-mass {-1, +1}: codewords converge to the points
    // and the distortion to zero.
    const auto effective = effective_scalars(trained.books[0], trained.gamma(0));
    CHECK(effective[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(effective[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(trained.objective_trace.back() < 1e-12);
}

TEST_CASE("lloyd-max objective trace is non-increasing for VQ and MQ") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const SystemConfig cfg = test::scalar_config(2, 2, 2);
        const TrainingSet ts = random_training_set(cfg, seed, 6, 8);
        Rng init_rng(seed + 100);
        const auto init = init_codebooks_from_targets(cfg, ts, init_rng);

        for (LookupKind kind : {LookupKind::vq, LookupKind::mq}) {
            LloydOptions opts;
            opts.rounds = 12;
            const TrainedLookup trained = lloyd_max_train(kind, cfg, ts, init, opts);
            for (std::size_t r = 0; r + 1 < trained.objective_trace.size(); ++r)
                CHECK(trained.objective_trace[r + 1] <=
                      trained.objective_trace[r] +
                          1e-12 * std::max(1.0, trained.objective_trace[r]));
        }
    }
}

TEST_CASE("initializing at the optimum is a fixed point") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1, 1.0);
    const TrainingSet ts = explicit_scalar_set(cfg, pm_one_targets(100));
    std::vector<LookupCodebook> init(1);
    init[0].bits = 1;
    init[0].codewords = arma::cx_mat(1, 2, arma::fill::zeros);
    init[0].codewords(0, 0) = {-1.0, 0.0};
    init[0].codewords(0, 1) = {1.0, 0.0};

    LloydOptions opts;
    opts.rounds = 1;
    const TrainedLookup trained = lloyd_max_train(LookupKind::mq, cfg, ts, init, opts);
    const double g = trained.gamma(0);
    CHECK(g * trained.books[0].codewords(0, 0).real() == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(g * trained.books[0].codewords(0, 1).real() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("training is deterministic and reloaded books decide identically") {
    const SystemConfig cfg = test::scalar_config(2, 2, 2);
    const TrainingSet ts = random_training_set(cfg, 7, 5, 6);
    Rng init_a(55), init_b(55);
    LloydOptions opts;
    opts.rounds = 6;
    const TrainedLookup a =
        lloyd_max_train(LookupKind::smq, cfg, ts, init_codebooks_from_targets(cfg, ts, init_a),
                        opts);
    const TrainedLookup b =
        lloyd_max_train(LookupKind::smq, cfg, ts, init_codebooks_from_targets(cfg, ts, init_b),
                        opts);
    REQUIRE(a.objective_trace.size() == b.objective_trace.size());
    for (std::size_t i = 0; i < a.objective_trace.size(); ++i)
        CHECK(a.objective_trace[i] == b.objective_trace[i]);

    auto [reloaded, gamma] = codebooks_from_json(codebooks_to_json(a.books, a.gamma));
    const TrainingSet held_out = random_training_set(cfg, 8, 3, 4);
    for (std::size_t c = 0; c < held_out.channels.size(); ++c)
        for (arma::uword k = 0; k < held_out.symbols_per_channel(); ++k) {
            const QuantContext ctx = held_out.context(cfg, c, k, a.gamma);
            CHECK(smq_quantize(ctx, a.books).bits == smq_quantize(ctx, reloaded).bits);
        }
}

TEST_CASE("alpha-PMQ-trained assignments run through the same loop") {
    const SystemConfig cfg = test::scalar_config(3, 2, 1);
    const TrainingSet ts = random_training_set(cfg, 11, 5, 5);
    Rng init_rng(11);
    LloydOptions opts;
    opts.rounds = 4;
    opts.alpha = 0.5;
    const TrainedLookup trained = lloyd_max_train(
        LookupKind::alpha_pmq, cfg, ts, init_codebooks_from_targets(cfg, ts, init_rng), opts);
    CHECK(trained.objective_trace.size() == 4);
    CHECK(trained.books.size() == 3);
    for (double g : trained.gamma)
        CHECK(g > 0.0);
}

TEST_CASE("tree training on the uniform scalar source") {
    const SystemConfig cfg = test::scalar_config(1, 1, 2, 1.0 / 3.0);
    Rng source(17);
    arma::cx_mat symbols(1, 10000);
    for (auto& v : symbols)
        v = {source.uniform(-1.0, 1.0), 0.0};
    const TrainingSet ts = explicit_scalar_set(cfg, symbols);

    TreeTrainOptions opts;
    opts.lloyd_rounds = 8;
    Rng rng(18);
    const TrainedTrees trained = tree_codebook_train(cfg, ts, opts, rng);

    REQUIRE(trained.trees.size() == 1);
    REQUIRE(trained.trees[0].depth == 2);
    const double g = trained.gamma(0);

    // Level-1 centroids of the uniform source sit near -1/2 and +1/2, the
    // leaves near the four quartile midpoints.
    std::vector<double> level1;
    for (int j = 0; j < 2; ++j)
        level1.push_back(g * trained.trees[0].levels[0](0, arma::uword(j)).real());
    std::sort(level1.begin(), level1.end());
    CHECK(level1[0] == doctest::Approx(-0.5).epsilon(0.1));
    CHECK(level1[1] == doctest::Approx(0.5).epsilon(0.1));

    std::vector<double> leaves;
    for (int j = 0; j < 4; ++j)
        leaves.push_back(g * trained.trees[0].levels[1](0, arma::uword(j)).real());
    std::sort(leaves.begin(), leaves.end());
    const double expect[4] = {-0.75, -0.25, 0.25, 0.75};
    for (int j = 0; j < 4; ++j)
        CHECK(std::abs(leaves[std::size_t(j)] - expect[j]) < 0.05);

    // Per-level Lloyd traces never increase within a level.
    for (const auto& trace : trained.level_traces)
        for (std::size_t r = 0; r + 1 < trace.size(); ++r)
            CHECK(trace[r + 1] <= trace[r] + 1e-9);
}

TEST_CASE("depth-one tree training reduces to two-codeword Lloyd-Max") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1, 1.0 / 3.0);
    Rng source(19);
    arma::cx_mat symbols(1, 4000);
    for (auto& v : symbols)
        v = {source.uniform(-1.0, 1.0), 0.0};
    const TrainingSet ts = explicit_scalar_set(cfg, symbols);

    TreeTrainOptions topts;
    topts.lloyd_rounds = 10;
    Rng rng_a(20);
    const TrainedTrees tree = tree_codebook_train(cfg, ts, topts, rng_a);

    Rng rng_b(21);
    LloydOptions lopts;
    lopts.rounds = 10;
    const TrainedLookup lloyd = lloyd_max_train(
        LookupKind::mq, cfg, ts, init_codebooks_from_targets(cfg, ts, rng_b), lopts);

    LookupCodebook tree_leaves;
    tree_leaves.bits = 1;
    tree_leaves.codewords = tree.trees[0].leaves();
    const auto a = effective_scalars(tree_leaves, tree.gamma(0));
    const auto b = effective_scalars(lloyd.books[0], lloyd.gamma(0));
    for (int j = 0; j < 2; ++j)
        CHECK(a[std::size_t(j)] == doctest::Approx(b[std::size_t(j)]).epsilon(0.05));
}

TEST_CASE("neural training converges on the two-point toy") {
    const SystemConfig cfg = test::scalar_config(1, 1, 1, 1.0);
    const TrainingSet ts = explicit_scalar_set(cfg, pm_one_targets(64));

    Rng rng(23);
    NeuralCodebook net = NeuralCodebook::make(1, 1, 1, 1);
    net.randomize(rng);

    NeuralTrainOptions opts;
    opts.epochs = 500;
    opts.adam.lr = 0.02;
    opts.schedule.gd_steps = 60;
    opts.schedule.step_size = 0.5;
    const TrainedNeural trained = neural_train_adam(cfg, ts, {net}, opts);

    REQUIRE(trained.loss_trace.size() == 500);
    CHECK(trained.loss_trace.back() < 1e-2 * trained.loss_trace.front());

    // The two hard codewords land on the two source points.
    std::vector<double> points;
    for (double bit : {0.0, 1.0}) {
        const arma::cx_vec cw =
            trained.gamma(0) * neural_forward(trained.nets[0], arma::vec{bit});
        points.push_back(cw(0).real());
    }
    std::sort(points.begin(), points.end());
    CHECK(points[0] == doctest::Approx(-1.0).epsilon(0.1));
    CHECK(points[1] == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("sphere initializer puts codewords on the power sphere") {
    const SystemConfig cfg = test::multi_config(2, 2, 3, 2, 1, 2, 1.7);
    Rng rng(29);
    const auto books = init_codebooks_sphere(cfg, rng);
    for (const auto& book : books)
        for (int j = 0; j < book.size(); ++j)
            CHECK(arma::norm(book.codewords.col(arma::uword(j))) ==
                  doctest::Approx(std::sqrt(1.7)).epsilon(1e-9));
}

TEST_CASE("nested init doubles the codebook and keeps the trained codewords") {
    const SystemConfig cfg = test::scalar_config(2, 2, 1);
    Rng rng(31);
    std::vector<LookupCodebook> books = test::random_codebooks(cfg, rng);
    const arma::vec gamma{1.5, 0.5};
    const auto nested = nested_codebook_init(cfg, books, gamma, rng);
    REQUIRE(nested.size() == 2);
    for (int m = 0; m < 2; ++m) {
        CHECK(nested[std::size_t(m)].bits == 2);
        CHECK(nested[std::size_t(m)].codewords.n_cols == 4);
        for (int j = 0; j < 2; ++j)
            CHECK(arma::norm(nested[std::size_t(m)].codewords.col(arma::uword(j)) -
                             gamma(arma::uword(m)) *
                                 books[std::size_t(m)].codewords.col(arma::uword(j))) ==
                  doctest::Approx(0.0));
    }
}
