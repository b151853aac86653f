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

#include "cfmq/channel.hpp"
#include "cfmq/neural.hpp"
#include "cfmq/quantizers.hpp"

namespace cfmq {

enum class PrecoderKind { mmse, zero_forcing };

/// Paired channel and symbol draws used to fit codebooks: C channel
/// realizations, each with its precoder, receive beamformers (for the
/// multi-antenna EI) and S symbol vectors.
struct TrainingSet {
    EiKind kind = EiKind::single_antenna;
    std::vector<ChannelState> channels;
    std::vector<PrecodingMatrix> precoders;
    std::vector<std::vector<arma::cx_mat>> beamformers; // per channel, per UE
    std::vector<SymbolBatch> symbols;                   // per channel

    arma::uword symbols_per_channel() const {
        return symbols.empty() ? 0 : symbols.front().count();
    }
    arma::uword pair_count() const {
        return arma::uword(channels.size()) * symbols_per_channel();
    }
    void pair_location(arma::uword pair, std::size_t& channel, arma::uword& symbol) const;

    /// Context for one training pair; gamma is borrowed by the workspace for
    /// the duration of the call.
    QuantContext context(const SystemConfig& cfg, std::size_t channel, arma::uword symbol,
                         const arma::vec& gamma) const;

    /// Per-RU precoded segment x_m = W_m s of one pair.
    arma::cx_vec precoded_segment(const SystemConfig& cfg, std::size_t channel,
                                  arma::uword symbol, int ru) const;
};

/// Seeded end-to-end draw of a training set. All randomness comes from
/// substreams of master_seed, so two calls produce identical sets.
TrainingSet make_training_set(const SystemConfig& cfg, const ChannelScenario& scenario,
                              PrecoderKind precoder, EiKind kind, int channel_draws,
                              int symbols_per_channel, std::uint64_t master_seed);

// ---------------------------------------------------------------------------
// Codebook initialization
// ---------------------------------------------------------------------------

/// Codewords sampled from the precoded training targets of each RU.
std::vector<LookupCodebook> init_codebooks_from_targets(const SystemConfig& cfg,
                                                        const TrainingSet& ts, Rng& rng);

/// Codewords drawn uniformly from the sphere of radius sqrt(P_m).
std::vector<LookupCodebook> init_codebooks_sphere(const SystemConfig& cfg, Rng& rng);

/// Doubles a trained codebook into a (bits+1)-bit init: the old codewords
/// plus jittered copies, for nested fronthaul sweeps.
std::vector<LookupCodebook> nested_codebook_init(const SystemConfig& cfg,
                                                 const std::vector<LookupCodebook>& trained,
                                                 const arma::vec& gamma, Rng& rng);

// ---------------------------------------------------------------------------
// Lloyd-Max training of lookup codebooks
// ---------------------------------------------------------------------------

enum class LookupKind { vq, mq, smq, alpha_pmq };

struct LloydOptions {
    int rounds = 10;
    double alpha = 0.5;      // alpha-PMQ assignments only
    int pmq_iterations = 0;  // alpha-PMQ T; 0 means one full schedule cycle
    long long mq_cap = kDefaultMqCap;
    int threads = 1;
};

struct TrainedLookup {
    std::vector<LookupCodebook> books;
    arma::vec gamma;
    std::vector<double> objective_trace; // recorded at each assignment phase
};

/// Alternates (a) quantizing every training pair with the scheme's own
/// quantizer and (b) re-fitting the codewords. For VQ the re-fit is the
/// per-cluster mean; for the EI schemes it is the joint damped least-squares
/// solve over all assigned codewords, which is the exact minimizer of the
/// empirical sum-EI at fixed assignments. Codewords that received no
/// assignments keep their previous value. Returned codebooks satisfy
/// mean ||c||^2 = P_m over the final assignments, with the residual scale in
/// gamma.
TrainedLookup lloyd_max_train(LookupKind kind, const SystemConfig& cfg, const TrainingSet& ts,
                              std::vector<LookupCodebook> init, const LloydOptions& options);

inline constexpr double kRefitDamping = 1e-9;

// ---------------------------------------------------------------------------
// Tree codebook training
// ---------------------------------------------------------------------------

struct TreeTrainOptions {
    int lloyd_rounds = 6; // per level
    long long cap = kDefaultMqCap;
    int threads = 1;
};

struct TrainedTrees {
    std::vector<TreeCodebook> trees;
    arma::vec gamma;
    std::vector<std::vector<double>> level_traces; // one trace per level
};

/// Sequential per-level Lloyd-Max: level b is trained with tree-MQ
/// assignments at depth b (earlier levels frozen), and each parent's
/// children are seeded by a 2-means split of the parent's assigned training
/// samples. Empty clusters duplicate the parent with a small jitter.
TrainedTrees tree_codebook_train(const SystemConfig& cfg, const TrainingSet& ts,
                                 const TreeTrainOptions& options, Rng& rng);

// ---------------------------------------------------------------------------
// Adam and neural codebook training
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    arma::vec m;
    arma::vec v;
    long long step = 0;

    explicit AdamState(arma::uword n)
        : m(n, arma::fill::zeros), v(n, arma::fill::zeros) {}

    /// One bias-corrected update in place.
    void update(arma::vec& params, const arma::vec& grad, const AdamConfig& cfg);
};

struct NeuralTrainOptions {
    int epochs = 100;
    AdamConfig adam;
    AnnealSchedule schedule;     // inner quantization
    int steps_per_epoch = 1;     // Adam steps per epoch
    bool bits_per_step = false;  // re-quantize before every Adam step instead of once per epoch
    int threads = 1;
    double divergence_factor = 1e6;
};

struct TrainedNeural {
    std::vector<NeuralCodebook> nets;
    arma::vec gamma;
    std::vector<double> loss_trace; // mean objective per epoch
};

/// Adam on the empirical sum-EI: each epoch re-quantizes every pair with
/// neural-MQ, then updates theta with the hard bits held fixed. Aborts with
/// NumericError when the loss exceeds divergence_factor times its start.
TrainedNeural neural_train_adam(const SystemConfig& cfg, const TrainingSet& ts,
                                std::vector<NeuralCodebook> init,
                                const NeuralTrainOptions& options);

/// Same loop with the per-RU Euclidean objective sum_m ||x_m - f(b_m)||^2
/// and bits from neural-VQ.
TrainedNeural neural_vq_train_adam(const SystemConfig& cfg, const TrainingSet& ts,
                                   std::vector<NeuralCodebook> init,
                                   const NeuralTrainOptions& options);

} // namespace cfmq
