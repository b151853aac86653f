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
#include <string>
#include <vector>

#include "cfmq/quantizers.hpp"
#include "cfmq/types.hpp"

namespace cfmq {

/// Counts dense-layer multiply-accumulates so complexity claims can be
/// checked against closed-form operation counts.
struct MacCounter {
    long long macs = 0;
};

/// Small fully-connected codebook for one RU: input_bits inputs, hidden
/// tanh layers, and a linear output of 2 tx_antennas real values whose first
/// half is the real part of the codeword and second half the imaginary
/// part. hidden_layers = 0 degenerates to a single linear map.
struct NeuralCodebook {
    int input_bits = 0;     // B_m
    int hidden_neurons = 0; // D_m
    int hidden_layers = 0;  // K_m
    int out_dim = 0;        // 2 * tx_antennas[m]

    std::vector<arma::mat> weights;
    std::vector<arma::vec> biases;

    static NeuralCodebook make(int input_bits, int tx_antennas, int hidden_neurons,
                               int hidden_layers);

    /// He-style random init, deterministic through the supplied generator.
    void randomize(Rng& rng, double scale = 1.0);

    int layer_count() const { return int(weights.size()); }
    arma::uword param_count() const;
    arma::vec flatten() const;
    void unflatten(const arma::vec& params);
    void validate() const;
};

/// Per-layer inputs and pre-activations captured by a forward pass, enough
/// to run backprop.
struct NeuralTrace {
    std::vector<arma::vec> inputs; // inputs[k] feeds layer k; inputs[0] = u
    arma::vec output;              // linear output, length out_dim
};

/// Forward pass on a relaxed (or hard) bit vector u in [0,1]^B.
arma::cx_vec neural_forward(const NeuralCodebook& net, const arma::vec& u,
                            NeuralTrace* trace = nullptr, MacCounter* macs = nullptr);

/// Parameter-shaped gradients produced by backprop.
struct NeuralParamGrad {
    std::vector<arma::mat> d_weights;
    std::vector<arma::vec> d_biases;

    explicit NeuralParamGrad(const NeuralCodebook& net);
    void accumulate_flat(arma::vec& grad, arma::uword offset) const;
};

/// Backpropagates grad_output (d loss / d output) through the network.
/// Returns d loss / d u; when param_grad is non-null the weight and bias
/// gradients are accumulated into it.
arma::vec neural_backprop(const NeuralCodebook& net, const NeuralTrace& trace,
                          const arma::vec& grad_output, NeuralParamGrad* param_grad = nullptr,
                          MacCounter* macs = nullptr);

/// Element-wise sigmoid with temperature, 1 / (1 + exp(-x / tau)).
double sigmoid_tau(double x, double tau);
arma::vec sigmoid_tau(const arma::vec& x, double tau);

/// Annealing schedule of the relaxed search: I gradient steps with step
/// size eta and temperature tau_i = exp(-5 i / I), so tau is strictly
/// decreasing and ends at exp(-5).
struct AnnealSchedule {
    int gd_steps = 100;
    double step_size = 0.1;

    double temperature(int step) const; // step in 1..gd_steps
};

/// Relaxed objective sum_n EI_n(f(sigma_tau(r) | theta)) and its analytic
/// gradient with respect to r, exposed so finite-difference checks can probe
/// the exact quantities the solver uses.
double neural_mq_relaxed_objective(const EiWorkspace& ws,
                                   const std::vector<NeuralCodebook>& nets, const arma::vec& r,
                                   double tau, MacCounter* macs = nullptr);
arma::vec neural_mq_relaxed_gradient(const EiWorkspace& ws,
                                     const std::vector<NeuralCodebook>& nets, const arma::vec& r,
                                     double tau, MacCounter* macs = nullptr);

/// Gradient-based multivariate quantization: anneal the relaxed bits from
/// the all-zero start, harden with 1(r > 0), and report the hard forward
/// pass through every neural codebook. Throws NumericError on a non-finite
/// gradient.
QuantizationResult neural_mq_quantize(const QuantContext& ctx,
                                      const std::vector<NeuralCodebook>& nets,
                                      const AnnealSchedule& schedule, MacCounter* macs = nullptr);

/// Same machinery with the per-RU Euclidean objective ||x_m - f(.)||^2.
struct NeuralVqResult {
    std::vector<std::uint8_t> bits;
    arma::cx_vec codeword;
};

NeuralVqResult neural_vq_quantize(const arma::cx_vec& x_m, const NeuralCodebook& net,
                                  const AnnealSchedule& schedule, MacCounter* macs = nullptr);

/// Closed-form dense-layer MAC count of one forward pass,
/// D(B + D(K-1) + 2 N_tx) for K >= 1 and B * 2 N_tx for K = 0.
long long neural_forward_mac_count(const NeuralCodebook& net);

// ---------------------------------------------------------------------------
// Checkpoint format: an 8-byte little-endian header length, a JSON header
// (dims and activation name per RU), then all weights and biases as
// little-endian float64 in layer order (weights column-major, then bias).
// ---------------------------------------------------------------------------

void save_neural_codebooks(const std::string& path, const std::vector<NeuralCodebook>& nets,
                           const arma::vec& gamma);
std::pair<std::vector<NeuralCodebook>, arma::vec> load_neural_codebooks(const std::string& path);

} // namespace cfmq
