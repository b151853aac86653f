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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfmq/rng.hpp"

namespace cfmq {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid dimensions, parameters or file contents.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A requested search space exceeds the configured cap.
class ComplexityError : public Error {
  public:
    using Error::Error;
};

/// Degenerate channel, rank deficiency, non-finite gradient, divergence.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Dimensions and budgets of the cell-free system: M radio units with
/// per-RU transmit antennas, fronthaul bits and power, and N user
/// equipments with per-UE receive antennas and stream counts.
struct SystemConfig {
    int num_rus = 0;                 // M
    int num_ues = 0;                 // N
    std::vector<int> tx_antennas;    // per RU
    std::vector<int> rx_antennas;    // per UE
    std::vector<int> streams;        // per UE, L[n] <= rx_antennas[n]
    std::vector<int> fronthaul_bits; // per RU, bits per channel use
    std::vector<double> power;       // per RU, linear watts
    double noise_var = 1.0;          // receiver noise variance, linear watts

    int total_tx() const;      // sum of tx_antennas
    int total_rx() const;      // sum of rx_antennas
    int total_streams() const; // sum of streams

    int ru_col_offset(int m) const;    // first antenna column of RU m
    int ue_row_offset(int n) const;    // first receive row of UE n
    int ue_stream_offset(int n) const; // first stream entry of UE n

    double total_power() const;

    /// Throws ConfigError when any invariant is violated.
    void validate() const;

    /// All-scalar system: every RU has one antenna, every UE one antenna
    /// and one stream. Several quantizer objectives specialize to this case.
    bool is_scalar() const;
};

/// Complex channel matrix H of size total_rx x total_tx with RU-block and
/// UE-block views. Concatenating the UE row blocks in order reconstructs H.
struct ChannelState {
    arma::cx_mat h;

    arma::cx_mat ue_rows(const SystemConfig& cfg, int n) const;          // H_n
    arma::cx_mat block(const SystemConfig& cfg, int m, int n) const;     // H_{m,n}
    arma::cx_mat ru_cols(const SystemConfig& cfg, int m) const;          // columns of RU m
};

/// Batch of transmit symbol vectors, one column per channel use. Entries are
/// zero mean with identity covariance in expectation.
struct SymbolBatch {
    arma::cx_mat symbols; // total_streams x count

    arma::uword count() const { return symbols.n_cols; }
    arma::cx_vec use(arma::uword k) const { return symbols.col(k); }
    arma::cx_mat ue_rows(const SystemConfig& cfg, int n) const; // s_n rows
};

/// Precoded transmit vector x = W s, partitioned per RU.
struct PrecodedSignal {
    arma::cx_vec x;

    arma::cx_vec ru_segment(const SystemConfig& cfg, int m) const;
};

/// Output of a quantizer: per-RU fronthaul bits, the dequantized vector,
/// per-RU power scales and the achieved sum effective-interference value.
struct QuantizationResult {
    std::vector<std::vector<std::uint8_t>> bits; // per RU, MSB first
    arma::cx_vec xhat;                           // total_tx, unscaled codewords
    arma::vec gamma;                             // per RU
    double objective = 0.0;
    long long ei_evaluations = 0; // search cost in EI-evaluation units
};

/// Natural binary mapping between codeword indices and bit vectors (MSB
/// first), so lexicographic order on bit tuples equals numeric index order.
std::vector<std::uint8_t> index_to_bits(int index, int nbits);
int bits_to_index(const std::vector<std::uint8_t>& bits);

/// x = W s together with the per-RU partition x_m = W_m s.
PrecodedSignal assemble_precoded(const arma::cx_mat& w, const arma::cx_vec& s);

/// Applies the block-diagonal scaling diag(gamma_1 1, ..., gamma_M 1), each
/// gamma_m repeated over RU m's antennas. Scales must be positive.
arma::cx_vec apply_power_scaling(const SystemConfig& cfg, const arma::cx_vec& xhat,
                                 const arma::vec& gamma);

/// Gaussian CN(0, I) symbol batch.
SymbolBatch gaussian_symbols(const SystemConfig& cfg, arma::uword count, Rng& rng);

} // namespace cfmq
