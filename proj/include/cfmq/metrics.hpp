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

#include "cfmq/precoding.hpp"
#include "cfmq/types.hpp"

namespace cfmq {

// ---------------------------------------------------------------------------
// Effective interference (EI)
//
// Single-antenna form, per UE n:
//     EI_n = | H_n (x_tilde - W_n s_n) |^2
// with x_tilde the scaled dequantized vector. Decomposed per RU:
//     Delta_{m->n} = H_{m,n} (gamma_m xhat_m - W_{m,n} s_n),
//     sum_n EI_n = || sum_m Delta_m ||^2.
//
// Multi-antenna form, per UE n with receive beamformer F_n:
//     EI_n = Re tr( F_n^H H_n x_tilde (F_n^H H_n x_tilde - 2 s_n)^H ),
// which decomposes over RUs through F_n^H H_{n,m} x_tilde_m.
// ---------------------------------------------------------------------------

/// Per-UE single-antenna EI. Requires a scalar system (one receive antenna
/// and one stream per UE); xhat_scaled is the already power-scaled vector.
arma::vec ei_single(const SystemConfig& cfg, const ChannelState& channel,
                    const PrecodingMatrix& prec, const arma::cx_vec& s,
                    const arma::cx_vec& xhat_scaled);

/// Per-RU-to-UE disturbances Delta_{m->n}; entry (m, n) of the result.
/// Summing rows and taking the squared norm reproduces the sum of ei_single.
arma::cx_mat ei_disturbance(const SystemConfig& cfg, const ChannelState& channel,
                            const PrecodingMatrix& prec, const arma::cx_vec& s,
                            const arma::cx_vec& xhat, const arma::vec& gamma);

/// Per-UE multi-antenna EI for receive beamformers F (one per UE).
arma::vec ei_multi(const SystemConfig& cfg, const std::vector<arma::cx_mat>& beamformers,
                   const ChannelState& channel, const arma::vec& gamma, const arma::cx_vec& xhat,
                   const arma::cx_vec& s);

/// Same value as ei_multi, computed from per-RU terms. xhat_scaled_per_ru
/// holds the already scaled per-RU segments gamma_m xhat_m.
arma::vec ei_multi_decomposed(const SystemConfig& cfg,
                              const std::vector<arma::cx_mat>& beamformers,
                              const ChannelState& channel,
                              const std::vector<arma::cx_vec>& xhat_scaled_per_ru,
                              const arma::cx_vec& s);

/// Per-UE disturbance power || H_n (x_tilde - W_n s_n) ||^2, the EI in its
/// covariance form. This is the non-negative quantity in the SINR
/// denominator; it equals ei_single on scalar systems. The quantizer
/// criterion ei_multi drops the constant ||s_n||^2 term and can go negative.
arma::vec ei_power(const SystemConfig& cfg, const ChannelState& channel,
                   const PrecodingMatrix& prec, const arma::cx_vec& s,
                   const arma::cx_vec& xhat_scaled);

/// MMSE receive beamformer for UE n. The full receiver sums the effective
/// channels of all UEs in the regularized Gram matrix; the localized variant
/// keeps only the UE's own term.
arma::cx_mat mmse_receiver(const SystemConfig& cfg, const ChannelState& channel,
                           const PrecodingMatrix& prec, int ue, double noise_var, bool localized);

std::vector<arma::cx_mat> mmse_receivers(const SystemConfig& cfg, const ChannelState& channel,
                                         const PrecodingMatrix& prec, double noise_var,
                                         bool localized);

/// Empirical symbol-error covariance E[(shat - s)(shat - s)^H] for UE n over
/// a batch: shat = F_n^H (H_n x_tilde + z). Columns of x_tilde/s_ue/noise are
/// paired samples; the result is Hermitian-symmetrized.
arma::cx_mat error_covariance(const arma::cx_mat& beamformer, const arma::cx_mat& h_ue,
                              const arma::cx_mat& xtilde_samples, const arma::cx_mat& s_ue_samples,
                              const arma::cx_mat& noise_samples);

/// Closed-form population error covariance for the unquantized transmit
/// model x_tilde = W s with s ~ CN(0, I) and noise CN(0, noise_var I).
arma::cx_mat error_covariance_closed_form(const SystemConfig& cfg, const ChannelState& channel,
                                          const PrecodingMatrix& prec,
                                          const arma::cx_mat& beamformer, int ue,
                                          double noise_var);

/// Per-UE spectral efficiency log2 det(K_s + K_e,n) - log2 det(K_e,n).
/// Eigenvalues of each K_e,n are floored at 1e-12 to keep the log-dets
/// finite in near-perfect regimes.
arma::vec per_ue_spectral_efficiency(const std::vector<arma::cx_mat>& signal_cov,
                                     const std::vector<arma::cx_mat>& error_cov);

/// Sum over UEs of per_ue_spectral_efficiency.
double sum_spectral_efficiency(const std::vector<arma::cx_mat>& signal_cov,
                               const std::vector<arma::cx_mat>& error_cov);

/// Spectral-efficiency eigenvalue floor applied to the error covariance.
inline constexpr double kErrorCovEigenFloor = 1e-12;

// ---------------------------------------------------------------------------
// 16-QAM
// ---------------------------------------------------------------------------

/// Unit-average-power Gray-labeled 16-QAM constellation (natural symbol
/// index = Gray label of I axis : Gray label of Q axis).
const arma::cx_vec& qam16_constellation();

/// Uniformly random 16-QAM symbol batch.
SymbolBatch qam16_symbols(const SystemConfig& cfg, arma::uword count, Rng& rng);

/// Minimum-distance decision: index of the nearest constellation point.
int qam16_detect(std::complex<double> y);

/// Fraction of symbol errors between decided and transmitted entries.
double ser_16qam(const arma::cx_mat& decided, const arma::cx_mat& truth);

/// Analytic symbol-error probability of 16-QAM over AWGN at the given
/// Es/N0 (linear); used as an independent oracle by the tests.
double qam16_awgn_ser(double es_over_n0);

// ---------------------------------------------------------------------------
// SINR
// ---------------------------------------------------------------------------

/// SINR with channel-estimation noise:
///     || G_hat_n ||^2 / (n_rx sigma^2 + EI_n + || E_n ||^2),
/// all expectations supplied by the caller.
double sinr_with_estimation(double g_hat_power, double ei, double est_error_power, int rx_antennas,
                            double noise_var);

/// Aggregated per-scheme metrics.
struct MetricsReport {
    arma::vec ei;   // per UE
    arma::vec sinr; // per UE
    arma::vec se;   // per UE, bit/s/Hz
    double sum_se = 0.0;
    double ser = 0.0;
    double est_error_power = 0.0; // mean ||E_n||^2 when pilots are simulated
};

} // namespace cfmq
