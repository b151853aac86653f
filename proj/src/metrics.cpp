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

#include "cfmq/metrics.hpp"

#include <cmath>

namespace cfmq {

static void require_scalar(const SystemConfig& cfg, const char* where) {
    if (!cfg.is_scalar())
        throw ConfigError(std::string(where) + ": requires a scalar system "
                                               "(single-antenna RUs and UEs, one stream each)");
}

arma::vec ei_single(const SystemConfig& cfg, const ChannelState& channel,
                    const PrecodingMatrix& prec, const arma::cx_vec& s,
                    const arma::cx_vec& xhat_scaled) {
    require_scalar(cfg, "ei_single");
    if (xhat_scaled.n_elem != channel.h.n_cols || s.n_elem != arma::uword(cfg.total_streams()))
        throw ConfigError("ei_single: shape mismatch");
    arma::vec out(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_mat h_n = channel.ue_rows(cfg, n); // 1 x N_tx
        const arma::cx_mat w_n = prec.ue_cols(cfg, n);    // N_tx x 1
        const std::complex<double> resid =
            arma::as_scalar(h_n * xhat_scaled) -
            arma::as_scalar(h_n * w_n) * s(arma::uword(cfg.ue_stream_offset(n)));
        out(arma::uword(n)) = std::norm(resid);
    }
    return out;
}

arma::cx_mat ei_disturbance(const SystemConfig& cfg, const ChannelState& channel,
                            const PrecodingMatrix& prec, const arma::cx_vec& s,
                            const arma::cx_vec& xhat, const arma::vec& gamma) {
    require_scalar(cfg, "ei_disturbance");
    arma::cx_mat delta(arma::uword(cfg.num_rus), arma::uword(cfg.num_ues));
    for (int m = 0; m < cfg.num_rus; ++m) {
        const arma::uword col = arma::uword(cfg.ru_col_offset(m));
        for (int n = 0; n < cfg.num_ues; ++n) {
            const std::complex<double> h_mn = channel.h(arma::uword(cfg.ue_row_offset(n)), col);
            const std::complex<double> w_mn = prec.w(col, arma::uword(cfg.ue_stream_offset(n)));
            delta(arma::uword(m), arma::uword(n)) =
                h_mn * (gamma(arma::uword(m)) * xhat(col) -
                        w_mn * s(arma::uword(cfg.ue_stream_offset(n))));
        }
    }
    return delta;
}

arma::vec ei_multi(const SystemConfig& cfg, const std::vector<arma::cx_mat>& beamformers,
                   const ChannelState& channel, const arma::vec& gamma, const arma::cx_vec& xhat,
                   const arma::cx_vec& s) {
    if (int(beamformers.size()) != cfg.num_ues)
        throw ConfigError("ei_multi: need one beamformer per UE");
    const arma::cx_vec xt = apply_power_scaling(cfg, xhat, gamma);
    arma::vec out(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_vec v = beamformers[std::size_t(n)].t() * (channel.ue_rows(cfg, n) * xt);
        const arma::cx_vec s_n = s.subvec(arma::uword(cfg.ue_stream_offset(n)),
                                          arma::uword(cfg.ue_stream_offset(n) + cfg.streams[n] - 1));
        out(arma::uword(n)) =
            std::real(arma::cdot(v, v)) - 2.0 * std::real(arma::cdot(s_n, v));
    }
    return out;
}

arma::vec ei_multi_decomposed(const SystemConfig& cfg,
                              const std::vector<arma::cx_mat>& beamformers,
                              const ChannelState& channel,
                              const std::vector<arma::cx_vec>& xhat_scaled_per_ru,
                              const arma::cx_vec& s) {
    if (int(beamformers.size()) != cfg.num_ues ||
        int(xhat_scaled_per_ru.size()) != cfg.num_rus)
        throw ConfigError("ei_multi_decomposed: shape mismatch");
    arma::vec out(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        arma::cx_vec v(arma::uword(cfg.streams[n]), arma::fill::zeros);
        for (int m = 0; m < cfg.num_rus; ++m)
            v += beamformers[std::size_t(n)].t() *
                 (channel.block(cfg, m, n) * xhat_scaled_per_ru[std::size_t(m)]);
        const arma::cx_vec s_n = s.subvec(arma::uword(cfg.ue_stream_offset(n)),
                                          arma::uword(cfg.ue_stream_offset(n) + cfg.streams[n] - 1));
        out(arma::uword(n)) =
            std::real(arma::cdot(v, v)) - 2.0 * std::real(arma::cdot(s_n, v));
    }
    return out;
}

arma::vec ei_power(const SystemConfig& cfg, const ChannelState& channel,
                   const PrecodingMatrix& prec, const arma::cx_vec& s,
                   const arma::cx_vec& xhat_scaled) {
    if (xhat_scaled.n_elem != channel.h.n_cols || s.n_elem != arma::uword(cfg.total_streams()))
        throw ConfigError("ei_power: shape mismatch");
    arma::vec out(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_vec s_n = s.subvec(arma::uword(cfg.ue_stream_offset(n)),
                                          arma::uword(cfg.ue_stream_offset(n) + cfg.streams[n] - 1));
        const arma::cx_vec resid =
            channel.ue_rows(cfg, n) * xhat_scaled - (channel.ue_rows(cfg, n) * prec.ue_cols(cfg, n)) * s_n;
        out(arma::uword(n)) = std::real(arma::cdot(resid, resid));
    }
    return out;
}

arma::cx_mat mmse_receiver(const SystemConfig& cfg, const ChannelState& channel,
                           const PrecodingMatrix& prec, int ue, double noise_var, bool localized) {
    const arma::cx_mat h_n = channel.ue_rows(cfg, ue);
    const arma::uword n_rx = h_n.n_rows;
    arma::cx_mat gram(n_rx, n_rx, arma::fill::zeros);
    if (localized) {
        const arma::cx_mat eff = h_n * prec.ue_cols(cfg, ue);
        gram = eff * eff.t();
    } else {
        for (int np = 0; np < cfg.num_ues; ++np) {
            const arma::cx_mat eff = h_n * prec.ue_cols(cfg, np);
            gram += eff * eff.t();
        }
    }
    gram += noise_var * arma::eye<arma::cx_mat>(n_rx, n_rx);
    return arma::solve(gram, h_n * prec.ue_cols(cfg, ue));
}

std::vector<arma::cx_mat> mmse_receivers(const SystemConfig& cfg, const ChannelState& channel,
                                         const PrecodingMatrix& prec, double noise_var,
                                         bool localized) {
    std::vector<arma::cx_mat> out(std::size_t(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n)
        out[std::size_t(n)] = mmse_receiver(cfg, channel, prec, n, noise_var, localized);
    return out;
}

arma::cx_mat error_covariance(const arma::cx_mat& beamformer, const arma::cx_mat& h_ue,
                              const arma::cx_mat& xtilde_samples, const arma::cx_mat& s_ue_samples,
                              const arma::cx_mat& noise_samples) {
    const arma::uword count = xtilde_samples.n_cols;
    if (count == 0)
        throw ConfigError("error_covariance: empty batch");
    if (s_ue_samples.n_cols != count || noise_samples.n_cols != count)
        throw ConfigError("error_covariance: batch sizes differ");
    const arma::uword l = s_ue_samples.n_rows;
    arma::cx_mat acc(l, l, arma::fill::zeros);
    for (arma::uword k = 0; k < count; ++k) {
        const arma::cx_vec shat =
            beamformer.t() * (h_ue * xtilde_samples.col(k) + noise_samples.col(k));
        const arma::cx_vec err = shat - s_ue_samples.col(k);
        acc += err * err.t();
    }
    acc /= double(count);
    return 0.5 * (acc + acc.t());
}

arma::cx_mat error_covariance_closed_form(const SystemConfig& cfg, const ChannelState& channel,
                                          const PrecodingMatrix& prec,
                                          const arma::cx_mat& beamformer, int ue,
                                          double noise_var) {
    const arma::cx_mat h_n = channel.ue_rows(cfg, ue);
    const arma::cx_mat f = beamformer;
    const arma::cx_mat eff_all = h_n * prec.w;              // n_rx x L_tot
    const arma::cx_mat eff_own = h_n * prec.ue_cols(cfg, ue);
    const arma::uword l = eff_own.n_cols;
    arma::cx_mat cov = f.t() * (eff_all * eff_all.t()) * f;
    cov += noise_var * f.t() * f;
    cov -= f.t() * eff_own;
    cov -= eff_own.t() * f;
    cov += arma::eye<arma::cx_mat>(l, l);
    return 0.5 * (cov + cov.t());
}

static double log2_det_floored(const arma::cx_mat& mat) {
    arma::vec eigs;
    arma::cx_mat sym = 0.5 * (mat + mat.t());
    if (!arma::eig_sym(eigs, sym))
        throw NumericError("sum_spectral_efficiency: eigen decomposition failed");
    double acc = 0.0;
    for (double e : eigs) {
        if (!std::isfinite(e))
            throw NumericError("sum_spectral_efficiency: non-finite covariance");
        acc += std::log2(std::max(e, kErrorCovEigenFloor));
    }
    return acc;
}

arma::vec per_ue_spectral_efficiency(const std::vector<arma::cx_mat>& signal_cov,
                                     const std::vector<arma::cx_mat>& error_cov) {
    if (signal_cov.size() != error_cov.size())
        throw ConfigError("spectral efficiency: per-UE lists differ in length");
    arma::vec out(error_cov.size());
    for (std::size_t n = 0; n < error_cov.size(); ++n) {
        // Floor the error-covariance eigenvalues, then evaluate both log-dets
        // on the floored matrix so the difference stays consistent.
        arma::vec eigs;
        arma::cx_mat vecs;
        arma::cx_mat sym = 0.5 * (error_cov[n] + error_cov[n].t());
        if (!arma::eig_sym(eigs, vecs, sym))
            throw NumericError("spectral efficiency: eigen decomposition failed");
        eigs.transform([](double e) { return std::max(e, kErrorCovEigenFloor); });
        const arma::cx_mat k_e = vecs * arma::diagmat(arma::cx_vec(eigs, arma::zeros(eigs.n_elem))) *
                                 vecs.t();
        out(arma::uword(n)) = log2_det_floored(signal_cov[n] + k_e) - log2_det_floored(k_e);
        if (!std::isfinite(out(arma::uword(n))))
            throw NumericError("spectral efficiency: non-finite result");
    }
    return out;
}

double sum_spectral_efficiency(const std::vector<arma::cx_mat>& signal_cov,
                               const std::vector<arma::cx_mat>& error_cov) {
    return arma::accu(per_ue_spectral_efficiency(signal_cov, error_cov));
}

const arma::cx_vec& qam16_constellation() {
    static const arma::cx_vec points = [] {
        // Gray labels per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3,
        // scaled so the average symbol power is one.
        const double axis[4] = {-3.0, -1.0, 1.0, 3.0};
        const int gray_of_position[4] = {0, 1, 3, 2};
        arma::cx_vec pts(16);
        const double scale = 1.0 / std::sqrt(10.0);
        for (int i = 0; i < 4; ++i)
            for (int q = 0; q < 4; ++q) {
                const int label = (gray_of_position[i] << 2) | gray_of_position[q];
                pts(arma::uword(label)) = {axis[i] * scale, axis[q] * scale};
            }
        return pts;
    }();
    return points;
}

SymbolBatch qam16_symbols(const SystemConfig& cfg, arma::uword count, Rng& rng) {
    const arma::cx_vec& pts = qam16_constellation();
    SymbolBatch batch;
    batch.symbols.set_size(arma::uword(cfg.total_streams()), count);
    for (auto& v : batch.symbols)
        v = pts(arma::uword(rng.uniform_index(16)));
    return batch;
}

int qam16_detect(std::complex<double> y) {
    const arma::cx_vec& pts = qam16_constellation();
    int best = 0;
    double best_d = std::norm(y - pts(0));
    for (int j = 1; j < 16; ++j) {
        const double d = std::norm(y - pts(arma::uword(j)));
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

double ser_16qam(const arma::cx_mat& decided, const arma::cx_mat& truth) {
    if (decided.n_rows != truth.n_rows || decided.n_cols != truth.n_cols)
        throw ConfigError("ser_16qam: shape mismatch");
    arma::uword errors = 0;
    for (arma::uword i = 0; i < truth.n_elem; ++i)
        if (qam16_detect(decided(i)) != qam16_detect(truth(i)))
            ++errors;
    return truth.n_elem == 0 ? 0.0 : double(errors) / double(truth.n_elem);
}

double qam16_awgn_ser(double es_over_n0) {
    const double q_arg = std::sqrt(0.2 * es_over_n0);
    const double q = 0.5 * std::erfc(q_arg / std::sqrt(2.0));
    const double per_axis = 1.5 * q;
    return 1.0 - (1.0 - per_axis) * (1.0 - per_axis);
}

double sinr_with_estimation(double g_hat_power, double ei, double est_error_power, int rx_antennas,
                            double noise_var) {
    return g_hat_power / (double(rx_antennas) * noise_var + ei + est_error_power);
}

} // namespace cfmq
