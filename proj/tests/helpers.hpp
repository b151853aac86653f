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

#include "cfmq/metrics.hpp"
#include "cfmq/quantizers.hpp"
#include "cfmq/rng.hpp"
#include "cfmq/types.hpp"

namespace cfmq::test {

inline SystemConfig scalar_config(int num_rus, int num_ues, int bits, double power = 1.0,
                                  double noise_var = 0.1) {
    SystemConfig cfg;
    cfg.num_rus = num_rus;
    cfg.num_ues = num_ues;
    cfg.tx_antennas.assign(std::size_t(num_rus), 1);
    cfg.rx_antennas.assign(std::size_t(num_ues), 1);
    cfg.streams.assign(std::size_t(num_ues), 1);
    cfg.fronthaul_bits.assign(std::size_t(num_rus), bits);
    cfg.power.assign(std::size_t(num_rus), power);
    cfg.noise_var = noise_var;
    return cfg;
}

inline SystemConfig multi_config(int num_rus, int num_ues, int n_tx, int n_rx, int streams,
                                 int bits, double power = 1.0, double noise_var = 0.1) {
    SystemConfig cfg;
    cfg.num_rus = num_rus;
    cfg.num_ues = num_ues;
    cfg.tx_antennas.assign(std::size_t(num_rus), n_tx);
    cfg.rx_antennas.assign(std::size_t(num_ues), n_rx);
    cfg.streams.assign(std::size_t(num_ues), streams);
    cfg.fronthaul_bits.assign(std::size_t(num_rus), bits);
    cfg.power.assign(std::size_t(num_rus), power);
    cfg.noise_var = noise_var;
    return cfg;
}

/// Explicit complex-matrix builder; braces on arma::cx_mat are ambiguous.
inline arma::cx_mat cxm(const std::vector<std::vector<std::complex<double>>>& rows) {
    arma::cx_mat out(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            out(i, j) = rows[i][j];
    return out;
}

inline arma::cx_mat cx_scalar(double re, double im = 0.0) {
    return cxm({{{re, im}}});
}

inline arma::cx_mat random_cx_mat(arma::uword rows, arma::uword cols, Rng& rng) {
    arma::cx_mat out(rows, cols);
    for (auto& v : out)
        v = rng.cnormal();
    return out;
}

inline arma::cx_vec random_cx_vec(arma::uword n, Rng& rng) {
    arma::cx_vec out(n);
    for (auto& v : out)
        v = rng.cnormal();
    return out;
}

inline ChannelState random_channel(const SystemConfig& cfg, Rng& rng) {
    return ChannelState{
        random_cx_mat(arma::uword(cfg.total_rx()), arma::uword(cfg.total_tx()), rng)};
}

inline PrecodingMatrix random_precoder(const SystemConfig& cfg, Rng& rng) {
    PrecodingMatrix prec;
    prec.w = random_cx_mat(arma::uword(cfg.total_tx()), arma::uword(cfg.total_streams()), rng);
    prec.ru_scale = arma::ones(arma::uword(cfg.num_rus));
    return prec;
}

inline std::vector<LookupCodebook> random_codebooks(const SystemConfig& cfg, Rng& rng) {
    std::vector<LookupCodebook> books;
    for (int m = 0; m < cfg.num_rus; ++m) {
        LookupCodebook book;
        book.bits = cfg.fronthaul_bits[std::size_t(m)];
        book.codewords =
            random_cx_mat(arma::uword(cfg.tx_antennas[m]), arma::uword(1 << book.bits), rng);
        books.push_back(std::move(book));
    }
    return books;
}

/// Sum-EI of an explicit codeword tuple, computed through the metrics-module
/// formulas rather than the quantizer search machinery.
inline double reference_sum_ei(const QuantContext& ctx, const arma::cx_vec& xhat) {
    const SystemConfig& cfg = *ctx.cfg;
    if (ctx.kind == EiKind::single_antenna) {
        const arma::cx_vec xt = apply_power_scaling(cfg, xhat, ctx.gamma);
        return arma::accu(ei_single(cfg, *ctx.channel, *ctx.prec, ctx.s, xt));
    }
    return arma::accu(ei_multi(cfg, *ctx.beamformers, *ctx.channel, ctx.gamma, xhat, ctx.s));
}

/// Exhaustive independent enumerator over the codebook product; tuples are
/// visited lexicographically (RU 0 most significant, codeword index
/// ascending) and a strict '<' keeps the first minimum.
struct BruteForceResult {
    std::vector<int> indices;
    double objective = 0.0;
};

inline BruteForceResult brute_force_mq(const QuantContext& ctx,
                                       const std::vector<LookupCodebook>& books) {
    const SystemConfig& cfg = *ctx.cfg;
    BruteForceResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<int> idx(std::size_t(cfg.num_rus), 0);
    for (;;) {
        arma::cx_vec xhat(arma::uword(cfg.total_tx()));
        for (int m = 0; m < cfg.num_rus; ++m) {
            const int c0 = cfg.ru_col_offset(m);
            xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) =
                books[std::size_t(m)].codewords.col(arma::uword(idx[std::size_t(m)]));
        }
        const double val = reference_sum_ei(ctx, xhat);
        if (val < best.objective) {
            best.objective = val;
            best.indices = idx;
        }
        int pos = cfg.num_rus - 1;
        while (pos >= 0) {
            if (++idx[std::size_t(pos)] < books[std::size_t(pos)].size())
                break;
            idx[std::size_t(pos)] = 0;
            --pos;
        }
        if (pos < 0)
            break;
    }
    return best;
}

/// Hierarchical 2-means tree over a cloud of sample columns, the structure
/// produced by resolution-refinement training; used where a test needs a
/// realistic tree without running the full training loop.
inline TreeCodebook hierarchical_tree(const arma::cx_mat& samples, int depth, Rng& rng) {
    TreeCodebook tree;
    tree.depth = depth;
    std::vector<std::vector<arma::uword>> clusters(1);
    for (arma::uword i = 0; i < samples.n_cols; ++i)
        clusters[0].push_back(i);
    for (int b = 1; b <= depth; ++b) {
        arma::cx_mat level(samples.n_rows, arma::uword(1 << b));
        std::vector<std::vector<arma::uword>> next(std::size_t(1 << b));
        for (std::size_t j = 0; j < clusters.size(); ++j) {
            arma::cx_vec a(samples.n_rows), c(samples.n_rows);
            if (clusters[j].size() >= 2) {
                a = samples.col(clusters[j][rng.uniform_index(clusters[j].size())]);
                c = samples.col(clusters[j][rng.uniform_index(clusters[j].size())]);
                for (int it = 0; it < 12; ++it) {
                    arma::cx_vec sum_a(samples.n_rows, arma::fill::zeros);
                    arma::cx_vec sum_c(samples.n_rows, arma::fill::zeros);
                    double cnt_a = 0.0, cnt_c = 0.0;
                    next[2 * j].clear();
                    next[2 * j + 1].clear();
                    for (arma::uword idx : clusters[j]) {
                        const double da = std::pow(arma::norm(samples.col(idx) - a), 2);
                        const double dc = std::pow(arma::norm(samples.col(idx) - c), 2);
                        if (da <= dc) {
                            sum_a += samples.col(idx);
                            cnt_a += 1.0;
                            next[2 * j].push_back(idx);
                        } else {
                            sum_c += samples.col(idx);
                            cnt_c += 1.0;
                            next[2 * j + 1].push_back(idx);
                        }
                    }
                    if (cnt_a > 0.0)
                        a = sum_a / cnt_a;
                    if (cnt_c > 0.0)
                        c = sum_c / cnt_c;
                }
            } else {
                for (arma::uword i = 0; i < samples.n_rows; ++i) {
                    a(i) = rng.cnormal();
                    c(i) = rng.cnormal();
                }
            }
            level.col(arma::uword(2 * j)) = a;
            level.col(arma::uword(2 * j + 1)) = c;
        }
        tree.levels.push_back(std::move(level));
        clusters = std::move(next);
    }
    return tree;
}

/// Central finite difference of a scalar function.
template <typename F>
arma::vec finite_difference(F&& fn, const arma::vec& at, double h = 1e-6) {
    arma::vec grad(at.n_elem);
    for (arma::uword i = 0; i < at.n_elem; ++i) {
        arma::vec lo = at, hi = at;
        lo(i) -= h;
        hi(i) += h;
        grad(i) = (fn(hi) - fn(lo)) / (2.0 * h);
    }
    return grad;
}

} // namespace cfmq::test
