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

#include "cfmq/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cfmq/parallel.hpp"

namespace cfmq {

namespace {
// Substream tags for the deterministic derivation of training randomness.
constexpr std::uint64_t kStreamChannels = 11;
constexpr std::uint64_t kStreamSymbols = 12;
} // namespace

void TrainingSet::pair_location(arma::uword pair, std::size_t& channel,
                                arma::uword& symbol) const {
    const arma::uword s = symbols_per_channel();
    channel = std::size_t(pair / s);
    symbol = pair % s;
}

QuantContext TrainingSet::context(const SystemConfig& cfg, std::size_t channel,
                                  arma::uword symbol, const arma::vec& gamma) const {
    QuantContext ctx;
    ctx.cfg = &cfg;
    ctx.channel = &channels[channel];
    ctx.prec = &precoders[channel];
    ctx.s = symbols[channel].use(symbol);
    ctx.gamma = gamma;
    ctx.kind = kind;
    if (kind == EiKind::multi_antenna)
        ctx.beamformers = &beamformers[channel];
    return ctx;
}

arma::cx_vec TrainingSet::precoded_segment(const SystemConfig& cfg, std::size_t channel,
                                           arma::uword symbol, int ru) const {
    const arma::cx_vec x = precoders[channel].w * symbols[channel].use(symbol);
    const int c0 = cfg.ru_col_offset(ru);
    return x.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[ru] - 1));
}

TrainingSet make_training_set(const SystemConfig& cfg, const ChannelScenario& scenario,
                              PrecoderKind precoder, EiKind kind, int channel_draws,
                              int symbols_per_channel, std::uint64_t master_seed) {
    if (channel_draws < 1 || symbols_per_channel < 1)
        throw ConfigError("training set: need at least one channel and one symbol draw");
    TrainingSet ts;
    ts.kind = kind;
    for (int c = 0; c < channel_draws; ++c) {
        Rng ch_rng = Rng::stream(master_seed, {kStreamChannels, std::uint64_t(c)});
        ChannelState channel = generate_channel(cfg, scenario, ch_rng);
        PrecodingMatrix prec = precoder == PrecoderKind::mmse ? mmse_precoder(channel, cfg)
                                                              : zero_forcing_precoder(channel, cfg);
        if (kind == EiKind::multi_antenna)
            ts.beamformers.push_back(mmse_receivers(cfg, channel, prec, cfg.noise_var, true));
        Rng sym_rng = Rng::stream(master_seed, {kStreamSymbols, std::uint64_t(c)});
        ts.symbols.push_back(gaussian_symbols(cfg, arma::uword(symbols_per_channel), sym_rng));
        ts.channels.push_back(std::move(channel));
        ts.precoders.push_back(std::move(prec));
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Codebook initialization (all in effective transmit units, gamma = 1)
// ---------------------------------------------------------------------------

std::vector<LookupCodebook> init_codebooks_from_targets(const SystemConfig& cfg,
                                                        const TrainingSet& ts, Rng& rng) {
    const arma::uword pairs = ts.pair_count();
    std::vector<LookupCodebook> books(std::size_t(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int size = 1 << cfg.fronthaul_bits[std::size_t(m)];
        LookupCodebook book;
        book.bits = cfg.fronthaul_bits[std::size_t(m)];
        book.codewords.set_size(arma::uword(cfg.tx_antennas[m]), arma::uword(size));
        for (int j = 0; j < size; ++j) {
            const arma::uword pick = rng.uniform_index(pairs);
            std::size_t c;
            arma::uword k;
            ts.pair_location(pick, c, k);
            arma::cx_vec sample = ts.precoded_segment(cfg, c, k, m);
            // A small jitter keeps duplicated picks from producing identical
            // codewords when the codebook outnumbers the training pairs.
            if (arma::uword(size) > pairs)
                for (auto& v : sample)
                    v += 1e-3 * std::sqrt(cfg.power[std::size_t(m)]) * rng.cnormal();
            book.codewords.col(arma::uword(j)) = sample;
        }
        books[std::size_t(m)] = std::move(book);
    }
    return books;
}

std::vector<LookupCodebook> init_codebooks_sphere(const SystemConfig& cfg, Rng& rng) {
    std::vector<LookupCodebook> books(std::size_t(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int size = 1 << cfg.fronthaul_bits[std::size_t(m)];
        LookupCodebook book;
        book.bits = cfg.fronthaul_bits[std::size_t(m)];
        book.codewords.set_size(arma::uword(cfg.tx_antennas[m]), arma::uword(size));
        const double radius = std::sqrt(cfg.power[std::size_t(m)]);
        for (int j = 0; j < size; ++j) {
            arma::cx_vec dir(arma::uword(cfg.tx_antennas[m]));
            double norm2 = 0.0;
            do {
                for (auto& v : dir)
                    v = rng.cnormal();
                norm2 = std::real(arma::cdot(dir, dir));
            } while (norm2 <= 0.0);
            book.codewords.col(arma::uword(j)) = radius / std::sqrt(norm2) * dir;
        }
        books[std::size_t(m)] = std::move(book);
    }
    return books;
}

std::vector<LookupCodebook> nested_codebook_init(const SystemConfig& cfg,
                                                 const std::vector<LookupCodebook>& trained,
                                                 const arma::vec& gamma, Rng& rng) {
    std::vector<LookupCodebook> out(trained.size());
    for (std::size_t m = 0; m < trained.size(); ++m) {
        LookupCodebook book;
        book.bits = trained[m].bits + 1;
        const arma::cx_mat effective = gamma(arma::uword(m)) * trained[m].codewords;
        const double scale = 0.05 * std::sqrt(cfg.power[m]);
        arma::cx_mat jittered = effective;
        for (auto& v : jittered)
            v += scale * rng.cnormal();
        book.codewords = arma::join_rows(effective, jittered);
        out[m] = std::move(book);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lloyd-Max
// ---------------------------------------------------------------------------

namespace {

struct AssignmentPhase {
    std::vector<std::vector<int>> indices; // per pair, per RU
    double mean_objective = 0.0;
};

AssignmentPhase assign_all(LookupKind kind, const SystemConfig& cfg, const TrainingSet& ts,
                           const std::vector<LookupCodebook>& books, const LloydOptions& options) {
    const arma::uword pairs = ts.pair_count();
    AssignmentPhase phase;
    phase.indices.assign(pairs, std::vector<int>(std::size_t(cfg.num_rus), 0));
    std::vector<double> objectives(pairs, 0.0);
    const arma::vec unit_gamma = arma::ones(arma::uword(cfg.num_rus));

    parallel_for(pairs, options.threads, [&](std::size_t p) {
        std::size_t c;
        arma::uword k;
        ts.pair_location(arma::uword(p), c, k);
        if (kind == LookupKind::vq) {
            double dist = 0.0;
            for (int m = 0; m < cfg.num_rus; ++m) {
                const arma::cx_vec x_m = ts.precoded_segment(cfg, c, k, m);
                auto [bits, codeword] = vq_quantize(x_m, books[std::size_t(m)]);
                phase.indices[p][std::size_t(m)] = bits_to_index(bits);
                const arma::cx_vec diff = x_m - codeword;
                dist += std::real(arma::cdot(diff, diff));
            }
            objectives[p] = dist;
            return;
        }
        const QuantContext ctx = ts.context(cfg, c, k, unit_gamma);
        QuantizationResult res;
        switch (kind) {
            case LookupKind::mq:
                res = mq_quantize(ctx, books, options.mq_cap);
                break;
            case LookupKind::smq:
                res = smq_quantize(ctx, books);
                break;
            case LookupKind::alpha_pmq: {
                AlphaPmqOptions pmq;
                pmq.alpha = options.alpha;
                pmq.iterations = options.pmq_iterations;
                res = alpha_pmq_quantize(ctx, books, pmq);
                break;
            }
            default:
                break;
        }
        for (int m = 0; m < cfg.num_rus; ++m)
            phase.indices[p][std::size_t(m)] = bits_to_index(res.bits[std::size_t(m)]);
        objectives[p] = res.objective;
    });

    phase.mean_objective =
        std::accumulate(objectives.begin(), objectives.end(), 0.0) / double(pairs);
    return phase;
}

// Joint re-fit of all assigned codewords: with assignments fixed the
// empirical sum-EI is a convex quadratic, minimized by the (damped when
// necessary) normal equations over the stacked codeword variables. RUs
// excluded by the trainable mask contribute their assigned codewords as
// fixed terms on the target side.
void refit_ei_codebooks(const SystemConfig& cfg, const TrainingSet& ts,
                        const AssignmentPhase& phase, std::vector<LookupCodebook>& books,
                        const std::vector<bool>* trainable = nullptr) {
    const arma::uword pairs = ts.pair_count();
    const arma::vec unit_gamma = arma::ones(arma::uword(cfg.num_rus));
    auto is_trainable = [&](int m) {
        return trainable == nullptr || (*trainable)[std::size_t(m)];
    };

    // Variable slots for codewords that received at least one assignment.
    std::vector<std::vector<long long>> slot(std::size_t(cfg.num_rus));
    arma::uword total_vars = 0;
    {
        std::vector<std::vector<bool>> used(std::size_t(cfg.num_rus));
        for (int m = 0; m < cfg.num_rus; ++m)
            used[std::size_t(m)].assign(std::size_t(books[std::size_t(m)].size()), false);
        for (arma::uword p = 0; p < pairs; ++p)
            for (int m = 0; m < cfg.num_rus; ++m)
                used[std::size_t(m)][std::size_t(phase.indices[p][std::size_t(m)])] = true;
        for (int m = 0; m < cfg.num_rus; ++m) {
            slot[std::size_t(m)].assign(std::size_t(books[std::size_t(m)].size()), -1);
            if (!is_trainable(m))
                continue;
            for (int j = 0; j < books[std::size_t(m)].size(); ++j)
                if (used[std::size_t(m)][std::size_t(j)]) {
                    slot[std::size_t(m)][std::size_t(j)] = (long long)(total_vars);
                    total_vars += arma::uword(cfg.tx_antennas[m]);
                }
        }
    }
    if (total_vars == 0)
        return;

    arma::cx_mat gram(total_vars, total_vars, arma::fill::zeros);
    arma::cx_vec rhs(total_vars, arma::fill::zeros);

    for (arma::uword p = 0; p < pairs; ++p) {
        std::size_t c;
        arma::uword k;
        ts.pair_location(p, c, k);
        const QuantContext ctx = ts.context(cfg, c, k, unit_gamma);
        const EiWorkspace ws(ctx);

        arma::cx_vec target(ws.dim(), arma::fill::zeros);
        if (ws.has_linear_term())
            target = ws.linear_term();
        for (int m = 0; m < cfg.num_rus; ++m) {
            target -= ws.zero_contribution(m);
            if (!is_trainable(m))
                target -= ws.map(m) * books[std::size_t(m)].codewords.col(
                                          arma::uword(phase.indices[p][std::size_t(m)]));
        }

        for (int m = 0; m < cfg.num_rus; ++m) {
            if (!is_trainable(m))
                continue;
            const arma::uword row = arma::uword(slot[std::size_t(m)]
                                                    [std::size_t(phase.indices[p][std::size_t(m)])]);
            const arma::uword w_m = arma::uword(cfg.tx_antennas[m]);
            rhs.subvec(row, row + w_m - 1) += ws.map(m).t() * target;
            for (int mp = 0; mp < cfg.num_rus; ++mp) {
                if (!is_trainable(mp))
                    continue;
                const arma::uword col = arma::uword(
                    slot[std::size_t(mp)][std::size_t(phase.indices[p][std::size_t(mp)])]);
                const arma::uword w_mp = arma::uword(cfg.tx_antennas[mp]);
                gram.submat(row, col, row + w_m - 1, col + w_mp - 1) +=
                    ws.map(m).t() * ws.map(mp);
            }
        }
    }

    arma::cx_vec solution;
    bool ok = arma::solve(solution, gram, rhs,
                          arma::solve_opts::likely_sympd + arma::solve_opts::no_approx);
    if (!ok || !solution.is_finite()) {
        // Rank-deficient normal equations; damp and retry.
        const double damping =
            kRefitDamping * (1.0 + std::real(arma::trace(gram)) / double(total_vars));
        arma::cx_mat damped = gram;
        damped.diag() += damping;
        ok = arma::solve(solution, damped, rhs, arma::solve_opts::likely_sympd);
        if (!ok || !solution.is_finite())
            throw NumericError("lloyd_max_train: codeword re-fit failed");
    }

    for (int m = 0; m < cfg.num_rus; ++m)
        for (int j = 0; j < books[std::size_t(m)].size(); ++j) {
            const long long s = slot[std::size_t(m)][std::size_t(j)];
            if (s < 0)
                continue; // empty cluster keeps its previous codeword
            books[std::size_t(m)].codewords.col(arma::uword(j)) =
                solution.subvec(arma::uword(s), arma::uword(s) + arma::uword(cfg.tx_antennas[m]) - 1);
        }
}

void refit_vq_codebooks(const SystemConfig& cfg, const TrainingSet& ts,
                        const AssignmentPhase& phase, std::vector<LookupCodebook>& books) {
    const arma::uword pairs = ts.pair_count();
    for (int m = 0; m < cfg.num_rus; ++m) {
        arma::cx_mat sums(arma::uword(cfg.tx_antennas[m]),
                          arma::uword(books[std::size_t(m)].size()), arma::fill::zeros);
        arma::vec counts(arma::uword(books[std::size_t(m)].size()), arma::fill::zeros);
        for (arma::uword p = 0; p < pairs; ++p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(p, c, k);
            const int j = phase.indices[p][std::size_t(m)];
            sums.col(arma::uword(j)) += ts.precoded_segment(cfg, c, k, m);
            counts(arma::uword(j)) += 1.0;
        }
        for (int j = 0; j < books[std::size_t(m)].size(); ++j)
            if (counts(arma::uword(j)) > 0.0)
                books[std::size_t(m)].codewords.col(arma::uword(j)) =
                    sums.col(arma::uword(j)) / counts(arma::uword(j));
    }
}

// Splits effective codebooks into stored codewords with mean power P_m over
// the assignments plus the transmit scale gamma_m that restores them.
arma::vec normalize_power(const SystemConfig& cfg, const AssignmentPhase& phase,
                          std::vector<LookupCodebook>& books) {
    arma::vec gamma(arma::uword(cfg.num_rus), arma::fill::ones);
    const std::size_t pairs = phase.indices.size();
    for (int m = 0; m < cfg.num_rus; ++m) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pairs; ++p) {
            const arma::cx_vec cw =
                books[std::size_t(m)].codewords.col(arma::uword(phase.indices[p][std::size_t(m)]));
            acc += std::real(arma::cdot(cw, cw));
        }
        const double mean_power = acc / double(pairs);
        if (mean_power > 1e-300) {
            const double g = std::sqrt(mean_power / cfg.power[std::size_t(m)]);
            gamma(arma::uword(m)) = g;
            books[std::size_t(m)].codewords /= g;
        }
    }
    return gamma;
}

} // namespace

TrainedLookup lloyd_max_train(LookupKind kind, const SystemConfig& cfg, const TrainingSet& ts,
                              std::vector<LookupCodebook> init, const LloydOptions& options) {
    if (options.rounds < 1)
        throw ConfigError("lloyd_max_train: rounds must be >= 1");
    if (int(init.size()) != cfg.num_rus)
        throw ConfigError("lloyd_max_train: need one initial codebook per RU");

    TrainedLookup out;
    out.books = std::move(init);

    AssignmentPhase phase;
    for (int round = 0; round < options.rounds; ++round) {
        phase = assign_all(kind, cfg, ts, out.books, options);
        out.objective_trace.push_back(phase.mean_objective);
        if (kind == LookupKind::vq)
            refit_vq_codebooks(cfg, ts, phase, out.books);
        else
            refit_ei_codebooks(cfg, ts, phase, out.books);
    }
    out.gamma = normalize_power(cfg, phase, out.books);
    return out;
}

// ---------------------------------------------------------------------------
// Tree training
// ---------------------------------------------------------------------------

namespace {

std::pair<arma::cx_vec, arma::cx_vec> two_means(const arma::cx_mat& samples, Rng& rng,
                                                int iterations = 20) {
    const arma::uword count = samples.n_cols;
    arma::cx_vec a = samples.col(rng.uniform_index(count));
    arma::cx_vec b = samples.col(rng.uniform_index(count));
    for (int tries = 0; tries < 16 && arma::norm(a - b) == 0.0; ++tries)
        b = samples.col(rng.uniform_index(count));
    if (arma::norm(a - b) == 0.0) {
        b = a;
        for (auto& v : b)
            v += 1e-3 * rng.cnormal();
        return {a, b};
    }
    for (int it = 0; it < iterations; ++it) {
        arma::cx_vec sum_a(samples.n_rows, arma::fill::zeros);
        arma::cx_vec sum_b(samples.n_rows, arma::fill::zeros);
        double cnt_a = 0.0, cnt_b = 0.0;
        for (arma::uword i = 0; i < count; ++i) {
            const double da = std::pow(arma::norm(samples.col(i) - a), 2);
            const double db = std::pow(arma::norm(samples.col(i) - b), 2);
            if (da <= db) {
                sum_a += samples.col(i);
                cnt_a += 1.0;
            } else {
                sum_b += samples.col(i);
                cnt_b += 1.0;
            }
        }
        if (cnt_a > 0.0)
            a = sum_a / cnt_a;
        if (cnt_b > 0.0)
            b = sum_b / cnt_b;
    }
    return {a, b};
}

} // namespace

TrainedTrees tree_codebook_train(const SystemConfig& cfg, const TrainingSet& ts,
                                 const TreeTrainOptions& options, Rng& rng) {
    const arma::uword pairs = ts.pair_count();
    const arma::vec unit_gamma = arma::ones(arma::uword(cfg.num_rus));
    const int max_depth =
        *std::max_element(cfg.fronthaul_bits.begin(), cfg.fronthaul_bits.end());

    // Per-RU target matrices.
    std::vector<arma::cx_mat> targets(std::size_t(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        targets[std::size_t(m)].set_size(arma::uword(cfg.tx_antennas[m]), pairs);
        for (arma::uword p = 0; p < pairs; ++p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(p, c, k);
            targets[std::size_t(m)].col(p) = ts.precoded_segment(cfg, c, k, m);
        }
    }
    std::vector<double> target_rms(std::size_t(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m)
        target_rms[std::size_t(m)] = std::sqrt(
            std::real(arma::accu(targets[std::size_t(m)] % arma::conj(targets[std::size_t(m)]))) /
            double(pairs));

    TrainedTrees out;
    out.trees.resize(std::size_t(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m)
        out.trees[std::size_t(m)].depth = 0;

    std::vector<std::vector<int>> assignment(pairs,
                                             std::vector<int>(std::size_t(cfg.num_rus), 0));

    for (int level = 1; level <= max_depth; ++level) {
        // Grow every RU that still has depth budget.
        for (int m = 0; m < cfg.num_rus; ++m) {
            if (level > cfg.fronthaul_bits[std::size_t(m)])
                continue;
            TreeCodebook& tree = out.trees[std::size_t(m)];
            arma::cx_mat level_book(arma::uword(cfg.tx_antennas[m]), arma::uword(1 << level));
            if (level == 1) {
                auto [a, b] = two_means(targets[std::size_t(m)], rng);
                level_book.col(0) = a;
                level_book.col(1) = b;
            } else {
                const int parents = 1 << (level - 1);
                for (int j = 0; j < parents; ++j) {
                    std::vector<arma::uword> members;
                    for (arma::uword p = 0; p < pairs; ++p)
                        if (assignment[p][std::size_t(m)] == j)
                            members.push_back(p);
                    const arma::cx_vec parent = tree.levels.back().col(arma::uword(j));
                    if (members.size() < 2) {
                        // Empty or singleton cluster: duplicate the parent
                        // with a small jitter so both children stay usable.
                        arma::cx_vec jitter(parent.n_elem);
                        for (auto& v : jitter)
                            v = 1e-3 * target_rms[std::size_t(m)] * rng.cnormal();
                        level_book.col(arma::uword(2 * j)) = parent;
                        level_book.col(arma::uword(2 * j + 1)) = parent + jitter;
                    } else {
                        arma::cx_mat cluster(arma::uword(cfg.tx_antennas[m]),
                                             arma::uword(members.size()));
                        for (std::size_t i = 0; i < members.size(); ++i)
                            cluster.col(arma::uword(i)) =
                                targets[std::size_t(m)].col(members[i]);
                        auto [a, b] = two_means(cluster, rng);
                        level_book.col(arma::uword(2 * j)) = a;
                        level_book.col(arma::uword(2 * j + 1)) = b;
                    }
                }
            }
            tree.levels.push_back(std::move(level_book));
            tree.depth = level;
        }

        // Lloyd iterations over the new level.
        std::vector<double> trace;
        for (int round = 0; round < options.lloyd_rounds; ++round) {
            std::vector<double> objectives(pairs, 0.0);
            parallel_for(pairs, options.threads, [&](std::size_t p) {
                std::size_t c;
                arma::uword k;
                ts.pair_location(arma::uword(p), c, k);
                const QuantContext ctx = ts.context(cfg, c, k, unit_gamma);
                const QuantizationResult res = tree_mq_quantize(ctx, out.trees, options.cap);
                for (int m = 0; m < cfg.num_rus; ++m)
                    assignment[p][std::size_t(m)] = bits_to_index(res.bits[std::size_t(m)]);
                objectives[p] = res.objective;
            });
            trace.push_back(std::accumulate(objectives.begin(), objectives.end(), 0.0) /
                            double(pairs));

            // Re-fit the current level's codewords for RUs still growing;
            // deeper-frozen RUs contribute their assigned leaves as fixed
            // terms via a one-level lookup refit restricted to this level.
            AssignmentPhase phase;
            phase.indices = assignment;
            std::vector<LookupCodebook> level_books(std::size_t(cfg.num_rus));
            std::vector<bool> trainable(std::size_t(cfg.num_rus));
            for (int m = 0; m < cfg.num_rus; ++m) {
                const TreeCodebook& tree = out.trees[std::size_t(m)];
                level_books[std::size_t(m)].bits = tree.depth;
                level_books[std::size_t(m)].codewords = tree.levels.back();
                trainable[std::size_t(m)] = level <= cfg.fronthaul_bits[std::size_t(m)];
            }
            refit_ei_codebooks(cfg, ts, phase, level_books, &trainable);
            for (int m = 0; m < cfg.num_rus; ++m)
                if (trainable[std::size_t(m)])
                    out.trees[std::size_t(m)].levels.back() =
                        level_books[std::size_t(m)].codewords;
        }
        out.level_traces.push_back(std::move(trace));
    }

    // Final power split, scaling every level so the stored trees are in
    // normalized units and gamma restores the trained transmit scale.
    arma::vec gamma(arma::uword(cfg.num_rus), arma::fill::ones);
    for (int m = 0; m < cfg.num_rus; ++m) {
        double acc = 0.0;
        for (arma::uword p = 0; p < pairs; ++p) {
            const arma::cx_vec cw = out.trees[std::size_t(m)].leaves().col(
                arma::uword(assignment[p][std::size_t(m)]));
            acc += std::real(arma::cdot(cw, cw));
        }
        const double mean_power = acc / double(pairs);
        if (mean_power > 1e-300) {
            const double g = std::sqrt(mean_power / cfg.power[std::size_t(m)]);
            gamma(arma::uword(m)) = g;
            for (auto& level : out.trees[std::size_t(m)].levels)
                level /= g;
        }
    }
    out.gamma = gamma;
    return out;
}

// ---------------------------------------------------------------------------
// Adam and neural training
// ---------------------------------------------------------------------------

void AdamState::update(arma::vec& params, const arma::vec& grad, const AdamConfig& cfg) {
    if (params.n_elem != m.n_elem || grad.n_elem != m.n_elem)
        throw ConfigError("adam: size mismatch");
    ++step;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * (grad % grad);
    const double m_corr = 1.0 - std::pow(cfg.beta1, double(step));
    const double v_corr = 1.0 - std::pow(cfg.beta2, double(step));
    params -= cfg.lr * (m / m_corr) / (arma::sqrt(v / v_corr) + cfg.eps);
}

namespace {

struct FlatNets {
    std::vector<arma::uword> offsets;
    arma::uword total = 0;
};

FlatNets layout(const std::vector<NeuralCodebook>& nets) {
    FlatNets flat;
    for (const auto& net : nets) {
        flat.offsets.push_back(flat.total);
        flat.total += net.param_count();
    }
    return flat;
}

} // namespace

TrainedNeural neural_train_adam(const SystemConfig& cfg, const TrainingSet& ts,
                                std::vector<NeuralCodebook> init,
                                const NeuralTrainOptions& options) {
    if (int(init.size()) != cfg.num_rus)
        throw ConfigError("neural_train_adam: need one codebook per RU");
    if (options.epochs < 1)
        throw ConfigError("neural_train_adam: epochs must be >= 1");

    TrainedNeural out;
    out.nets = std::move(init);
    const arma::uword pairs = ts.pair_count();
    const FlatNets flat = layout(out.nets);

    arma::vec params(flat.total);
    for (std::size_t m = 0; m < out.nets.size(); ++m)
        params.subvec(flat.offsets[m], flat.offsets[m] + out.nets[m].param_count() - 1) =
            out.nets[m].flatten();
    AdamState adam(flat.total);
    const arma::vec unit_gamma = arma::ones(arma::uword(cfg.num_rus));

    std::vector<std::vector<arma::vec>> hard_bits(pairs); // per pair, per RU
    double initial_loss = 0.0;

    auto quantize_all = [&]() -> double {
        std::vector<double> objectives(pairs, 0.0);
        parallel_for(pairs, options.threads, [&](std::size_t p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(arma::uword(p), c, k);
            const QuantContext ctx = ts.context(cfg, c, k, unit_gamma);
            const QuantizationResult res = neural_mq_quantize(ctx, out.nets, options.schedule);
            hard_bits[p].resize(std::size_t(cfg.num_rus));
            for (int m = 0; m < cfg.num_rus; ++m) {
                arma::vec u(arma::uword(out.nets[std::size_t(m)].input_bits));
                for (arma::uword i = 0; i < u.n_elem; ++i)
                    u(i) = double(res.bits[std::size_t(m)][std::size_t(i)]);
                hard_bits[p][std::size_t(m)] = std::move(u);
            }
            objectives[p] = res.objective;
        });
        return std::accumulate(objectives.begin(), objectives.end(), 0.0) / double(pairs);
    };

    auto batch_gradient = [&]() -> arma::vec {
        arma::vec grad(flat.total, arma::fill::zeros);
        std::vector<NeuralParamGrad> pg;
        pg.reserve(out.nets.size());
        for (const auto& net : out.nets)
            pg.emplace_back(net);
        for (arma::uword p = 0; p < pairs; ++p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(p, c, k);
            const QuantContext ctx = ts.context(cfg, c, k, unit_gamma);
            const EiWorkspace ws(ctx);
            std::vector<NeuralTrace> traces(out.nets.size());
            arma::cx_vec total(ws.dim(), arma::fill::zeros);
            for (int m = 0; m < cfg.num_rus; ++m)
                total += ws.contribution(
                    m, neural_forward(out.nets[std::size_t(m)], hard_bits[p][std::size_t(m)],
                                      &traces[std::size_t(m)]));
            arma::cx_vec residual = total;
            if (ws.has_linear_term())
                residual -= ws.linear_term();
            for (int m = 0; m < cfg.num_rus; ++m) {
                const auto& net = out.nets[std::size_t(m)];
                const arma::cx_vec g_cx = ws.map(m).t() * residual;
                arma::vec grad_out(arma::uword(net.out_dim));
                const int n_tx = net.out_dim / 2;
                for (int i = 0; i < n_tx; ++i) {
                    grad_out(arma::uword(i)) = 2.0 * g_cx(arma::uword(i)).real();
                    grad_out(arma::uword(i + n_tx)) = 2.0 * g_cx(arma::uword(i)).imag();
                }
                (void)neural_backprop(net, traces[std::size_t(m)], grad_out,
                                      &pg[std::size_t(m)]);
            }
        }
        for (std::size_t m = 0; m < out.nets.size(); ++m)
            pg[m].accumulate_flat(grad, flat.offsets[m]);
        return grad / double(pairs);
    };

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double loss = quantize_all();
        out.loss_trace.push_back(loss);
        if (epoch == 0)
            initial_loss = loss;
        if (loss > options.divergence_factor * (std::abs(initial_loss) + 1.0)) {
            std::ostringstream msg;
            msg << "neural_train_adam: diverged at epoch " << epoch << " (loss " << loss
                << ", initial " << initial_loss << "); trace tail:";
            const std::size_t tail = std::min<std::size_t>(5, out.loss_trace.size());
            for (std::size_t i = out.loss_trace.size() - tail; i < out.loss_trace.size(); ++i)
                msg << " " << out.loss_trace[i];
            throw NumericError(msg.str());
        }
        for (int step = 0; step < options.steps_per_epoch; ++step) {
            if (step > 0 && options.bits_per_step)
                (void)quantize_all();
            const arma::vec grad = batch_gradient();
            if (!grad.is_finite())
                throw NumericError("neural_train_adam: non-finite gradient");
            adam.update(params, grad, options.adam);
            for (std::size_t m = 0; m < out.nets.size(); ++m)
                out.nets[m].unflatten(
                    params.subvec(flat.offsets[m], flat.offsets[m] + out.nets[m].param_count() - 1));
        }
    }

    // Fold the trained transmit scale into gamma: the output layer is scaled
    // so the stored networks emit mean power P_m over the final bits, and
    // gamma restores the trained effective signal.
    out.gamma = arma::ones(arma::uword(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        double acc = 0.0;
        for (arma::uword p = 0; p < pairs; ++p) {
            const arma::cx_vec cw =
                neural_forward(out.nets[std::size_t(m)], hard_bits[p][std::size_t(m)]);
            acc += std::real(arma::cdot(cw, cw));
        }
        const double mean_power = acc / double(pairs);
        if (mean_power > 1e-300) {
            const double g = std::sqrt(mean_power / cfg.power[std::size_t(m)]);
            out.gamma(arma::uword(m)) = g;
            out.nets[std::size_t(m)].weights.back() /= g;
            out.nets[std::size_t(m)].biases.back() /= g;
        }
    }
    return out;
}

TrainedNeural neural_vq_train_adam(const SystemConfig& cfg, const TrainingSet& ts,
                                   std::vector<NeuralCodebook> init,
                                   const NeuralTrainOptions& options) {
    if (int(init.size()) != cfg.num_rus)
        throw ConfigError("neural_vq_train_adam: need one codebook per RU");
    if (options.epochs < 1)
        throw ConfigError("neural_vq_train_adam: epochs must be >= 1");

    TrainedNeural out;
    out.nets = std::move(init);
    const arma::uword pairs = ts.pair_count();
    const FlatNets flat = layout(out.nets);

    arma::vec params(flat.total);
    for (std::size_t m = 0; m < out.nets.size(); ++m)
        params.subvec(flat.offsets[m], flat.offsets[m] + out.nets[m].param_count() - 1) =
            out.nets[m].flatten();
    AdamState adam(flat.total);

    std::vector<std::vector<arma::vec>> hard_bits(pairs);
    double initial_loss = 0.0;

    auto quantize_all = [&]() -> double {
        std::vector<double> objectives(pairs, 0.0);
        parallel_for(pairs, options.threads, [&](std::size_t p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(arma::uword(p), c, k);
            hard_bits[p].resize(std::size_t(cfg.num_rus));
            double dist = 0.0;
            for (int m = 0; m < cfg.num_rus; ++m) {
                const arma::cx_vec x_m = ts.precoded_segment(cfg, c, k, m);
                const NeuralVqResult res =
                    neural_vq_quantize(x_m, out.nets[std::size_t(m)], options.schedule);
                arma::vec u(arma::uword(out.nets[std::size_t(m)].input_bits));
                for (arma::uword i = 0; i < u.n_elem; ++i)
                    u(i) = double(res.bits[std::size_t(i)]);
                hard_bits[p][std::size_t(m)] = std::move(u);
                const arma::cx_vec diff = x_m - res.codeword;
                dist += std::real(arma::cdot(diff, diff));
            }
            objectives[p] = dist;
        });
        return std::accumulate(objectives.begin(), objectives.end(), 0.0) / double(pairs);
    };

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double loss = quantize_all();
        out.loss_trace.push_back(loss);
        if (epoch == 0)
            initial_loss = loss;
        if (loss > options.divergence_factor * (std::abs(initial_loss) + 1.0))
            throw NumericError("neural_vq_train_adam: diverged at epoch " +
                               std::to_string(epoch));

        arma::vec grad(flat.total, arma::fill::zeros);
        std::vector<NeuralParamGrad> pg;
        pg.reserve(out.nets.size());
        for (const auto& net : out.nets)
            pg.emplace_back(net);
        for (arma::uword p = 0; p < pairs; ++p) {
            std::size_t c;
            arma::uword k;
            ts.pair_location(p, c, k);
            for (int m = 0; m < cfg.num_rus; ++m) {
                const auto& net = out.nets[std::size_t(m)];
                const arma::cx_vec x_m = ts.precoded_segment(cfg, c, k, m);
                NeuralTrace trace;
                (void)neural_forward(net, hard_bits[p][std::size_t(m)], &trace);
                arma::vec target(arma::uword(net.out_dim));
                const int n_tx = net.out_dim / 2;
                for (int i = 0; i < n_tx; ++i) {
                    target(arma::uword(i)) = x_m(arma::uword(i)).real();
                    target(arma::uword(i + n_tx)) = x_m(arma::uword(i)).imag();
                }
                const arma::vec grad_out = 2.0 * (trace.output - target);
                (void)neural_backprop(net, trace, grad_out, &pg[std::size_t(m)]);
            }
        }
        for (std::size_t m = 0; m < out.nets.size(); ++m)
            pg[m].accumulate_flat(grad, flat.offsets[m]);
        grad /= double(pairs);
        if (!grad.is_finite())
            throw NumericError("neural_vq_train_adam: non-finite gradient");
        adam.update(params, grad, options.adam);
        for (std::size_t m = 0; m < out.nets.size(); ++m)
            out.nets[m].unflatten(
                params.subvec(flat.offsets[m], flat.offsets[m] + out.nets[m].param_count() - 1));
    }

    out.gamma = arma::ones(arma::uword(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        double acc = 0.0;
        for (arma::uword p = 0; p < pairs; ++p) {
            const arma::cx_vec cw =
                neural_forward(out.nets[std::size_t(m)], hard_bits[p][std::size_t(m)]);
            acc += std::real(arma::cdot(cw, cw));
        }
        const double mean_power = acc / double(pairs);
        if (mean_power > 1e-300) {
            const double g = std::sqrt(mean_power / cfg.power[std::size_t(m)]);
            out.gamma(arma::uword(m)) = g;
            out.nets[std::size_t(m)].weights.back() /= g;
            out.nets[std::size_t(m)].biases.back() /= g;
        }
    }
    return out;
}

} // namespace cfmq
