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

#include "cfmq/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfmq {

// ---------------------------------------------------------------------------
// EiWorkspace
// ---------------------------------------------------------------------------

EiWorkspace::EiWorkspace(const QuantContext& ctx) {
    const SystemConfig& cfg = *ctx.cfg;
    const ChannelState& channel = *ctx.channel;
    if (ctx.gamma.n_elem != arma::uword(cfg.num_rus))
        throw ConfigError("EiWorkspace: gamma must have one entry per RU");
    if (ctx.s.n_elem != arma::uword(cfg.total_streams()))
        throw ConfigError("EiWorkspace: symbol vector length mismatch");

    maps_.resize(std::size_t(cfg.num_rus));
    offsets_.resize(std::size_t(cfg.num_rus));

    if (ctx.kind == EiKind::single_antenna) {
        if (!cfg.is_scalar())
            throw ConfigError("EiWorkspace: single-antenna EI needs a scalar system");
        dim_ = arma::uword(cfg.num_ues);
        has_linear_ = false;
        linear_.zeros(dim_);
        for (int m = 0; m < cfg.num_rus; ++m) {
            const arma::uword col = arma::uword(cfg.ru_col_offset(m));
            maps_[std::size_t(m)] = ctx.gamma(arma::uword(m)) * channel.h.col(col);
            arma::cx_vec offset(dim_);
            for (int n = 0; n < cfg.num_ues; ++n) {
                const std::complex<double> h_mn =
                    channel.h(arma::uword(cfg.ue_row_offset(n)), col);
                const std::complex<double> w_mn =
                    ctx.prec->w(col, arma::uword(cfg.ue_stream_offset(n)));
                offset(arma::uword(n)) =
                    -h_mn * w_mn * ctx.s(arma::uword(cfg.ue_stream_offset(n)));
            }
            offsets_[std::size_t(m)] = offset;
        }
    } else {
        if (ctx.beamformers == nullptr || int(ctx.beamformers->size()) != cfg.num_ues)
            throw ConfigError("EiWorkspace: multi-antenna EI needs one beamformer per UE");
        dim_ = arma::uword(cfg.total_streams());
        has_linear_ = true;
        linear_ = ctx.s;
        for (int m = 0; m < cfg.num_rus; ++m) {
            arma::cx_mat map(dim_, arma::uword(cfg.tx_antennas[m]));
            for (int n = 0; n < cfg.num_ues; ++n) {
                const arma::uword r0 = arma::uword(cfg.ue_stream_offset(n));
                map.rows(r0, r0 + arma::uword(cfg.streams[n]) - 1) =
                    (*ctx.beamformers)[std::size_t(n)].t() * channel.block(cfg, m, n);
            }
            maps_[std::size_t(m)] = ctx.gamma(arma::uword(m)) * map;
            offsets_[std::size_t(m)].zeros(dim_);
        }
    }
}

arma::cx_vec EiWorkspace::contribution(int m, const arma::cx_vec& codeword) const {
    return maps_[std::size_t(m)] * codeword + offsets_[std::size_t(m)];
}

arma::cx_mat EiWorkspace::contributions(int m, const arma::cx_mat& codewords) const {
    arma::cx_mat out = maps_[std::size_t(m)] * codewords;
    out.each_col() += offsets_[std::size_t(m)];
    return out;
}

double EiWorkspace::objective_value(const arma::cx_vec& total) const {
    double val = std::real(arma::cdot(total, total));
    if (has_linear_)
        val -= 2.0 * std::real(arma::cdot(linear_, total));
    return val;
}

// ---------------------------------------------------------------------------
// Codebook validation
// ---------------------------------------------------------------------------

void LookupCodebook::validate(const SystemConfig& cfg, int m) const {
    if (bits < 1)
        throw ConfigError("codebook: bits must be >= 1");
    if (int(codewords.n_cols) != (1 << bits))
        throw ConfigError("codebook: expected 2^bits codewords");
    if (int(codewords.n_rows) != cfg.tx_antennas[std::size_t(m)])
        throw ConfigError("codebook: codeword dimension mismatch for RU " + std::to_string(m));
    if (!codewords.is_finite())
        throw ConfigError("codebook: non-finite codeword");
}

void TreeCodebook::validate(const SystemConfig& cfg, int m) const {
    if (depth < 1 || int(levels.size()) != depth)
        throw ConfigError("tree codebook: bad depth");
    for (int b = 0; b < depth; ++b) {
        if (int(levels[std::size_t(b)].n_cols) != (1 << (b + 1)))
            throw ConfigError("tree codebook: level " + std::to_string(b + 1) +
                              " must hold 2^level codewords");
        if (int(levels[std::size_t(b)].n_rows) != cfg.tx_antennas[std::size_t(m)])
            throw ConfigError("tree codebook: codeword dimension mismatch");
        if (!levels[std::size_t(b)].is_finite())
            throw ConfigError("tree codebook: non-finite codeword");
    }
}

static void validate_books(const QuantContext& ctx, const std::vector<LookupCodebook>& books) {
    if (int(books.size()) != ctx.cfg->num_rus)
        throw ConfigError("quantize: need one codebook per RU");
    for (int m = 0; m < ctx.cfg->num_rus; ++m)
        books[std::size_t(m)].validate(*ctx.cfg, m);
}

static QuantizationResult make_result(const QuantContext& ctx,
                                      const std::vector<LookupCodebook>& books,
                                      const std::vector<int>& indices, double objective,
                                      long long evals) {
    const SystemConfig& cfg = *ctx.cfg;
    QuantizationResult res;
    res.bits.resize(std::size_t(cfg.num_rus));
    res.xhat.set_size(arma::uword(cfg.total_tx()));
    for (int m = 0; m < cfg.num_rus; ++m) {
        res.bits[std::size_t(m)] = index_to_bits(indices[std::size_t(m)], books[std::size_t(m)].bits);
        const int c0 = cfg.ru_col_offset(m);
        res.xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) =
            books[std::size_t(m)].codewords.col(arma::uword(indices[std::size_t(m)]));
    }
    res.gamma = ctx.gamma;
    res.objective = objective;
    res.ei_evaluations = evals;
    return res;
}

// ---------------------------------------------------------------------------
// VQ
// ---------------------------------------------------------------------------

std::pair<std::vector<std::uint8_t>, arma::cx_vec> vq_quantize(const arma::cx_vec& x_m,
                                                               const LookupCodebook& book) {
    if (x_m.n_elem != book.codewords.n_rows)
        throw ConfigError("vq_quantize: input dimension mismatch");
    int best = 0;
    double best_d = std::real(arma::cdot(x_m - book.codewords.col(0), x_m - book.codewords.col(0)));
    for (int j = 1; j < book.size(); ++j) {
        const arma::cx_vec diff = x_m - book.codewords.col(arma::uword(j));
        const double d = std::real(arma::cdot(diff, diff));
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return {index_to_bits(best, book.bits), book.codewords.col(arma::uword(best))};
}

QuantizationResult vq_quantize_all(const QuantContext& ctx,
                                   const std::vector<LookupCodebook>& books) {
    validate_books(ctx, books);
    const SystemConfig& cfg = *ctx.cfg;
    const arma::cx_vec x = ctx.prec->w * ctx.s;

    EiWorkspace ws(ctx);
    std::vector<int> indices(std::size_t(cfg.num_rus), 0);
    long long evals = 0;
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int c0 = cfg.ru_col_offset(m);
        const arma::cx_vec x_m = x.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1));
        auto [bits, codeword] = vq_quantize(x_m, books[std::size_t(m)]);
        indices[std::size_t(m)] = bits_to_index(bits);
        evals += books[std::size_t(m)].size(); // distance evaluations, the VQ analogue
        total += ws.contribution(m, codeword);
    }
    return make_result(ctx, books, indices, ws.objective_value(total), evals);
}

// ---------------------------------------------------------------------------
// MQ
// ---------------------------------------------------------------------------

QuantizationResult mq_quantize(const QuantContext& ctx, const std::vector<LookupCodebook>& books,
                               long long cap) {
    validate_books(ctx, books);
    const int num_rus = ctx.cfg->num_rus;

    long long combos = 1;
    for (const auto& b : books) {
        combos *= b.size();
        if (combos > cap)
            throw ComplexityError("mq_quantize: search space of " + std::to_string(combos) +
                                  "+ EI evaluations exceeds the cap of " + std::to_string(cap));
    }

    EiWorkspace ws(ctx);
    std::vector<arma::cx_mat> contribs(static_cast<std::size_t>(num_rus));
    for (int m = 0; m < num_rus; ++m)
        contribs[std::size_t(m)] = ws.contributions(m, books[std::size_t(m)].codewords);

    std::vector<int> current(std::size_t(num_rus), 0);
    std::vector<int> best_idx(std::size_t(num_rus), 0);
    double best = std::numeric_limits<double>::infinity();

    // Depth-first over RUs with running partial sums; lexicographic order
    // makes the strict '<' keep the smallest tie.
    std::vector<arma::cx_vec> partial(std::size_t(num_rus) + 1);
    partial[0].zeros(ws.dim());
    int depth = 0;
    std::vector<int> cursor(std::size_t(num_rus), 0);
    while (depth >= 0) {
        if (cursor[std::size_t(depth)] >= books[std::size_t(depth)].size()) {
            cursor[std::size_t(depth)] = 0;
            --depth;
            if (depth >= 0)
                ++cursor[std::size_t(depth)];
            continue;
        }
        const int j = cursor[std::size_t(depth)];
        current[std::size_t(depth)] = j;
        partial[std::size_t(depth) + 1] =
            partial[std::size_t(depth)] + contribs[std::size_t(depth)].col(arma::uword(j));
        if (depth == num_rus - 1) {
            const double val = ws.objective_counted(partial[std::size_t(num_rus)]);
            if (val < best) {
                best = val;
                best_idx = current;
            }
            ++cursor[std::size_t(depth)];
        } else {
            ++depth;
        }
    }
    return make_result(ctx, books, best_idx, best, ws.ei_evaluations);
}

// ---------------------------------------------------------------------------
// SMQ
// ---------------------------------------------------------------------------

QuantizationResult smq_quantize(const QuantContext& ctx, const std::vector<LookupCodebook>& books,
                                const std::vector<int>& order) {
    validate_books(ctx, books);
    const int num_rus = ctx.cfg->num_rus;
    {
        std::vector<int> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        for (int m = 0; m < num_rus; ++m)
            if (m >= int(sorted.size()) || sorted[std::size_t(m)] != m)
                throw ConfigError("smq_quantize: order must be a permutation of the RUs");
    }

    EiWorkspace ws(ctx);
    std::vector<int> indices(std::size_t(num_rus), -1);
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    for (int m = 0; m < num_rus; ++m)
        total += ws.zero_contribution(m); // every RU starts silent

    std::vector<arma::cx_vec> current(static_cast<std::size_t>(num_rus));
    for (int m = 0; m < num_rus; ++m)
        current[std::size_t(m)] = ws.zero_contribution(m);

    double last = 0.0;
    for (int m : order) {
        const arma::cx_vec base = total - current[std::size_t(m)];
        const arma::cx_mat cand = ws.contributions(m, books[std::size_t(m)].codewords);
        int best = 0;
        double best_val = ws.objective_counted(base + cand.col(0));
        for (int j = 1; j < books[std::size_t(m)].size(); ++j) {
            const double val = ws.objective_counted(base + cand.col(arma::uword(j)));
            if (val < best_val) {
                best_val = val;
                best = j;
            }
        }
        indices[std::size_t(m)] = best;
        current[std::size_t(m)] = cand.col(arma::uword(best));
        total = base + current[std::size_t(m)];
        last = best_val;
    }
    return make_result(ctx, books, indices, last, ws.ei_evaluations);
}

QuantizationResult smq_quantize(const QuantContext& ctx,
                                const std::vector<LookupCodebook>& books) {
    std::vector<int> order(std::size_t(ctx.cfg->num_rus));
    std::iota(order.begin(), order.end(), 0);
    return smq_quantize(ctx, books, order);
}

// ---------------------------------------------------------------------------
// Interference graph and RLF
// ---------------------------------------------------------------------------

bool InterferenceGraph::adjacent(int a, int b) const {
    for (const auto& e : edges)
        if ((e.first == a && e.second == b) || (e.first == b && e.second == a))
            return true;
    return false;
}

int InterferenceGraph::degree(int node) const {
    int d = 0;
    for (const auto& e : edges)
        if (e.first == node || e.second == node)
            ++d;
    return d;
}

InterferenceGraph build_interference_graph(const SystemConfig& cfg, const ChannelState& channel,
                                           double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("build_interference_graph: alpha must lie in [0, 1]");
    InterferenceGraph graph;
    graph.num_nodes = cfg.num_rus;
    graph.gains.set_size(arma::uword(cfg.num_rus), arma::uword(cfg.num_ues));
    for (int m = 0; m < cfg.num_rus; ++m)
        for (int n = 0; n < cfg.num_ues; ++n) {
            const arma::cx_mat block = channel.block(cfg, m, n);
            graph.gains(arma::uword(m), arma::uword(n)) =
                std::real(arma::accu(block % arma::conj(block)));
        }

    const int num_pairs = cfg.num_rus * (cfg.num_rus - 1) / 2;
    std::vector<double> dots;
    dots.reserve(std::size_t(num_pairs));
    for (int m = 0; m < cfg.num_rus; ++m)
        for (int mp = m + 1; mp < cfg.num_rus; ++mp)
            dots.push_back(arma::dot(graph.gains.row(arma::uword(m)),
                                     graph.gains.row(arma::uword(mp))));
    std::vector<double> sorted = dots;
    std::sort(sorted.begin(), sorted.end());

    // g(alpha) is the floor(alpha K)-th smallest dot product, with the
    // sentinel -1 at rank zero so that alpha = 0 keeps every edge.
    const int rank = int(std::floor(alpha * double(num_pairs)));
    graph.threshold = rank <= 0 ? -1.0 : sorted[std::size_t(rank - 1)];

    int pair = 0;
    for (int m = 0; m < cfg.num_rus; ++m)
        for (int mp = m + 1; mp < cfg.num_rus; ++mp, ++pair)
            if (dots[std::size_t(pair)] > graph.threshold)
                graph.edges.emplace_back(m, mp);
    return graph;
}

QuantizationSchedule rlf_independent_sets(const InterferenceGraph& graph) {
    const int n = graph.num_nodes;
    std::vector<bool> colored(std::size_t(n), false);
    int remaining = n;

    QuantizationSchedule schedule;
    while (remaining > 0) {
        // Degree within the uncolored subgraph.
        auto sub_degree = [&](int v) {
            int d = 0;
            for (const auto& e : graph.edges) {
                if (e.first == v && !colored[std::size_t(e.second)])
                    ++d;
                if (e.second == v && !colored[std::size_t(e.first)])
                    ++d;
            }
            return d;
        };

        int seed = -1, seed_deg = -1;
        for (int v = 0; v < n; ++v)
            if (!colored[std::size_t(v)] && sub_degree(v) > seed_deg) {
                seed = v;
                seed_deg = sub_degree(v);
            }

        std::vector<int> cls{seed};
        std::vector<bool> excluded(std::size_t(n), false); // adjacent to the class
        auto exclude_neighbours = [&](int v) {
            for (const auto& e : graph.edges) {
                if (e.first == v)
                    excluded[std::size_t(e.second)] = true;
                if (e.second == v)
                    excluded[std::size_t(e.first)] = true;
            }
        };
        exclude_neighbours(seed);

        for (;;) {
            int pick = -1, pick_key = -1;
            for (int v = 0; v < n; ++v) {
                if (colored[std::size_t(v)] || excluded[std::size_t(v)] || v == seed)
                    continue;
                if (std::find(cls.begin(), cls.end(), v) != cls.end())
                    continue;
                // Candidates with many neighbours among the excluded vertices
                // leave the most freedom for later classes.
                int key = 0;
                for (const auto& e : graph.edges) {
                    if (e.first == v && excluded[std::size_t(e.second)] &&
                        !colored[std::size_t(e.second)])
                        ++key;
                    if (e.second == v && excluded[std::size_t(e.first)] &&
                        !colored[std::size_t(e.first)])
                        ++key;
                }
                if (key > pick_key) {
                    pick = v;
                    pick_key = key;
                }
            }
            if (pick < 0)
                break;
            cls.push_back(pick);
            exclude_neighbours(pick);
        }

        std::sort(cls.begin(), cls.end());
        for (int v : cls) {
            colored[std::size_t(v)] = true;
            --remaining;
        }
        schedule.sets.push_back(std::move(cls));
    }
    return schedule;
}

// ---------------------------------------------------------------------------
// alpha-PMQ
// ---------------------------------------------------------------------------

QuantizationResult alpha_pmq_quantize(const QuantContext& ctx,
                                      const std::vector<LookupCodebook>& books,
                                      const AlphaPmqOptions& options) {
    validate_books(ctx, books);
    const SystemConfig& cfg = *ctx.cfg;
    const int num_rus = cfg.num_rus;

    const InterferenceGraph graph = build_interference_graph(cfg, *ctx.channel, options.alpha);
    QuantizationSchedule schedule = rlf_independent_sets(graph);
    const int num_sets = int(schedule.sets.size());
    const int iterations = options.iterations > 0 ? options.iterations : num_sets;
    schedule.iterations = iterations;

    EiWorkspace ws(ctx);
    std::vector<arma::cx_mat> contribs(static_cast<std::size_t>(num_rus));
    for (int m = 0; m < num_rus; ++m)
        contribs[std::size_t(m)] = ws.contributions(m, books[std::size_t(m)].codewords);

    // Disturbances start consistent with every RU sending the zero codeword,
    // matching how SMQ treats not-yet-visited RUs; a singleton schedule with
    // T = M then reproduces SMQ exactly.
    std::vector<arma::cx_vec> current(static_cast<std::size_t>(num_rus));
    std::vector<int> indices(std::size_t(num_rus), 0);
    std::vector<bool> visited(std::size_t(num_rus), false);
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    for (int m = 0; m < num_rus; ++m) {
        current[std::size_t(m)] = ws.zero_contribution(m);
        total += current[std::size_t(m)];
    }

    double last = ws.objective_value(total);
    for (int t = 1; t <= iterations; ++t) {
        const std::vector<int>& members = schedule.sets[std::size_t((t - 1) % num_sets)];
        // Jacobi step: every member searches against the pre-iteration state.
        const arma::cx_vec frozen_total = total;
        std::vector<std::pair<int, int>> updates;
        updates.reserve(members.size());
        for (int m : members) {
            const arma::cx_vec base =
                (options.sequential ? total : frozen_total) - current[std::size_t(m)];
            int best = 0;
            double best_val = ws.objective_counted(base + contribs[std::size_t(m)].col(0));
            for (int j = 1; j < books[std::size_t(m)].size(); ++j) {
                const double val =
                    ws.objective_counted(base + contribs[std::size_t(m)].col(arma::uword(j)));
                if (val < best_val) {
                    best_val = val;
                    best = j;
                }
            }
            if (options.sequential) {
                total -= current[std::size_t(m)];
                current[std::size_t(m)] = contribs[std::size_t(m)].col(arma::uword(best));
                total += current[std::size_t(m)];
                indices[std::size_t(m)] = best;
                visited[std::size_t(m)] = true;
            } else {
                updates.emplace_back(m, best);
            }
        }
        for (const auto& [m, best] : updates) {
            total -= current[std::size_t(m)];
            current[std::size_t(m)] = contribs[std::size_t(m)].col(arma::uword(best));
            total += current[std::size_t(m)];
            indices[std::size_t(m)] = best;
            visited[std::size_t(m)] = true;
        }
        last = ws.objective_value(total);
        if (options.objective_trace != nullptr)
            options.objective_trace->push_back(last);
    }

    // An RU the schedule never reached still has to transmit addressable
    // bits; it falls back to codeword 0 and the objective is recomputed so
    // the reported tuple stays self-consistent.
    for (int m = 0; m < num_rus; ++m)
        if (!visited[std::size_t(m)]) {
            total -= current[std::size_t(m)];
            current[std::size_t(m)] = contribs[std::size_t(m)].col(0);
            total += current[std::size_t(m)];
            indices[std::size_t(m)] = 0;
            last = ws.objective_value(total);
        }
    return make_result(ctx, books, indices, last, ws.ei_evaluations);
}

// ---------------------------------------------------------------------------
// Tree quantization
// ---------------------------------------------------------------------------

TreeQuantizeResult tree_quantize(const arma::cx_vec& x, const TreeCodebook& tree) {
    if (tree.depth < 1)
        throw ConfigError("tree_quantize: empty tree");
    TreeQuantizeResult res;
    res.bits.resize(std::size_t(tree.depth));
    int base = 0;
    for (int b = 0; b < tree.depth; ++b) {
        const arma::cx_mat& level = tree.levels[std::size_t(b)];
        const arma::cx_vec d0 = x - level.col(arma::uword(base));
        const arma::cx_vec d1 = x - level.col(arma::uword(base + 1));
        res.comparisons += 1; // one two-way comparison per level
        const int choice =
            std::real(arma::cdot(d1, d1)) < std::real(arma::cdot(d0, d0)) ? 1 : 0;
        res.bits[std::size_t(b)] = std::uint8_t(choice);
        const int index = base + choice;
        if (b + 1 < tree.depth)
            base = 2 * index;
        else
            res.codeword = level.col(arma::uword(index));
    }
    return res;
}

QuantizationResult tree_mq_quantize(const QuantContext& ctx,
                                    const std::vector<TreeCodebook>& trees, long long cap) {
    const SystemConfig& cfg = *ctx.cfg;
    if (int(trees.size()) != cfg.num_rus)
        throw ConfigError("tree_mq_quantize: need one tree per RU");
    for (int m = 0; m < cfg.num_rus; ++m)
        trees[std::size_t(m)].validate(cfg, m);

    const int num_rus = cfg.num_rus;
    if ((1LL << num_rus) > cap)
        throw ComplexityError("tree_mq_quantize: 2^M exceeds the evaluation cap");

    int max_depth = 0;
    for (const auto& t : trees)
        max_depth = std::max(max_depth, t.depth);

    EiWorkspace ws(ctx);

    struct RuCursor {
        int level = 0; // 0-based level currently searched
        int base = 0;  // first index of the active two-codeword set
        int index = 0; // chosen codeword within the level
    };
    std::vector<RuCursor> cursors(static_cast<std::size_t>(num_rus));
    std::vector<std::vector<std::uint8_t>> bits(static_cast<std::size_t>(num_rus));
    for (int m = 0; m < num_rus; ++m)
        bits[std::size_t(m)].resize(std::size_t(trees[std::size_t(m)].depth), 0);

    double best_val = 0.0;
    for (int b = 0; b < max_depth; ++b) {
        // Advance every RU that still has depth left; exhausted RUs keep the
        // restricted pair of their final level.
        for (int m = 0; m < num_rus; ++m) {
            const TreeCodebook& tree = trees[std::size_t(m)];
            if (b == 0) {
                cursors[std::size_t(m)] = {0, 0, 0};
            } else if (b < tree.depth) {
                cursors[std::size_t(m)].base = 2 * cursors[std::size_t(m)].index;
                cursors[std::size_t(m)].level = b;
            }
        }

        std::vector<arma::cx_mat> cand(static_cast<std::size_t>(num_rus));
        for (int m = 0; m < num_rus; ++m) {
            const RuCursor& cur = cursors[std::size_t(m)];
            const arma::cx_mat& level = trees[std::size_t(m)].levels[std::size_t(cur.level)];
            cand[std::size_t(m)] =
                ws.contributions(m, level.cols(arma::uword(cur.base), arma::uword(cur.base + 1)));
        }

        // Joint search over the 2^M product of restricted pairs. RU 0 is the
        // most significant digit so ties resolve like mq_quantize.
        int best_mask = 0;
        best_val = std::numeric_limits<double>::infinity();
        for (int mask = 0; mask < (1 << num_rus); ++mask) {
            arma::cx_vec total(ws.dim(), arma::fill::zeros);
            for (int m = 0; m < num_rus; ++m)
                total += cand[std::size_t(m)].col(arma::uword((mask >> (num_rus - 1 - m)) & 1));
            const double val = ws.objective_counted(total);
            if (val < best_val) {
                best_val = val;
                best_mask = mask;
            }
        }

        for (int m = 0; m < num_rus; ++m) {
            const int choice = (best_mask >> (num_rus - 1 - m)) & 1;
            RuCursor& cur = cursors[std::size_t(m)];
            cur.index = cur.base + choice;
            const int depth_m = trees[std::size_t(m)].depth;
            // The last bit keeps tracking the latest choice once the RU's
            // own depth is exhausted.
            bits[std::size_t(m)][std::size_t(std::min(b, depth_m - 1))] = std::uint8_t(choice);
        }
    }

    QuantizationResult res;
    res.bits = std::move(bits);
    res.xhat.set_size(arma::uword(cfg.total_tx()));
    for (int m = 0; m < num_rus; ++m) {
        const RuCursor& cur = cursors[std::size_t(m)];
        const int c0 = cfg.ru_col_offset(m);
        res.xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) =
            trees[std::size_t(m)].levels[std::size_t(cur.level)].col(arma::uword(cur.index));
    }
    res.gamma = ctx.gamma;
    res.objective = best_val;
    res.ei_evaluations = ws.ei_evaluations;
    return res;
}

} // namespace cfmq
