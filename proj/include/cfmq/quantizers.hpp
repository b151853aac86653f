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
#include <utility>
#include <vector>

#include "cfmq/metrics.hpp"
#include "cfmq/precoding.hpp"
#include "cfmq/types.hpp"

namespace cfmq {

/// Which effective-interference objective the quantizer minimizes.
enum class EiKind { single_antenna, multi_antenna };

/// Everything a quantizer needs for one channel use.
struct QuantContext {
    const SystemConfig* cfg = nullptr;
    const ChannelState* channel = nullptr;
    const PrecodingMatrix* prec = nullptr;
    arma::cx_vec s;                                          // total_streams
    const std::vector<arma::cx_mat>* beamformers = nullptr;  // per UE, multi kind only
    arma::vec gamma;                                         // per RU power scales
    EiKind kind = EiKind::single_antenna;
};

/// Shared machinery for every lookup-style search. The sum-EI of a codeword
/// tuple reduces to
///     obj(v) = ||v||^2 - 2 Re(b^H v),   v = sum_m (P_m c_m + o_m),
/// where for the single-antenna EI P_m folds the channel column of RU m and
/// gamma_m, o_m carries the -H_{m,n} W_{m,n} s_n targets and b = 0; for the
/// multi-antenna EI P_m stacks F_n^H H_{n,m} gamma_m, o_m = 0 and b = s.
/// Setting c_m to the zero vector reproduces an RU that stays silent, which
/// is how SMQ treats not-yet-quantized RUs and how alpha-PMQ initializes.
class EiWorkspace {
  public:
    explicit EiWorkspace(const QuantContext& ctx);

    int num_rus() const { return int(maps_.size()); }
    arma::uword dim() const { return dim_; }

    /// P_m c + o_m for an explicit codeword.
    arma::cx_vec contribution(int m, const arma::cx_vec& codeword) const;

    /// Contribution of the all-zero codeword (the silent RU).
    const arma::cx_vec& zero_contribution(int m) const { return offsets_[std::size_t(m)]; }

    /// dim x 2^B matrix of contributions, one column per codeword.
    arma::cx_mat contributions(int m, const arma::cx_mat& codewords) const;

    /// Objective value; the counted variant increments ei_evaluations and is
    /// used inside searches, so op-count assertions stay exact.
    double objective_value(const arma::cx_vec& total) const;
    double objective_counted(const arma::cx_vec& total) const {
        ++ei_evaluations;
        return objective_value(total);
    }

    const arma::cx_mat& map(int m) const { return maps_[std::size_t(m)]; }
    const arma::cx_vec& linear_term() const { return linear_; }
    bool has_linear_term() const { return has_linear_; }

    mutable long long ei_evaluations = 0;

  private:
    arma::uword dim_ = 0;
    std::vector<arma::cx_mat> maps_;    // per RU, gamma folded in
    std::vector<arma::cx_vec> offsets_; // per RU
    arma::cx_vec linear_;
    bool has_linear_ = false;
};

// ---------------------------------------------------------------------------
// Lookup codebooks
// ---------------------------------------------------------------------------

/// 2^bits codewords for one RU, one per column. The bit-to-index mapping is
/// natural binary, MSB first.
struct LookupCodebook {
    int bits = 0;
    arma::cx_mat codewords; // tx_antennas[m] x 2^bits

    int size() const { return int(codewords.n_cols); }
    void validate(const SystemConfig& cfg, int m) const;
};

/// Tree-structured codebook: level b (1-based) holds 2^b codewords; the
/// children of codeword j at level b are columns 2j and 2j+1 of level b+1,
/// so the child sets partition every level and the leaf level is the final
/// codebook.
struct TreeCodebook {
    int depth = 0;
    std::vector<arma::cx_mat> levels; // levels[b-1] : dim x 2^b

    void validate(const SystemConfig& cfg, int m) const;
    const arma::cx_mat& leaves() const { return levels.back(); }
};

// ---------------------------------------------------------------------------
// Quantizers
// ---------------------------------------------------------------------------

/// Nearest codeword in Euclidean distance; ties take the lowest index.
std::pair<std::vector<std::uint8_t>, arma::cx_vec> vq_quantize(const arma::cx_vec& x_m,
                                                               const LookupCodebook& book);

/// Per-RU VQ applied to x = W s; the reported objective is the sum-EI of the
/// resulting tuple so VQ can be compared against the joint schemes.
QuantizationResult vq_quantize_all(const QuantContext& ctx,
                                   const std::vector<LookupCodebook>& books);

inline constexpr long long kDefaultMqCap = 1LL << 20;

/// Exhaustive multivariate quantization: global argmin of the sum-EI over
/// the Cartesian product of all RU codebooks. Enumeration is lexicographic
/// over RU index then codeword index and ties keep the first (smallest)
/// tuple. Refuses with ComplexityError when the product exceeds the cap.
QuantizationResult mq_quantize(const QuantContext& ctx, const std::vector<LookupCodebook>& books,
                               long long cap = kDefaultMqCap);

/// Sequential MQ: one local search per RU in the given order, with earlier
/// RUs fixed at their chosen (scaled) codewords and later RUs silent.
QuantizationResult smq_quantize(const QuantContext& ctx, const std::vector<LookupCodebook>& books,
                                const std::vector<int>& order);

QuantizationResult smq_quantize(const QuantContext& ctx, const std::vector<LookupCodebook>& books);

// ---------------------------------------------------------------------------
// Interference graph and alpha-PMQ
// ---------------------------------------------------------------------------

/// Undirected interference graph over RUs: nodes m, m' are adjacent when the
/// dot product of their channel-gain vectors exceeds g(alpha), the
/// floor(alpha K)-th smallest of the K = M(M-1)/2 pairwise dot products
/// (with sentinel -1 at index 0).
struct InterferenceGraph {
    int num_nodes = 0;
    arma::mat gains;     // M x N, row m = [||H_{m,1}||_F^2, ..., ||H_{m,N}||_F^2]
    double threshold = 0.0;
    std::vector<std::pair<int, int>> edges; // m < m'

    bool adjacent(int a, int b) const;
    int degree(int node) const;
};

InterferenceGraph build_interference_graph(const SystemConfig& cfg, const ChannelState& channel,
                                           double alpha);

/// Disjoint independent sets covering all nodes, in the order produced by
/// the recursive-largest-first coloring heuristic. Each class is seeded with
/// the maximum-degree uncolored vertex and grown by the candidate with the
/// most neighbours among the excluded vertices; all ties take the lowest
/// node index.
struct QuantizationSchedule {
    std::vector<std::vector<int>> sets;
    int iterations = 0; // T, filled in by alpha_pmq_quantize
};

QuantizationSchedule rlf_independent_sets(const InterferenceGraph& graph);

struct AlphaPmqOptions {
    double alpha = 0.5;
    int iterations = 0;      // T; 0 means one pass over all independent sets
    bool sequential = false; // update members of a set one by one instead of in parallel
    std::vector<double>* objective_trace = nullptr; // optional per-iteration record
};

/// Parallel multivariate quantization over the RLF schedule. All codewords
/// start silent with disturbances consistent with the zero codeword; at
/// iteration t the members of schedule set ((t-1) mod I) each minimize the
/// sum-EI against the other RUs' previous-iteration disturbances
/// (Jacobi-style unless options.sequential), and everything else carries
/// forward.
QuantizationResult alpha_pmq_quantize(const QuantContext& ctx,
                                      const std::vector<LookupCodebook>& books,
                                      const AlphaPmqOptions& options);

// ---------------------------------------------------------------------------
// Tree quantization
// ---------------------------------------------------------------------------

struct TreeQuantizeResult {
    std::vector<std::uint8_t> bits;
    arma::cx_vec codeword;
    long long comparisons = 0; // one two-way comparison per level
};

/// Point-to-point tree descent: B sequential two-way nearest-neighbour
/// choices, returning the selected leaf.
TreeQuantizeResult tree_quantize(const arma::cx_vec& x, const TreeCodebook& tree);

/// Tree-structured MQ: at each level the 2^M product of the per-RU
/// restricted two-codeword sets is searched jointly for the minimum sum-EI.
/// An RU whose depth is exhausted keeps searching inside its last restricted
/// pair, so exactly max_m B_m * 2^M EI evaluations are performed.
QuantizationResult tree_mq_quantize(const QuantContext& ctx,
                                    const std::vector<TreeCodebook>& trees,
                                    long long cap = kDefaultMqCap);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Codebooks are stored as JSON: per-RU dims, bit width, power scale and
/// row-major [re, im] codeword entries. Trees store one such list per level.
std::string codebooks_to_json(const std::vector<LookupCodebook>& books, const arma::vec& gamma);
std::pair<std::vector<LookupCodebook>, arma::vec> codebooks_from_json(const std::string& text);

std::string trees_to_json(const std::vector<TreeCodebook>& trees, const arma::vec& gamma);
std::pair<std::vector<TreeCodebook>, arma::vec> trees_from_json(const std::string& text);

} // namespace cfmq
