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

#include "cfmq/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfmq/accounting.hpp"
#include "cfmq/parallel.hpp"

namespace cfmq {

namespace {

// Substream tags for evaluation-side randomness.
constexpr std::uint64_t kStreamEvalChannel = 21;
constexpr std::uint64_t kStreamEvalGaussian = 22;
constexpr std::uint64_t kStreamEvalQam = 23;
constexpr std::uint64_t kStreamEvalNoise = 24;
constexpr std::uint64_t kStreamPilotNoise = 25;
constexpr std::uint64_t kStreamInit = 31;
constexpr std::uint64_t kStreamCpGamma = 41;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

enum class TrainedKind { lookup, tree, neural_mq, neural_vq, cp };

struct TrainedScheme {
    SchemeSpec spec;
    TrainedKind kind = TrainedKind::lookup;
    LookupKind lookup_kind = LookupKind::vq;
    std::vector<LookupCodebook> books;
    std::vector<TreeCodebook> trees;
    std::vector<NeuralCodebook> nets;
    arma::cx_mat cp_precoder; // quantized precoder shared across the eval block
    arma::vec gamma;
};

LookupKind lookup_kind_of(const std::string& name) {
    if (name == "vq")
        return LookupKind::vq;
    if (name == "mq")
        return LookupKind::mq;
    if (name == "smq")
        return LookupKind::smq;
    return LookupKind::alpha_pmq;
}

std::vector<NeuralCodebook> make_nets(const SystemConfig& cfg, const SchemeSpec& spec, Rng& rng) {
    std::vector<NeuralCodebook> nets;
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int bits = cfg.fronthaul_bits[std::size_t(m)];
        const int hidden = spec.hidden_neurons > 0 ? spec.hidden_neurons : bits;
        NeuralCodebook net =
            NeuralCodebook::make(bits, cfg.tx_antennas[std::size_t(m)], hidden,
                                 spec.hidden_layers);
        net.randomize(rng, std::sqrt(cfg.power[std::size_t(m)]));
        nets.push_back(std::move(net));
    }
    return nets;
}

TrainedScheme train_scheme(const SystemConfig& cfg, const Scenario& scenario,
                           const SchemeSpec& spec, const TrainingSet& ts, int threads,
                           const TrainedScheme* nested_prev) {
    TrainedScheme out;
    out.spec = spec;
    Rng init_rng = Rng::stream(scenario.seed,
                               {kStreamInit, std::uint64_t(cfg.fronthaul_bits.front()),
                                std::uint64_t(std::hash<std::string>{}(spec.name))});

    if (spec.name == "cp") {
        // The compress-and-precode baseline has no fronthaul codebooks; its
        // shared quantized precoder is derived from the evaluation block.
        out.kind = TrainedKind::cp;
        out.gamma = arma::ones(arma::uword(cfg.num_rus));
        return out;
    }
    if (spec.name == "tree_mq") {
        out.kind = TrainedKind::tree;
        TreeTrainOptions opts;
        opts.lloyd_rounds = scenario.lloyd_rounds_per_level;
        opts.cap = spec.cap;
        opts.threads = threads;
        TrainedTrees trained = tree_codebook_train(cfg, ts, opts, init_rng);
        out.trees = std::move(trained.trees);
        out.gamma = std::move(trained.gamma);
        return out;
    }
    if (spec.name == "neural_mq" || spec.name == "neural_vq") {
        out.kind = spec.name == "neural_mq" ? TrainedKind::neural_mq : TrainedKind::neural_vq;
        NeuralTrainOptions opts;
        opts.epochs = spec.epochs > 0 ? spec.epochs : scenario.train_epochs;
        opts.adam.lr = spec.learning_rate;
        opts.schedule.gd_steps = spec.gd_steps;
        opts.schedule.step_size = spec.step_size;
        opts.threads = threads;
        std::vector<NeuralCodebook> init = make_nets(cfg, spec, init_rng);
        TrainedNeural trained = out.kind == TrainedKind::neural_mq
                                    ? neural_train_adam(cfg, ts, std::move(init), opts)
                                    : neural_vq_train_adam(cfg, ts, std::move(init), opts);
        out.nets = std::move(trained.nets);
        out.gamma = std::move(trained.gamma);
        return out;
    }

    out.kind = TrainedKind::lookup;
    out.lookup_kind = lookup_kind_of(spec.name);
    std::vector<LookupCodebook> init =
        nested_prev != nullptr && !nested_prev->books.empty()
            ? nested_codebook_init(cfg, nested_prev->books, nested_prev->gamma, init_rng)
            : init_codebooks_from_targets(cfg, ts, init_rng);
    LloydOptions opts;
    opts.rounds = scenario.train_rounds;
    opts.alpha = spec.alpha;
    opts.pmq_iterations = spec.iterations;
    opts.mq_cap = spec.cap;
    opts.threads = threads;
    TrainedLookup trained = lloyd_max_train(out.lookup_kind, cfg, ts, std::move(init), opts);
    out.books = std::move(trained.books);
    out.gamma = std::move(trained.gamma);
    return out;
}

QuantizationResult quantize_one(const QuantContext& ctx, const TrainedScheme& scheme) {
    switch (scheme.kind) {
        case TrainedKind::cp: {
            // No per-use search: the RU applies the shared quantized
            // precoder. No fronthaul bit indices exist for this baseline.
            const SystemConfig& cfg = *ctx.cfg;
            EiWorkspace ws(ctx);
            QuantizationResult res;
            res.bits.assign(std::size_t(cfg.num_rus), {});
            res.xhat = scheme.cp_precoder * ctx.s;
            arma::cx_vec total(ws.dim(), arma::fill::zeros);
            for (int m = 0; m < cfg.num_rus; ++m) {
                const int c0 = cfg.ru_col_offset(m);
                total += ws.contribution(
                    m, res.xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)));
            }
            res.gamma = ctx.gamma;
            res.objective = ws.objective_value(total);
            return res;
        }
        case TrainedKind::tree:
            return tree_mq_quantize(ctx, scheme.trees, scheme.spec.cap);
        case TrainedKind::neural_mq: {
            AnnealSchedule sched;
            sched.gd_steps = scheme.spec.gd_steps;
            sched.step_size = scheme.spec.step_size;
            return neural_mq_quantize(ctx, scheme.nets, sched);
        }
        case TrainedKind::neural_vq: {
            AnnealSchedule sched;
            sched.gd_steps = scheme.spec.gd_steps;
            sched.step_size = scheme.spec.step_size;
            const SystemConfig& cfg = *ctx.cfg;
            const arma::cx_vec x = ctx.prec->w * ctx.s;
            EiWorkspace ws(ctx);
            QuantizationResult res;
            res.bits.resize(std::size_t(cfg.num_rus));
            res.xhat.set_size(arma::uword(cfg.total_tx()));
            arma::cx_vec total(ws.dim(), arma::fill::zeros);
            for (int m = 0; m < cfg.num_rus; ++m) {
                const int c0 = cfg.ru_col_offset(m);
                const arma::cx_vec x_m =
                    x.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1));
                const NeuralVqResult vq =
                    neural_vq_quantize(x_m, scheme.nets[std::size_t(m)], sched);
                res.bits[std::size_t(m)] = vq.bits;
                res.xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) =
                    vq.codeword;
                total += ws.contribution(m, vq.codeword);
            }
            res.gamma = ctx.gamma;
            res.objective = ws.objective_value(total);
            return res;
        }
        case TrainedKind::lookup:
        default:
            switch (scheme.lookup_kind) {
                case LookupKind::vq:
                    return vq_quantize_all(ctx, scheme.books);
                case LookupKind::mq:
                    return mq_quantize(ctx, scheme.books, scheme.spec.cap);
                case LookupKind::smq:
                    return smq_quantize(ctx, scheme.books);
                case LookupKind::alpha_pmq:
                default: {
                    AlphaPmqOptions opts;
                    opts.alpha = scheme.spec.alpha;
                    opts.iterations = scheme.spec.iterations;
                    return alpha_pmq_quantize(ctx, scheme.books, opts);
                }
            }
    }
}

struct ChannelEval {
    arma::vec se;           // per UE
    arma::vec ei;           // per UE, mean over symbols
    arma::vec signal_power; // per UE: ||H_n W_n||_F^2, or ||G_hat_n||_F^2 with pilots
    double objective = 0.0; // mean over symbols
    long long ei_evaluations = 0;
    arma::uword qam_errors = 0;
    arma::uword qam_symbols = 0;
    double est_error_power = 0.0; // mean ||E_n||^2 when pilots simulated
};

ChannelEval evaluate_channel(const SystemConfig& cfg, const Scenario& scenario,
                             const TrainedScheme& scheme, int channel_index) {
    const EiKind kind = cfg.is_scalar() ? EiKind::single_antenna : EiKind::multi_antenna;
    Rng ch_rng = Rng::stream(scenario.seed, {kStreamEvalChannel, std::uint64_t(channel_index)});
    const ChannelState channel = generate_channel(cfg, scenario.channel, ch_rng);
    const PrecodingMatrix prec = scenario.precoder == PrecoderKind::mmse
                                     ? mmse_precoder(channel, cfg)
                                     : zero_forcing_precoder(channel, cfg);
    const std::vector<arma::cx_mat> beamformers =
        mmse_receivers(cfg, channel, prec, cfg.noise_var, true);

    auto make_ctx = [&](const arma::cx_vec& s) {
        QuantContext ctx;
        ctx.cfg = &cfg;
        ctx.channel = &channel;
        ctx.prec = &prec;
        ctx.s = s;
        ctx.beamformers = &beamformers;
        ctx.gamma = scheme.gamma;
        ctx.kind = kind;
        return ctx;
    };

    ChannelEval eval;
    eval.ei.zeros(arma::uword(cfg.num_ues));
    eval.signal_power.set_size(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        const arma::cx_mat eff = channel.ue_rows(cfg, n) * prec.ue_cols(cfg, n);
        eval.signal_power(arma::uword(n)) = std::real(arma::accu(eff % arma::conj(eff)));
    }

    Rng sym_rng = Rng::stream(scenario.seed, {kStreamEvalGaussian, std::uint64_t(channel_index)});
    Rng noise_rng = Rng::stream(scenario.seed, {kStreamEvalNoise, std::uint64_t(channel_index)});
    const SymbolBatch gaussian =
        gaussian_symbols(cfg, arma::uword(scenario.eval_gaussian_symbols), sym_rng);

    std::vector<arma::cx_mat> error_cov(std::size_t(cfg.num_ues));
    std::vector<arma::cx_mat> signal_cov(std::size_t(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n) {
        error_cov[std::size_t(n)] =
            arma::cx_mat(arma::uword(cfg.streams[n]), arma::uword(cfg.streams[n]),
                         arma::fill::zeros);
        signal_cov[std::size_t(n)] =
            arma::cx_mat(arma::eye<arma::cx_mat>(arma::uword(cfg.streams[n]),
                                                 arma::uword(cfg.streams[n])));
    }

    for (arma::uword k = 0; k < gaussian.count(); ++k) {
        const arma::cx_vec s = gaussian.use(k);
        const QuantizationResult res = quantize_one(make_ctx(s), scheme);
        eval.objective += res.objective;
        eval.ei_evaluations += res.ei_evaluations;
        const arma::cx_vec xt = apply_power_scaling(cfg, res.xhat, scheme.gamma);
        // Reported EI is the disturbance power (the SINR-denominator form),
        // which stays non-negative for every scheme and antenna count.
        eval.ei += ei_power(cfg, channel, prec, s, xt);
        arma::cx_vec noise(arma::uword(cfg.total_rx()));
        for (auto& v : noise)
            v = std::sqrt(cfg.noise_var) * noise_rng.cnormal();
        for (int n = 0; n < cfg.num_ues; ++n) {
            const int r0 = cfg.ue_row_offset(n);
            const arma::cx_vec y = channel.ue_rows(cfg, n) * xt +
                                   noise.subvec(arma::uword(r0),
                                                arma::uword(r0 + cfg.rx_antennas[n] - 1));
            const arma::cx_vec shat = beamformers[std::size_t(n)].t() * y;
            const arma::cx_vec err =
                shat - s.subvec(arma::uword(cfg.ue_stream_offset(n)),
                                arma::uword(cfg.ue_stream_offset(n) + cfg.streams[n] - 1));
            error_cov[std::size_t(n)] += err * err.t();
        }
    }
    const double count = double(gaussian.count());
    eval.objective /= count;
    eval.ei_evaluations = (long long)(double(eval.ei_evaluations) / count);
    eval.ei /= count;
    for (auto& cov : error_cov) {
        cov /= count;
        cov = 0.5 * (cov + cov.t());
    }
    eval.se = per_ue_spectral_efficiency(signal_cov, error_cov);

    if (scenario.eval_qam_symbols > 0) {
        Rng qam_rng = Rng::stream(scenario.seed, {kStreamEvalQam, std::uint64_t(channel_index)});
        const SymbolBatch qam =
            qam16_symbols(cfg, arma::uword(scenario.eval_qam_symbols), qam_rng);
        for (arma::uword k = 0; k < qam.count(); ++k) {
            const arma::cx_vec s = qam.use(k);
            const QuantizationResult res = quantize_one(make_ctx(s), scheme);
            const arma::cx_vec xt = apply_power_scaling(cfg, res.xhat, scheme.gamma);
            arma::cx_vec noise(arma::uword(cfg.total_rx()));
            for (auto& v : noise)
                v = std::sqrt(cfg.noise_var) * noise_rng.cnormal();
            for (int n = 0; n < cfg.num_ues; ++n) {
                const int r0 = cfg.ue_row_offset(n);
                const arma::cx_vec y = channel.ue_rows(cfg, n) * xt +
                                       noise.subvec(arma::uword(r0),
                                                    arma::uword(r0 + cfg.rx_antennas[n] - 1));
                const arma::cx_vec shat = beamformers[std::size_t(n)].t() * y;
                for (int l = 0; l < cfg.streams[n]; ++l) {
                    const arma::uword idx = arma::uword(cfg.ue_stream_offset(n) + l);
                    if (qam16_detect(shat(arma::uword(l))) != qam16_detect(s(idx)))
                        ++eval.qam_errors;
                    ++eval.qam_symbols;
                }
            }
        }
    }

    if (scenario.pilot_count > 0) {
        Rng pilot_rng =
            Rng::stream(scenario.seed, {kStreamPilotNoise, std::uint64_t(channel_index)});
        const PilotBlock pilots =
            generate_pilots(cfg, scenario.pilot_count, pilot_rng, scenario.pilot_design);
        arma::cx_mat x_pilot(arma::uword(cfg.total_tx()), arma::uword(pilots.pilot_count));
        for (int i = 0; i < pilots.pilot_count; ++i) {
            const arma::cx_vec s_p = pilots.pilots.col(arma::uword(i));
            const QuantizationResult res = quantize_one(make_ctx(s_p), scheme);
            x_pilot.col(arma::uword(i)) = apply_power_scaling(cfg, res.xhat, scheme.gamma);
        }
        double acc = 0.0;
        for (int n = 0; n < cfg.num_ues; ++n) {
            arma::cx_mat noise(arma::uword(cfg.rx_antennas[n]), arma::uword(pilots.pilot_count));
            for (auto& v : noise)
                v = std::sqrt(cfg.noise_var) * pilot_rng.cnormal();
            const arma::cx_mat y_p = channel.ue_rows(cfg, n) * x_pilot + noise;
            const arma::cx_mat truth = channel.ue_rows(cfg, n) * prec.ue_cols(cfg, n);
            const ChannelEstimate est =
                ml_pilot_estimate(y_p, pilots.ue_rows(cfg, n), &truth);
            acc += std::real(arma::accu(est.error % arma::conj(est.error)));
            // The SINR numerator becomes the estimated effective channel.
            eval.signal_power(arma::uword(n)) =
                std::real(arma::accu(est.g_hat % arma::conj(est.g_hat)));
        }
        eval.est_error_power = acc / double(cfg.num_ues);
    }
    return eval;
}

// The CP baseline precodes with the average channel of the evaluation
// block, quantizes that precoder entry-wise, and scales to the power budget
// with the expectation estimated on a seeded symbol batch.
TrainedScheme prepare_cp(const SystemConfig& cfg, const Scenario& scenario,
                         const TrainedScheme& scheme) {
    TrainedScheme out = scheme;
    std::vector<ChannelState> block;
    for (int c = 0; c < scenario.eval_channels; ++c) {
        Rng ch_rng = Rng::stream(scenario.seed, {kStreamEvalChannel, std::uint64_t(c)});
        block.push_back(generate_channel(cfg, scenario.channel, ch_rng));
    }
    const ChannelState averaged = cp_average_channel(block);
    const PrecodingMatrix shared = scenario.precoder == PrecoderKind::mmse
                                       ? mmse_precoder(averaged, cfg)
                                       : zero_forcing_precoder(averaged, cfg);
    out.cp_precoder = cp_quantize_precoder(shared.w, scheme.spec.b_cp, cfg).w_hat;

    Rng sym_rng = Rng::stream(scenario.seed, {kStreamCpGamma});
    const SymbolBatch batch = gaussian_symbols(cfg, 512, sym_rng);
    out.gamma.set_size(arma::uword(cfg.num_rus));
    for (int m = 0; m < cfg.num_rus; ++m) {
        const int c0 = cfg.ru_col_offset(m);
        const arma::cx_mat rows = out.cp_precoder.rows(
            arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1));
        const arma::cx_mat tx = rows * batch.symbols;
        const double mean_power =
            std::real(arma::accu(tx % arma::conj(tx))) / double(batch.count());
        out.gamma(arma::uword(m)) =
            mean_power > 1e-300 ? std::sqrt(cfg.power[std::size_t(m)] / mean_power) : 1.0;
    }
    return out;
}

ResultRow evaluate_scheme(const SystemConfig& cfg, const Scenario& scenario,
                          const TrainedScheme& trained, int bits, int threads) {
    const auto start = std::chrono::steady_clock::now();
    const TrainedScheme scheme = trained.kind == TrainedKind::cp
                                     ? prepare_cp(cfg, scenario, trained)
                                     : trained;
    std::vector<ChannelEval> evals(std::size_t(scenario.eval_channels));
    parallel_for(std::size_t(scenario.eval_channels), threads, [&](std::size_t c) {
        evals[c] = evaluate_channel(cfg, scenario, scheme, int(c));
    });

    ResultRow row;
    row.scheme = scheme.spec.name;
    row.bits = bits;
    row.seed = scenario.seed;

    arma::vec mean_se(arma::uword(cfg.num_ues), arma::fill::zeros);
    arma::vec mean_ei(arma::uword(cfg.num_ues), arma::fill::zeros);
    arma::vec mean_signal(arma::uword(cfg.num_ues), arma::fill::zeros);
    arma::uword qam_errors = 0, qam_total = 0;
    long long op_acc = 0;
    double est_error = 0.0;
    for (const auto& ev : evals) {
        mean_se += ev.se;
        row.objective += ev.objective;
        mean_ei += ev.ei;
        mean_signal += ev.signal_power;
        qam_errors += ev.qam_errors;
        qam_total += ev.qam_symbols;
        op_acc += ev.ei_evaluations;
        est_error += ev.est_error_power;
    }
    const double chans = double(evals.size());
    mean_se /= chans;
    row.objective /= chans;
    mean_ei /= chans;
    mean_signal /= chans;
    est_error /= chans;

    MetricsReport report;
    report.se = mean_se;
    report.sum_se = arma::accu(mean_se);
    report.ei = mean_ei;
    report.ser = qam_total > 0 ? double(qam_errors) / double(qam_total) : 0.0;
    report.est_error_power = est_error;
    report.sinr.set_size(arma::uword(cfg.num_ues));
    for (int n = 0; n < cfg.num_ues; ++n)
        report.sinr(arma::uword(n)) = sinr_with_estimation(
            mean_signal(arma::uword(n)), mean_ei(arma::uword(n)),
            scenario.pilot_count > 0 ? est_error : 0.0, cfg.rx_antennas[n], cfg.noise_var);

    row.sum_se = report.sum_se;
    row.ser = report.ser;
    row.sinr = report.sinr;
    row.est_error_power = report.est_error_power;
    row.metrics = report;

    // Operation count: measured EI evaluations per channel use for the
    // search-based schemes, closed-form MAC units for the neural ones,
    // nothing for the search-free CP baseline.
    if (scheme.kind == TrainedKind::cp) {
        row.op_count = 0;
    } else if (scheme.kind == TrainedKind::neural_mq || scheme.kind == TrainedKind::neural_vq) {
        NeuralDims dims;
        dims.bits = bits;
        dims.hidden_neurons =
            scheme.spec.hidden_neurons > 0 ? scheme.spec.hidden_neurons : bits;
        dims.hidden_layers = scheme.spec.hidden_layers;
        row.op_count = op_count_neural_mq(cfg, dims, scheme.spec.gd_steps).total;
    } else {
        row.op_count = (long long)(double(op_acc) / chans);
    }

    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

void save_trained(const TrainedScheme& scheme, int bits, const std::string& out_dir) {
    if (scheme.kind == TrainedKind::cp)
        return; // nothing trained: the shared precoder is evaluation-block state
    const std::string stem =
        out_dir + "/codebook_" + scheme.spec.name + "_b" + std::to_string(bits);
    if (scheme.kind == TrainedKind::lookup) {
        std::ofstream out(stem + ".json");
        out << codebooks_to_json(scheme.books, scheme.gamma);
    } else if (scheme.kind == TrainedKind::tree) {
        std::ofstream out(stem + ".json");
        out << trees_to_json(scheme.trees, scheme.gamma);
    } else {
        save_neural_codebooks(stem + ".bin", scheme.nets, scheme.gamma);
    }
}

} // namespace

std::string results_to_csv(const std::vector<ResultRow>& rows, int num_ues) {
    // Wall time lives in summary.json: the CSV is byte-identical across
    // reruns of the same scenario and timing is not.
    std::ostringstream out;
    out << "scheme,bits,sum_se,ser,objective,est_error_power,op_count,seed";
    for (int n = 0; n < num_ues; ++n)
        out << ",sinr_ue" << n;
    out << "\n";
    for (const auto& row : rows) {
        out << row.scheme << "," << row.bits << "," << fmt(row.sum_se) << "," << fmt(row.ser)
            << "," << fmt(row.objective) << "," << fmt(row.est_error_power) << ","
            << row.op_count << "," << row.seed;
        for (arma::uword n = 0; n < row.sinr.n_elem; ++n)
            out << "," << fmt(row.sinr(n));
        out << "\n";
    }
    return out.str();
}

std::string compare_schemes(const std::vector<ResultRow>& rows, const std::string& baseline) {
    bool found = false;
    for (const auto& row : rows)
        found = found || row.scheme == baseline;
    if (!found)
        throw ConfigError("compare_schemes: baseline scheme \"" + baseline +
                          "\" has no result rows");

    auto base_row = [&](int bits) -> const ResultRow* {
        for (const auto& row : rows)
            if (row.scheme == baseline && row.bits == bits)
                return &row;
        return nullptr;
    };

    std::ostringstream out;
    out << "scheme,bits,sum_se,se_ratio,objective,objective_ratio,ser\n";
    for (const auto& row : rows) {
        const ResultRow* base = base_row(row.bits);
        if (base == nullptr)
            throw ConfigError("compare_schemes: baseline has no row at bits = " +
                              std::to_string(row.bits));
        const double se_ratio = base->sum_se != 0.0 ? row.sum_se / base->sum_se : 0.0;
        const double obj_ratio =
            base->objective != 0.0 ? row.objective / base->objective : 0.0;
        out << row.scheme << "," << row.bits << "," << fmt(row.sum_se) << "," << fmt(se_ratio)
            << "," << fmt(row.objective) << "," << fmt(obj_ratio) << "," << fmt(row.ser)
            << "\n";
    }
    return out.str();
}

RunOutput run_scenario(const Scenario& scenario, const std::string& out_dir, int threads) {
    scenario.validate();
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream resolved(out_dir + "/scenario_resolved.json");
        resolved << scenario.resolved_json() << "\n";
    }
    if (scenario.pilot_count > 0 && scenario.pilot_design == PilotDesign::orthogonal &&
        scenario.pilot_count < scenario.system.total_streams())
        std::fprintf(stderr,
                     "warning: %d pilots cover fewer than %d total streams; pilot rows are "
                     "orthogonal within each UE only\n",
                     scenario.pilot_count, scenario.system.total_streams());

    const EiKind kind =
        scenario.system.is_scalar() ? EiKind::single_antenna : EiKind::multi_antenna;
    std::vector<int> sweep = scenario.sweep_bits;
    if (sweep.empty())
        sweep.push_back(scenario.system.fronthaul_bits.front());

    RunOutput output;
    std::vector<TrainedScheme> previous(scenario.schemes.size());
    for (std::size_t sweep_idx = 0; sweep_idx < sweep.size(); ++sweep_idx) {
        SystemConfig cfg = scenario.system;
        if (!scenario.sweep_bits.empty())
            cfg.fronthaul_bits.assign(std::size_t(cfg.num_rus), sweep[sweep_idx]);
        cfg.validate();

        const TrainingSet ts =
            make_training_set(cfg, scenario.channel, scenario.precoder, kind,
                              scenario.train_channels, scenario.train_symbols, scenario.seed);

        for (std::size_t si = 0; si < scenario.schemes.size(); ++si) {
            const SchemeSpec& spec = scenario.schemes[si];
            // Nested sweeps seed each lookup codebook from the previous
            // fronthaul point so richer books refine trained ones.
            const TrainedScheme* nested =
                sweep_idx > 0 && !previous[si].books.empty() ? &previous[si] : nullptr;
            TrainedScheme trained = train_scheme(cfg, scenario, spec, ts, threads, nested);
            save_trained(trained, sweep[sweep_idx], out_dir);
            output.rows.push_back(
                evaluate_scheme(cfg, scenario, trained, sweep[sweep_idx], threads));
            previous[si] = std::move(trained);
        }
    }

    const std::string csv = results_to_csv(output.rows, scenario.system.num_ues);
    output.results_csv_path = out_dir + "/results.csv";
    {
        std::ofstream out(output.results_csv_path);
        out << csv;
    }

    const std::string baseline =
        scenario.baseline.empty() ? scenario.schemes.front().name : scenario.baseline;
    nlohmann::json summary;
    summary["seed"] = scenario.seed;
    summary["baseline"] = baseline;
    summary["error_cov_eigen_floor"] = kErrorCovEigenFloor;
    summary["comparison_csv"] = compare_schemes(output.rows, baseline);
    summary["rows"] = nlohmann::json::array();
    for (const auto& row : output.rows) {
        nlohmann::json j;
        j["scheme"] = row.scheme;
        j["bits"] = row.bits;
        j["sum_se"] = row.sum_se;
        j["ser"] = row.ser;
        j["objective"] = row.objective;
        j["est_error_power"] = row.est_error_power;
        j["op_count"] = row.op_count;
        j["wall_seconds"] = row.wall_seconds;
        j["sinr"] = std::vector<double>(row.sinr.begin(), row.sinr.end());
        j["per_ue_se"] = std::vector<double>(row.metrics.se.begin(), row.metrics.se.end());
        j["per_ue_ei"] = std::vector<double>(row.metrics.ei.begin(), row.metrics.ei.end());
        summary["rows"].push_back(std::move(j));
    }
    output.summary_json_path = out_dir + "/summary.json";
    {
        std::ofstream out(output.summary_json_path);
        out << summary.dump(2) << "\n";
    }
    return output;
}

void train_scenario(const Scenario& scenario, const std::string& out_dir, int threads) {
    scenario.validate();
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream resolved(out_dir + "/scenario_resolved.json");
        resolved << scenario.resolved_json() << "\n";
    }
    const EiKind kind =
        scenario.system.is_scalar() ? EiKind::single_antenna : EiKind::multi_antenna;
    std::vector<int> sweep = scenario.sweep_bits;
    if (sweep.empty())
        sweep.push_back(scenario.system.fronthaul_bits.front());

    std::vector<TrainedScheme> previous(scenario.schemes.size());
    for (std::size_t sweep_idx = 0; sweep_idx < sweep.size(); ++sweep_idx) {
        SystemConfig cfg = scenario.system;
        if (!scenario.sweep_bits.empty())
            cfg.fronthaul_bits.assign(std::size_t(cfg.num_rus), sweep[sweep_idx]);
        cfg.validate();
        const TrainingSet ts =
            make_training_set(cfg, scenario.channel, scenario.precoder, kind,
                              scenario.train_channels, scenario.train_symbols, scenario.seed);
        for (std::size_t si = 0; si < scenario.schemes.size(); ++si) {
            const TrainedScheme* nested =
                sweep_idx > 0 && !previous[si].books.empty() ? &previous[si] : nullptr;
            TrainedScheme trained =
                train_scheme(cfg, scenario, scenario.schemes[si], ts, threads, nested);
            save_trained(trained, sweep[sweep_idx], out_dir);
            previous[si] = std::move(trained);
        }
    }
}

std::string channel_to_csv(const ChannelState& channel) {
    std::ostringstream out;
    out << "row,col,re,im\n";
    for (arma::uword i = 0; i < channel.h.n_rows; ++i)
        for (arma::uword j = 0; j < channel.h.n_cols; ++j)
            out << i << "," << j << "," << fmt(channel.h(i, j).real()) << ","
                << fmt(channel.h(i, j).imag()) << "\n";
    return out.str();
}

void channel_write_binary(const ChannelState& channel, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("channel_write_binary: cannot open " + path);
    for (arma::uword i = 0; i < channel.h.n_rows; ++i)
        for (arma::uword j = 0; j < channel.h.n_cols; ++j) {
            const double re = channel.h(i, j).real();
            const double im = channel.h(i, j).imag();
            out.write(reinterpret_cast<const char*>(&re), sizeof re);
            out.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
}

} // namespace cfmq
