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

#include "cfmq/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cfmq {

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

NeuralCodebook NeuralCodebook::make(int input_bits, int tx_antennas, int hidden_neurons,
                                    int hidden_layers) {
    if (input_bits < 1 || tx_antennas < 1 || hidden_layers < 0)
        throw ConfigError("neural codebook: bad dimensions");
    if (hidden_layers > 0 && hidden_neurons < 1)
        throw ConfigError("neural codebook: hidden layers need hidden neurons");

    NeuralCodebook net;
    net.input_bits = input_bits;
    net.hidden_neurons = hidden_layers > 0 ? hidden_neurons : 0;
    net.hidden_layers = hidden_layers;
    net.out_dim = 2 * tx_antennas;

    int in = input_bits;
    for (int k = 0; k < hidden_layers; ++k) {
        net.weights.emplace_back(arma::uword(hidden_neurons), arma::uword(in), arma::fill::zeros);
        net.biases.emplace_back(arma::uword(hidden_neurons), arma::fill::zeros);
        in = hidden_neurons;
    }
    net.weights.emplace_back(arma::uword(net.out_dim), arma::uword(in), arma::fill::zeros);
    net.biases.emplace_back(arma::uword(net.out_dim), arma::fill::zeros);
    return net;
}

void NeuralCodebook::randomize(Rng& rng, double scale) {
    for (auto& w : weights) {
        const double std_dev = scale / std::sqrt(double(w.n_cols));
        for (auto& v : w)
            v = std_dev * rng.normal();
    }
    for (auto& b : biases)
        for (auto& v : b)
            v = 0.1 * scale * rng.normal();
}

arma::uword NeuralCodebook::param_count() const {
    arma::uword n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
        n += weights[k].n_elem + biases[k].n_elem;
    return n;
}

arma::vec NeuralCodebook::flatten() const {
    arma::vec out(param_count());
    arma::uword at = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        out.subvec(at, at + weights[k].n_elem - 1) = arma::vectorise(weights[k]);
        at += weights[k].n_elem;
        out.subvec(at, at + biases[k].n_elem - 1) = biases[k];
        at += biases[k].n_elem;
    }
    return out;
}

void NeuralCodebook::unflatten(const arma::vec& params) {
    if (params.n_elem != param_count())
        throw ConfigError("neural codebook: parameter vector size mismatch");
    arma::uword at = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] = arma::reshape(params.subvec(at, at + weights[k].n_elem - 1),
                                   weights[k].n_rows, weights[k].n_cols);
        at += weights[k].n_elem;
        biases[k] = params.subvec(at, at + biases[k].n_elem - 1);
        at += biases[k].n_elem;
    }
}

void NeuralCodebook::validate() const {
    if (weights.size() != biases.size() || weights.empty())
        throw ConfigError("neural codebook: layer lists inconsistent");
    for (const auto& w : weights)
        if (!w.is_finite())
            throw ConfigError("neural codebook: non-finite weight");
    for (const auto& b : biases)
        if (!b.is_finite())
            throw ConfigError("neural codebook: non-finite bias");
}

arma::cx_vec neural_forward(const NeuralCodebook& net, const arma::vec& u, NeuralTrace* trace,
                            MacCounter* macs) {
    if (int(u.n_elem) != net.input_bits)
        throw ConfigError("neural_forward: input length must equal the RU's bit width");
    if (trace != nullptr) {
        trace->inputs.clear();
        trace->inputs.reserve(net.weights.size());
    }
    arma::vec h = u;
    for (std::size_t k = 0; k < net.weights.size(); ++k) {
        if (trace != nullptr)
            trace->inputs.push_back(h);
        if (macs != nullptr)
            macs->macs += (long long)(net.weights[k].n_rows) * (long long)(net.weights[k].n_cols);
        h = net.weights[k] * h + net.biases[k];
        const bool hidden = k + 1 < net.weights.size();
        if (hidden)
            h = arma::tanh(h);
    }
    if (trace != nullptr)
        trace->output = h;

    const int n_tx = net.out_dim / 2;
    arma::cx_vec codeword(static_cast<arma::uword>(n_tx));
    for (int i = 0; i < n_tx; ++i)
        codeword(arma::uword(i)) = {h(arma::uword(i)), h(arma::uword(i + n_tx))};
    return codeword;
}

NeuralParamGrad::NeuralParamGrad(const NeuralCodebook& net) {
    for (std::size_t k = 0; k < net.weights.size(); ++k) {
        d_weights.emplace_back(net.weights[k].n_rows, net.weights[k].n_cols, arma::fill::zeros);
        d_biases.emplace_back(net.biases[k].n_elem, arma::fill::zeros);
    }
}

void NeuralParamGrad::accumulate_flat(arma::vec& grad, arma::uword offset) const {
    arma::uword at = offset;
    for (std::size_t k = 0; k < d_weights.size(); ++k) {
        grad.subvec(at, at + d_weights[k].n_elem - 1) += arma::vectorise(d_weights[k]);
        at += d_weights[k].n_elem;
        grad.subvec(at, at + d_biases[k].n_elem - 1) += d_biases[k];
        at += d_biases[k].n_elem;
    }
}

arma::vec neural_backprop(const NeuralCodebook& net, const NeuralTrace& trace,
                          const arma::vec& grad_output, NeuralParamGrad* param_grad,
                          MacCounter* macs) {
    arma::vec delta = grad_output; // d loss / d pre-activation of the top layer
    for (int k = int(net.weights.size()) - 1; k >= 0; --k) {
        const arma::vec& in = trace.inputs[std::size_t(k)];
        if (param_grad != nullptr) {
            param_grad->d_weights[std::size_t(k)] += delta * in.t();
            param_grad->d_biases[std::size_t(k)] += delta;
        }
        if (macs != nullptr)
            macs->macs += 2LL * (long long)(net.weights[std::size_t(k)].n_rows) *
                          (long long)(net.weights[std::size_t(k)].n_cols);
        arma::vec grad_in = net.weights[std::size_t(k)].t() * delta;
        if (k > 0) {
            // tanh'(a) = 1 - tanh(a)^2, and inputs[k] already holds tanh(a).
            const arma::vec& act = trace.inputs[std::size_t(k)];
            delta = grad_in % (1.0 - act % act);
        } else {
            delta = grad_in;
        }
    }
    return delta;
}

double sigmoid_tau(double x, double tau) {
    if (!(tau > 0.0))
        throw ConfigError("sigmoid_tau: temperature must be positive");
    return 1.0 / (1.0 + std::exp(-x / tau));
}

arma::vec sigmoid_tau(const arma::vec& x, double tau) {
    if (!(tau > 0.0))
        throw ConfigError("sigmoid_tau: temperature must be positive");
    arma::vec out(x.n_elem);
    for (arma::uword i = 0; i < x.n_elem; ++i)
        out(i) = 1.0 / (1.0 + std::exp(-x(i) / tau));
    return out;
}

double AnnealSchedule::temperature(int step) const {
    if (gd_steps < 1)
        throw ConfigError("anneal schedule: need at least one GD step");
    return std::exp(-5.0 * double(step) / double(gd_steps));
}

// ---------------------------------------------------------------------------
// Relaxed objective and gradient
// ---------------------------------------------------------------------------

static void check_nets(const EiWorkspace& ws, const std::vector<NeuralCodebook>& nets) {
    if (int(nets.size()) != ws.num_rus())
        throw ConfigError("neural quantizer: need one codebook per RU");
}

static arma::uword total_bits(const std::vector<NeuralCodebook>& nets) {
    arma::uword n = 0;
    for (const auto& net : nets)
        n += arma::uword(net.input_bits);
    return n;
}

double neural_mq_relaxed_objective(const EiWorkspace& ws,
                                   const std::vector<NeuralCodebook>& nets, const arma::vec& r,
                                   double tau, MacCounter* macs) {
    check_nets(ws, nets);
    if (r.n_elem != total_bits(nets))
        throw ConfigError("neural quantizer: relaxed vector length mismatch");
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    arma::uword at = 0;
    for (int m = 0; m < ws.num_rus(); ++m) {
        const auto& net = nets[std::size_t(m)];
        const arma::vec u = sigmoid_tau(r.subvec(at, at + arma::uword(net.input_bits) - 1), tau);
        total += ws.contribution(m, neural_forward(net, u, nullptr, macs));
        at += arma::uword(net.input_bits);
    }
    return ws.objective_value(total);
}

arma::vec neural_mq_relaxed_gradient(const EiWorkspace& ws,
                                     const std::vector<NeuralCodebook>& nets, const arma::vec& r,
                                     double tau, MacCounter* macs) {
    check_nets(ws, nets);
    if (r.n_elem != total_bits(nets))
        throw ConfigError("neural quantizer: relaxed vector length mismatch");

    const int num_rus = ws.num_rus();
    std::vector<NeuralTrace> traces(static_cast<std::size_t>(num_rus));
    std::vector<arma::vec> relaxed(static_cast<std::size_t>(num_rus));
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    arma::uword at = 0;
    for (int m = 0; m < num_rus; ++m) {
        const auto& net = nets[std::size_t(m)];
        relaxed[std::size_t(m)] =
            sigmoid_tau(r.subvec(at, at + arma::uword(net.input_bits) - 1), tau);
        total += ws.contribution(
            m, neural_forward(net, relaxed[std::size_t(m)], &traces[std::size_t(m)], macs));
        at += arma::uword(net.input_bits);
    }

    // d obj / d conj(v) = v - b; pulling through P_m and splitting into the
    // real output layout gives the 2 n_tx-dimensional layer gradient.
    arma::cx_vec residual = total;
    if (ws.has_linear_term())
        residual -= ws.linear_term();

    arma::vec grad(r.n_elem);
    at = 0;
    for (int m = 0; m < num_rus; ++m) {
        const auto& net = nets[std::size_t(m)];
        const arma::cx_vec g_cx = ws.map(m).t() * residual;
        arma::vec grad_out(arma::uword(net.out_dim));
        const int n_tx = net.out_dim / 2;
        for (int i = 0; i < n_tx; ++i) {
            grad_out(arma::uword(i)) = 2.0 * g_cx(arma::uword(i)).real();
            grad_out(arma::uword(i + n_tx)) = 2.0 * g_cx(arma::uword(i)).imag();
        }
        const arma::vec grad_u =
            neural_backprop(net, traces[std::size_t(m)], grad_out, nullptr, macs);
        const arma::vec& u = relaxed[std::size_t(m)];
        for (int i = 0; i < net.input_bits; ++i)
            grad(at + arma::uword(i)) =
                grad_u(arma::uword(i)) * u(arma::uword(i)) * (1.0 - u(arma::uword(i))) / tau;
        at += arma::uword(net.input_bits);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Quantizers
// ---------------------------------------------------------------------------

QuantizationResult neural_mq_quantize(const QuantContext& ctx,
                                      const std::vector<NeuralCodebook>& nets,
                                      const AnnealSchedule& schedule, MacCounter* macs) {
    const SystemConfig& cfg = *ctx.cfg;
    if (int(nets.size()) != cfg.num_rus)
        throw ConfigError("neural_mq_quantize: need one codebook per RU");
    for (const auto& net : nets)
        net.validate();

    EiWorkspace ws(ctx);
    arma::vec r(total_bits(nets), arma::fill::zeros);
    for (int i = 1; i <= schedule.gd_steps; ++i) {
        const double tau = schedule.temperature(i);
        const arma::vec grad = neural_mq_relaxed_gradient(ws, nets, r, tau, macs);
        if (!grad.is_finite())
            throw NumericError("neural_mq_quantize: non-finite gradient at GD step " +
                               std::to_string(i) + " (tau = " + std::to_string(tau) + ")");
        r -= schedule.step_size * grad;
    }

    QuantizationResult res;
    res.bits.resize(std::size_t(cfg.num_rus));
    res.xhat.set_size(arma::uword(cfg.total_tx()));
    arma::cx_vec total(ws.dim(), arma::fill::zeros);
    arma::uword at = 0;
    for (int m = 0; m < cfg.num_rus; ++m) {
        const auto& net = nets[std::size_t(m)];
        arma::vec hard(arma::uword(net.input_bits));
        res.bits[std::size_t(m)].resize(std::size_t(net.input_bits));
        for (int i = 0; i < net.input_bits; ++i) {
            const bool one = r(at + arma::uword(i)) > 0.0;
            res.bits[std::size_t(m)][std::size_t(i)] = one ? 1 : 0;
            hard(arma::uword(i)) = one ? 1.0 : 0.0;
        }
        const arma::cx_vec codeword = neural_forward(net, hard, nullptr, macs);
        const int c0 = cfg.ru_col_offset(m);
        res.xhat.subvec(arma::uword(c0), arma::uword(c0 + cfg.tx_antennas[m] - 1)) = codeword;
        total += ws.contribution(m, codeword);
        at += arma::uword(net.input_bits);
    }
    res.gamma = ctx.gamma;
    res.objective = ws.objective_value(total);
    res.ei_evaluations = ws.ei_evaluations;
    return res;
}

NeuralVqResult neural_vq_quantize(const arma::cx_vec& x_m, const NeuralCodebook& net,
                                  const AnnealSchedule& schedule, MacCounter* macs) {
    net.validate();
    if (int(x_m.n_elem) * 2 != net.out_dim)
        throw ConfigError("neural_vq_quantize: target dimension mismatch");

    arma::vec target(arma::uword(net.out_dim));
    for (arma::uword i = 0; i < x_m.n_elem; ++i) {
        target(i) = x_m(i).real();
        target(i + x_m.n_elem) = x_m(i).imag();
    }

    arma::vec r(arma::uword(net.input_bits), arma::fill::zeros);
    for (int i = 1; i <= schedule.gd_steps; ++i) {
        const double tau = schedule.temperature(i);
        const arma::vec u = sigmoid_tau(r, tau);
        NeuralTrace trace;
        (void)neural_forward(net, u, &trace, macs);
        const arma::vec grad_out = 2.0 * (trace.output - target);
        const arma::vec grad_u = neural_backprop(net, trace, grad_out, nullptr, macs);
        arma::vec grad(r.n_elem);
        for (arma::uword j = 0; j < r.n_elem; ++j)
            grad(j) = grad_u(j) * u(j) * (1.0 - u(j)) / tau;
        if (!grad.is_finite())
            throw NumericError("neural_vq_quantize: non-finite gradient at GD step " +
                               std::to_string(i));
        r -= schedule.step_size * grad;
    }

    NeuralVqResult res;
    res.bits.resize(std::size_t(net.input_bits));
    arma::vec hard(arma::uword(net.input_bits));
    for (int i = 0; i < net.input_bits; ++i) {
        const bool one = r(arma::uword(i)) > 0.0;
        res.bits[std::size_t(i)] = one ? 1 : 0;
        hard(arma::uword(i)) = one ? 1.0 : 0.0;
    }
    res.codeword = neural_forward(net, hard, nullptr, macs);
    return res;
}

long long neural_forward_mac_count(const NeuralCodebook& net) {
    long long total = 0;
    for (const auto& w : net.weights)
        total += (long long)(w.n_rows) * (long long)(w.n_cols);
    return total;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

void save_neural_codebooks(const std::string& path, const std::vector<NeuralCodebook>& nets,
                           const arma::vec& gamma) {
    nlohmann::json header;
    header["format"] = "cfmq-neural-codebooks-v1";
    header["activation"] = "tanh";
    header["byte_order"] = "little-endian float64";
    header["rus"] = nlohmann::json::array();
    for (std::size_t m = 0; m < nets.size(); ++m) {
        nlohmann::json ru;
        ru["input_bits"] = nets[m].input_bits;
        ru["hidden_neurons"] = nets[m].hidden_neurons;
        ru["hidden_layers"] = nets[m].hidden_layers;
        ru["out_dim"] = nets[m].out_dim;
        ru["gamma"] = gamma.n_elem > m ? gamma(arma::uword(m)) : 1.0;
        header["rus"].push_back(std::move(ru));
    }
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("save_neural_codebooks: cannot open " + path);
    const std::uint64_t header_len = header_text.size();
    std::uint8_t len_bytes[8];
    for (int i = 0; i < 8; ++i)
        len_bytes[i] = std::uint8_t((header_len >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(len_bytes), 8);
    out.write(header_text.data(), std::streamsize(header_text.size()));
    for (const auto& net : nets) {
        const arma::vec params = net.flatten();
        out.write(reinterpret_cast<const char*>(params.memptr()),
                  std::streamsize(params.n_elem * sizeof(double)));
    }
    if (!out)
        throw ConfigError("save_neural_codebooks: write failed for " + path);
}

std::pair<std::vector<NeuralCodebook>, arma::vec> load_neural_codebooks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("load_neural_codebooks: cannot open " + path);
    std::uint8_t len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    std::uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i)
        header_len |= std::uint64_t(len_bytes[i]) << (8 * i);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), std::streamsize(header_len));
    if (!in)
        throw ConfigError("load_neural_codebooks: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("load_neural_codebooks: ") + e.what());
    }
    if (header.value("format", "") != "cfmq-neural-codebooks-v1")
        throw ConfigError("load_neural_codebooks: unknown format");

    std::vector<NeuralCodebook> nets;
    arma::vec gamma(arma::uword(header.at("rus").size()));
    for (std::size_t m = 0; m < header.at("rus").size(); ++m) {
        const auto& ru = header.at("rus").at(m);
        NeuralCodebook net = NeuralCodebook::make(
            ru.at("input_bits").get<int>(), ru.at("out_dim").get<int>() / 2,
            ru.at("hidden_neurons").get<int>(), ru.at("hidden_layers").get<int>());
        arma::vec params(net.param_count());
        in.read(reinterpret_cast<char*>(params.memptr()),
                std::streamsize(params.n_elem * sizeof(double)));
        if (!in)
            throw ConfigError("load_neural_codebooks: truncated weights in " + path);
        net.unflatten(params);
        gamma(arma::uword(m)) = ru.at("gamma").get<double>();
        nets.push_back(std::move(net));
    }
    return {std::move(nets), std::move(gamma)};
}

} // namespace cfmq
