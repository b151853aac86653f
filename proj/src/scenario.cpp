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

#include "cfmq/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cfmq {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
    if (!obj.is_object())
        throw SchemaError(path, "expected an object");
    for (const auto& item : obj.items())
        if (allowed.find(item.key()) == allowed.end())
            throw SchemaError(path + "." + item.key(), "unknown key");
}

template <typename T>
T require(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key))
        throw SchemaError(path + "." + key, "missing required key");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(path + "." + key, "wrong type");
    }
}

template <typename T>
T optional(const json& obj, const std::string& path, const std::string& key, T fallback) {
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(path + "." + key, "wrong type");
    }
}

// Per-RU or per-UE fields accept either a full array or one broadcast value.
template <typename T>
std::vector<T> broadcast_list(const json& obj, const std::string& path, const std::string& key,
                              int count) {
    if (!obj.contains(key))
        throw SchemaError(path + "." + key, "missing required key");
    const json& v = obj.at(key);
    std::vector<T> out;
    try {
        if (v.is_array()) {
            out = v.get<std::vector<T>>();
        } else {
            out.assign(std::size_t(count), v.get<T>());
        }
    } catch (const json::exception&) {
        throw SchemaError(path + "." + key, "wrong type");
    }
    if (int(out.size()) != count)
        throw SchemaError(path + "." + key,
                          "expected " + std::to_string(count) + " entries");
    return out;
}

} // namespace

Scenario Scenario::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    reject_unknown(root, "$",
                   {"seed", "system", "channel", "precoder", "training", "evaluation", "schemes",
                    "sweep_bits", "baseline", "pilots"});

    Scenario sc;
    sc.seed = optional<std::uint64_t>(root, "$", "seed", 1);

    {
        const json& sys = root.contains("system") ? root.at("system") : json::object();
        if (!root.contains("system"))
            throw SchemaError("$.system", "missing required key");
        reject_unknown(sys, "$.system",
                       {"rus", "ues", "tx_antennas", "rx_antennas", "streams", "fronthaul_bits",
                        "power", "noise_var"});
        sc.system.num_rus = require<int>(sys, "$.system", "rus");
        sc.system.num_ues = require<int>(sys, "$.system", "ues");
        if (sc.system.num_rus < 1 || sc.system.num_ues < 1)
            throw SchemaError("$.system", "need at least one RU and one UE");
        sc.system.tx_antennas =
            broadcast_list<int>(sys, "$.system", "tx_antennas", sc.system.num_rus);
        sc.system.rx_antennas =
            broadcast_list<int>(sys, "$.system", "rx_antennas", sc.system.num_ues);
        sc.system.streams = broadcast_list<int>(sys, "$.system", "streams", sc.system.num_ues);
        sc.system.fronthaul_bits =
            broadcast_list<int>(sys, "$.system", "fronthaul_bits", sc.system.num_rus);
        sc.system.power = broadcast_list<double>(sys, "$.system", "power", sc.system.num_rus);
        sc.system.noise_var = optional<double>(sys, "$.system", "noise_var", 1.0);
        try {
            sc.system.validate();
        } catch (const ConfigError& e) {
            throw SchemaError("$.system", e.what());
        }
    }

    {
        if (!root.contains("channel"))
            throw SchemaError("$.channel", "missing required key");
        const json& ch = root.at("channel");
        reject_unknown(ch, "$.channel",
                       {"ru_positions", "ue_box", "pathloss_exponent", "reference_loss_db",
                        "normalize_gain"});
        const auto positions =
            require<std::vector<std::vector<double>>>(ch, "$.channel", "ru_positions");
        if (int(positions.size()) != sc.system.num_rus)
            throw SchemaError("$.channel.ru_positions", "need one [x, y] entry per RU");
        sc.channel.ru_positions.set_size(arma::uword(sc.system.num_rus), 2);
        for (std::size_t m = 0; m < positions.size(); ++m) {
            if (positions[m].size() != 2)
                throw SchemaError("$.channel.ru_positions", "entries must be [x, y]");
            sc.channel.ru_positions(arma::uword(m), 0) = positions[m][0];
            sc.channel.ru_positions(arma::uword(m), 1) = positions[m][1];
        }
        const auto box = optional<std::vector<double>>(ch, "$.channel", "ue_box",
                                                       {0.0, 0.0, 100.0, 100.0});
        if (box.size() != 4)
            throw SchemaError("$.channel.ue_box", "expected [min_x, min_y, max_x, max_y]");
        sc.channel.ue_box_min_x = box[0];
        sc.channel.ue_box_min_y = box[1];
        sc.channel.ue_box_max_x = box[2];
        sc.channel.ue_box_max_y = box[3];
        sc.channel.pathloss_exponent = optional<double>(ch, "$.channel", "pathloss_exponent", 3.0);
        sc.channel.reference_loss_db = optional<double>(ch, "$.channel", "reference_loss_db", 30.0);
        sc.channel.normalize_gain = optional<bool>(ch, "$.channel", "normalize_gain", true);
    }

    {
        const std::string prec = optional<std::string>(root, "$", "precoder", "mmse");
        if (prec == "mmse")
            sc.precoder = PrecoderKind::mmse;
        else if (prec == "zf")
            sc.precoder = PrecoderKind::zero_forcing;
        else
            throw SchemaError("$.precoder", "expected \"mmse\" or \"zf\"");
    }

    if (root.contains("training")) {
        const json& tr = root.at("training");
        reject_unknown(tr, "$.training",
                       {"channels", "symbols", "rounds", "epochs", "lloyd_rounds_per_level"});
        sc.train_channels = optional<int>(tr, "$.training", "channels", sc.train_channels);
        sc.train_symbols = optional<int>(tr, "$.training", "symbols", sc.train_symbols);
        sc.train_rounds = optional<int>(tr, "$.training", "rounds", sc.train_rounds);
        sc.train_epochs = optional<int>(tr, "$.training", "epochs", sc.train_epochs);
        sc.lloyd_rounds_per_level =
            optional<int>(tr, "$.training", "lloyd_rounds_per_level", sc.lloyd_rounds_per_level);
        if (sc.train_channels < 1 || sc.train_symbols < 1 || sc.train_rounds < 1 ||
            sc.train_epochs < 1 || sc.lloyd_rounds_per_level < 1)
            throw SchemaError("$.training", "all sizes must be >= 1");
    }

    if (root.contains("evaluation")) {
        const json& ev = root.at("evaluation");
        reject_unknown(ev, "$.evaluation", {"channels", "gaussian_symbols", "qam_symbols"});
        sc.eval_channels = optional<int>(ev, "$.evaluation", "channels", sc.eval_channels);
        sc.eval_gaussian_symbols =
            optional<int>(ev, "$.evaluation", "gaussian_symbols", sc.eval_gaussian_symbols);
        sc.eval_qam_symbols = optional<int>(ev, "$.evaluation", "qam_symbols", sc.eval_qam_symbols);
        if (sc.eval_channels < 1 || sc.eval_gaussian_symbols < 1 || sc.eval_qam_symbols < 0)
            throw SchemaError("$.evaluation", "sizes must be positive");
    }

    {
        if (!root.contains("schemes"))
            throw SchemaError("$.schemes", "missing required key");
        const json& schemes = root.at("schemes");
        if (!schemes.is_array() || schemes.empty())
            throw SchemaError("$.schemes", "expected a non-empty array");
        static const std::set<std::string> known = {"vq",        "mq",        "smq",
                                                    "tree_mq",   "alpha_pmq", "neural_mq",
                                                    "neural_vq", "cp"};
        for (std::size_t i = 0; i < schemes.size(); ++i) {
            const std::string path = "$.schemes[" + std::to_string(i) + "]";
            const json& s = schemes.at(i);
            reject_unknown(s, path,
                           {"name", "alpha", "iterations", "cap", "gd_steps", "step_size",
                            "hidden_neurons", "hidden_layers", "epochs", "learning_rate",
                            "b_cp", "reuse"});
            SchemeSpec spec;
            spec.name = require<std::string>(s, path, "name");
            if (known.find(spec.name) == known.end())
                throw SchemaError(path + ".name", "unknown scheme \"" + spec.name + "\"");
            spec.alpha = optional<double>(s, path, "alpha", spec.alpha);
            if (spec.alpha < 0.0 || spec.alpha > 1.0)
                throw SchemaError(path + ".alpha", "alpha must lie in [0, 1]");
            spec.iterations = optional<int>(s, path, "iterations", spec.iterations);
            spec.cap = optional<long long>(s, path, "cap", spec.cap);
            spec.gd_steps = optional<int>(s, path, "gd_steps", spec.gd_steps);
            spec.step_size = optional<double>(s, path, "step_size", spec.step_size);
            spec.hidden_neurons = optional<int>(s, path, "hidden_neurons", spec.hidden_neurons);
            spec.hidden_layers = optional<int>(s, path, "hidden_layers", spec.hidden_layers);
            spec.epochs = optional<int>(s, path, "epochs", spec.epochs);
            spec.learning_rate = optional<double>(s, path, "learning_rate", spec.learning_rate);
            spec.b_cp = optional<int>(s, path, "b_cp", spec.b_cp);
            spec.reuse = optional<int>(s, path, "reuse", spec.reuse);
            if (spec.name == "cp" && (spec.b_cp < 2 || spec.b_cp % 2 != 0))
                throw SchemaError(path + ".b_cp", "bits per entry must be even and >= 2");
            if (spec.reuse < 1)
                throw SchemaError(path + ".reuse", "reuse factor must be >= 1");
            sc.schemes.push_back(std::move(spec));
        }
    }

    if (root.contains("sweep_bits")) {
        sc.sweep_bits = optional<std::vector<int>>(root, "$", "sweep_bits", {});
        for (std::size_t i = 0; i + 1 < sc.sweep_bits.size(); ++i)
            if (sc.sweep_bits[i + 1] <= sc.sweep_bits[i])
                throw SchemaError("$.sweep_bits", "must be strictly increasing");
        for (int b : sc.sweep_bits)
            if (b < 1)
                throw SchemaError("$.sweep_bits", "bits must be >= 1");
    }

    sc.baseline = optional<std::string>(root, "$", "baseline", "");
    if (!sc.baseline.empty()) {
        bool found = false;
        for (const auto& s : sc.schemes)
            found = found || s.name == sc.baseline;
        if (!found)
            throw SchemaError("$.baseline", "baseline scheme is not in the scheme list");
    }

    if (root.contains("pilots")) {
        const json& p = root.at("pilots");
        reject_unknown(p, "$.pilots", {"count", "design"});
        sc.pilot_count = require<int>(p, "$.pilots", "count");
        if (sc.pilot_count < 1)
            throw SchemaError("$.pilots.count", "must be >= 1");
        const std::string design = optional<std::string>(p, "$.pilots", "design", "orthogonal");
        if (design == "orthogonal")
            sc.pilot_design = PilotDesign::orthogonal;
        else if (design == "gaussian")
            sc.pilot_design = PilotDesign::gaussian;
        else
            throw SchemaError("$.pilots.design", "expected \"orthogonal\" or \"gaussian\"");
    }

    sc.validate();
    return sc;
}

Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("scenario: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void Scenario::validate() const {
    system.validate();
    channel.validate(system);
    if (schemes.empty())
        throw ConfigError("scenario: no schemes listed");
}

std::string Scenario::resolved_json() const {
    json root;
    root["seed"] = seed;
    root["system"] = {{"rus", system.num_rus},
                      {"ues", system.num_ues},
                      {"tx_antennas", system.tx_antennas},
                      {"rx_antennas", system.rx_antennas},
                      {"streams", system.streams},
                      {"fronthaul_bits", system.fronthaul_bits},
                      {"power", system.power},
                      {"noise_var", system.noise_var}};
    json positions = json::array();
    for (arma::uword m = 0; m < channel.ru_positions.n_rows; ++m)
        positions.push_back({channel.ru_positions(m, 0), channel.ru_positions(m, 1)});
    root["channel"] = {{"ru_positions", positions},
                       {"ue_box",
                        {channel.ue_box_min_x, channel.ue_box_min_y, channel.ue_box_max_x,
                         channel.ue_box_max_y}},
                       {"pathloss_exponent", channel.pathloss_exponent},
                       {"reference_loss_db", channel.reference_loss_db},
                       {"normalize_gain", channel.normalize_gain}};
    root["precoder"] = precoder == PrecoderKind::mmse ? "mmse" : "zf";
    root["training"] = {{"channels", train_channels},
                        {"symbols", train_symbols},
                        {"rounds", train_rounds},
                        {"epochs", train_epochs},
                        {"lloyd_rounds_per_level", lloyd_rounds_per_level}};
    root["evaluation"] = {{"channels", eval_channels},
                          {"gaussian_symbols", eval_gaussian_symbols},
                          {"qam_symbols", eval_qam_symbols}};
    root["schemes"] = json::array();
    for (const auto& s : schemes)
        root["schemes"].push_back({{"name", s.name},
                                   {"alpha", s.alpha},
                                   {"iterations", s.iterations},
                                   {"cap", s.cap},
                                   {"gd_steps", s.gd_steps},
                                   {"step_size", s.step_size},
                                   {"hidden_neurons", s.hidden_neurons},
                                   {"hidden_layers", s.hidden_layers},
                                   {"epochs", s.epochs},
                                   {"learning_rate", s.learning_rate},
                                   {"b_cp", s.b_cp},
                                   {"reuse", s.reuse}});
    if (!sweep_bits.empty())
        root["sweep_bits"] = sweep_bits;
    if (!baseline.empty())
        root["baseline"] = baseline;
    if (pilot_count > 0)
        root["pilots"] = {{"count", pilot_count},
                          {"design",
                           pilot_design == PilotDesign::orthogonal ? "orthogonal" : "gaussian"}};
    return root.dump(2);
}

} // namespace cfmq
