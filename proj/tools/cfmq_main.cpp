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

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfmq/accounting.hpp"
#include "cfmq/runner.hpp"
#include "cfmq/scenario.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw cfmq::ConfigError("cannot open " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw cfmq::SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    return root;
}

cfmq::Scenario load_scenario(const std::string& path, std::uint64_t seed_override,
                             bool has_seed) {
    cfmq::Scenario sc = cfmq::Scenario::from_file(path);
    if (has_seed)
        sc.seed = seed_override;
    return sc;
}

int run_flops(const std::string& config_path) {
    const json root = load_json(config_path);
    for (const auto& item : root.items())
        if (item.key() != "rus" && item.key() != "ues" && item.key() != "tx_antennas" &&
            item.key() != "rx_antennas" && item.key() != "streams" &&
            item.key() != "neural_hidden" && item.key() != "neural_bits" &&
            item.key() != "neural_layers")
            throw cfmq::SchemaError("$." + item.key(), "unknown key");

    cfmq::SystemConfig cfg;
    cfg.num_rus = root.at("rus").get<int>();
    cfg.num_ues = root.at("ues").get<int>();
    cfg.tx_antennas.assign(std::size_t(cfg.num_rus), root.at("tx_antennas").get<int>());
    cfg.rx_antennas.assign(std::size_t(cfg.num_ues), root.at("rx_antennas").get<int>());
    cfg.streams.assign(std::size_t(cfg.num_ues), root.at("streams").get<int>());
    cfg.fronthaul_bits.assign(std::size_t(cfg.num_rus), root.value("neural_bits", 64));
    cfg.power.assign(std::size_t(cfg.num_rus), 1.0);
    cfg.validate();

    std::vector<int> hidden = root.value("neural_hidden", std::vector<int>{64});
    const int layers = root.value("neural_layers", 1);

    std::cout << "side,name,formula,flops\n";
    {
        cfmq::NeuralDims dims;
        dims.bits = root.value("neural_bits", 64);
        dims.hidden_layers = layers;
        dims.hidden_neurons = hidden.front();
        const cfmq::FlopReport du = cfmq::flops_du(cfg, dims);
        for (std::size_t i = 0; i + 1 < du.items.size(); ++i)
            std::cout << "du," << du.items[i].name << ",\"" << du.items[i].formula << "\","
                      << du.items[i].flops << "\n";
        for (int n_net : hidden) {
            dims.hidden_neurons = n_net;
            const cfmq::FlopReport rep = cfmq::flops_du(cfg, dims);
            const cfmq::FlopItem& item = rep.items.back();
            std::cout << "du," << item.name << "[n_net=" << n_net << "],\"" << item.formula
                      << "\"," << item.flops << "\n";
        }
    }
    {
        cfmq::NeuralDims dims;
        dims.bits = root.value("neural_bits", 64);
        dims.hidden_layers = layers;
        dims.hidden_neurons = hidden.front();
        const cfmq::FlopReport ru = cfmq::flops_ru(cfg, dims);
        std::cout << "ru," << ru.items.front().name << ",\"" << ru.items.front().formula << "\","
                  << ru.items.front().flops << "\n";
        for (int n_net : hidden) {
            dims.hidden_neurons = n_net;
            const cfmq::FlopReport rep = cfmq::flops_ru(cfg, dims);
            const cfmq::FlopItem& item = rep.items.back();
            std::cout << "ru," << item.name << "[n_net=" << n_net << "],\"" << item.formula
                      << "\"," << item.flops << "\n";
        }
    }
    return 0;
}

int run_overhead(const std::string& config_path) {
    const json root = load_json(config_path);
    for (const auto& item : root.items())
        if (item.key() != "cp" && item.key() != "pc_bits" && item.key() != "grid" &&
            item.key() != "cp_streams")
            throw cfmq::SchemaError("$." + item.key(), "unknown key");

    cfmq::OverheadReport report;
    if (root.contains("grid")) {
        const json& g = root.at("grid");
        report.grid.n_rb = g.value("n_rb", report.grid.n_rb);
        report.grid.n_sc = g.value("n_sc", report.grid.n_sc);
        report.grid.n_ofdm = g.value("n_ofdm", report.grid.n_ofdm);
        report.grid.slots_per_sec = g.value("slots_per_sec", report.grid.slots_per_sec);
        report.grid.n_rbg = g.value("n_rbg", report.grid.n_rbg);
    }
    if (root.contains("cp")) {
        const json& cp = root.at("cp");
        report.r_sum = cp.at("r_sum").get<double>();
        report.r_code = cp.value("r_code", 1.0);
        report.b_cp = cp.at("b_cp").get<int>();
        report.reuse = cp.at("reuse").get<int>();
        report.cp_bits_per_use = cfmq::cp_fronthaul_bits_per_use(
            report.r_sum, report.r_code, cp.at("n_tx").get<int>(),
            cp.at("streams").get<int>(), report.b_cp, report.reuse);
    }
    if (root.contains("pc_bits")) {
        report.b_m = root.at("pc_bits").get<int>();
        report.pc_bits_per_use = cfmq::pc_fronthaul_bits_per_use(report.b_m);
        report.pc_bps = cfmq::stream_bps(report.pc_bits_per_use, report.grid);
    }
    if (root.contains("cp_streams")) {
        const json& s = root.at("cp_streams");
        report.cp_precoder_bps = cfmq::precoder_stream_bps(
            s.at("b_w").get<int>(), s.at("n_tx").get<int>(), s.at("streams").get<int>(),
            report.grid);
        report.cp_data_bps = cfmq::stream_bps(
            double(s.at("b_s").get<int>()) * double(s.at("streams").get<int>()), report.grid);
    }
    std::cout << report.to_csv();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cell-free massive MIMO fronthaul quantization simulator"};
    app.require_subcommand(1);

    std::string scenario_path, config_path, out_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "train codebooks and evaluate every scheme");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    CLI::Option* run_seed = run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out-dir", out_dir, "output directory");
    run->add_option("--threads", threads, "worker threads");

    CLI::App* train = app.add_subcommand("train", "train and save codebooks only");
    train->add_option("scenario", scenario_path, "scenario JSON file")->required();
    CLI::Option* train_seed = train->add_option("--seed", seed, "override the scenario seed");
    train->add_option("--out-dir", out_dir, "output directory");
    train->add_option("--threads", threads, "worker threads");

    CLI::App* flops = app.add_subcommand("flops", "per-channel-use flop accounting");
    flops->add_option("config", config_path, "complexity config JSON")->required();

    CLI::App* overhead = app.add_subcommand("overhead", "fronthaul overhead accounting");
    overhead->add_option("config", config_path, "overhead config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run)) {
            const cfmq::Scenario sc =
                load_scenario(scenario_path, seed, run_seed->count() > 0);
            const cfmq::RunOutput out = cfmq::run_scenario(sc, out_dir, threads);
            std::cout << "wrote " << out.results_csv_path << " (" << out.rows.size()
                      << " rows) and " << out.summary_json_path << "\n";
            return 0;
        }
        if (app.got_subcommand(train)) {
            const cfmq::Scenario sc =
                load_scenario(scenario_path, seed, train_seed->count() > 0);
            cfmq::train_scenario(sc, out_dir, threads);
            std::cout << "wrote codebooks to " << out_dir << "\n";
            return 0;
        }
        if (app.got_subcommand(flops))
            return run_flops(config_path);
        if (app.got_subcommand(overhead))
            return run_overhead(config_path);
    } catch (const cfmq::SchemaError& e) {
        std::cerr << "schema error at " << e.path() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
