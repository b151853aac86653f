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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfmq/runner.hpp"
#include "cfmq/scenario.hpp"
#include "helpers.hpp"

using namespace cfmq;

namespace {

const char* kMinimalScenario = R"({
  "seed": 3,
  "system": {
    "rus": 2, "ues": 2,
    "tx_antennas": 1, "rx_antennas": 1, "streams": 1,
    "fronthaul_bits": 2, "power": 1.0, "noise_var": 0.1
  },
  "channel": {
    "ru_positions": [[0, 0], [60, 0]],
    "ue_box": [0, 0, 80, 80],
    "pathloss_exponent": 3.0,
    "reference_loss_db": 30.0,
    "normalize_gain": true
  },
  "precoder": "mmse",
  "training": {"channels": 4, "symbols": 6, "rounds": 4},
  "evaluation": {"channels": 2, "gaussian_symbols": 40, "qam_symbols": 40},
  "schemes": [{"name": "vq"}]
})";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string unique_dir(const char* tag) {
    static int counter = 0;
    return "/tmp/cfmq_harness_" + std::string(tag) + "_" + std::to_string(counter++);
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const std::string cmd = std::string(CFMQ_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string captured;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe) != nullptr)
        captured += buf;
    const int status = pclose(pipe);
    if (output != nullptr)
        *output = captured;
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("scenario parsing accepts the minimal file and fills defaults") {
    const Scenario sc = Scenario::from_json_text(kMinimalScenario);
    CHECK(sc.system.num_rus == 2);
    CHECK(sc.train_channels == 4);
    CHECK(sc.schemes.size() == 1);
    const std::string resolved = sc.resolved_json();
    CHECK(resolved.find("lloyd_rounds_per_level") != std::string::npos);
    // A resolved scenario reparses to itself.
    const Scenario again = Scenario::from_json_text(resolved);
    CHECK(again.seed == sc.seed);
    CHECK(again.system.fronthaul_bits == sc.system.fronthaul_bits);
}

TEST_CASE("scenario parsing rejects unknown keys with the field path") {
    std::string broken = kMinimalScenario;
    broken.replace(broken.find("\"precoder\""), 10, "\"precodre\"");
    try {
        (void)Scenario::from_json_text(broken);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.path()) == "$.precodre");
    }

    // Nested unknown key.
    std::string nested = kMinimalScenario;
    nested.replace(nested.find("\"rounds\""), 8, "\"riunds\"");
    try {
        (void)Scenario::from_json_text(nested);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.path()) == "$.training.riunds");
    }
}

TEST_CASE("scenario parsing validates field contents") {
    std::string bad_scheme = kMinimalScenario;
    bad_scheme.replace(bad_scheme.find("\"vq\""), 4, "\"vx\"");
    CHECK_THROWS_AS(Scenario::from_json_text(bad_scheme), SchemaError);

    std::string bad_alpha = kMinimalScenario;
    bad_alpha.replace(bad_alpha.find("{\"name\": \"vq\"}"), 14,
                      "{\"name\": \"alpha_pmq\", \"alpha\": 1.5}");
    CHECK_THROWS_AS(Scenario::from_json_text(bad_alpha), SchemaError);
}

TEST_CASE("run_scenario writes at least one row and is reproducible byte for byte") {
    const Scenario sc = Scenario::from_json_text(kMinimalScenario);
    const std::string dir_a = unique_dir("runa");
    const std::string dir_b = unique_dir("runb");
    const RunOutput a = run_scenario(sc, dir_a, 1);
    const RunOutput b = run_scenario(sc, dir_b, 2); // different thread count
    REQUIRE(a.rows.size() == 1);
    CHECK(a.rows[0].scheme == "vq");
    CHECK(read_file(a.results_csv_path) == read_file(b.results_csv_path));
    CHECK(std::filesystem::exists(dir_a + "/scenario_resolved.json"));
    CHECK(std::filesystem::exists(dir_a + "/codebook_vq_b2.json"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("compare_schemes") {
    ResultRow a;
    a.scheme = "vq";
    a.bits = 2;
    a.sum_se = 2.0;
    a.objective = 1.0;
    ResultRow b = a;
    b.scheme = "mq";
    b.sum_se = 3.0;
    b.objective = 0.5;

    SUBCASE("a scheme against itself has ratio one") {
        const std::string table = compare_schemes({a}, "vq");
        CHECK(table.find("vq,2,2,1,") != std::string::npos);
    }
    SUBCASE("one line per scheme per sweep point") {
        ResultRow a3 = a;
        a3.bits = 3;
        ResultRow b3 = b;
        b3.bits = 3;
        const std::string table = compare_schemes({a, b, a3, b3}, "vq");
        int lines = 0;
        for (char c : table)
            lines += c == '\n';
        CHECK(lines == 5); // header + 4 rows
    }
    SUBCASE("missing baseline is an error") {
        CHECK_THROWS_AS(compare_schemes({a, b}, "smq"), ConfigError);
    }
}

TEST_CASE("mq sweep over nested fronthaul bits never loses spectral efficiency") {
    std::string sweep_scenario = R"({
      "seed": 5,
      "system": {
        "rus": 2, "ues": 2,
        "tx_antennas": 1, "rx_antennas": 1, "streams": 1,
        "fronthaul_bits": 1, "power": 1.0, "noise_var": 0.1
      },
      "channel": {
        "ru_positions": [[0, 0], [60, 0]],
        "ue_box": [0, 0, 80, 80],
        "normalize_gain": true
      },
      "training": {"channels": 6, "symbols": 10, "rounds": 6},
      "evaluation": {"channels": 2, "gaussian_symbols": 150, "qam_symbols": 0},
      "schemes": [{"name": "mq"}],
      "sweep_bits": [1, 2, 3]
    })";
    const Scenario sc = Scenario::from_json_text(sweep_scenario);
    const std::string dir = unique_dir("sweep");
    const RunOutput out = run_scenario(sc, dir, 2);
    REQUIRE(out.rows.size() == 3);
    CHECK(out.rows[1].sum_se >= out.rows[0].sum_se - 1e-9);
    CHECK(out.rows[2].sum_se >= out.rows[1].sum_se - 1e-9);
    std::filesystem::remove_all(dir);
}

TEST_CASE("every scheme runs end to end, with pilot estimation enabled") {
    const char* roster = R"({
      "seed": 9,
      "system": {
        "rus": 2, "ues": 2,
        "tx_antennas": 2, "rx_antennas": 2, "streams": 1,
        "fronthaul_bits": 2, "power": 1.0, "noise_var": 0.1
      },
      "channel": {
        "ru_positions": [[0, 0], [60, 0]],
        "ue_box": [0, 0, 80, 80],
        "normalize_gain": true
      },
      "training": {"channels": 3, "symbols": 4, "rounds": 3, "epochs": 4,
                   "lloyd_rounds_per_level": 2},
      "evaluation": {"channels": 2, "gaussian_symbols": 16, "qam_symbols": 16},
      "schemes": [
        {"name": "vq"}, {"name": "mq"}, {"name": "smq"}, {"name": "tree_mq"},
        {"name": "alpha_pmq", "alpha": 0.5, "iterations": 4},
        {"name": "neural_mq", "gd_steps": 20},
        {"name": "neural_vq", "gd_steps": 20},
        {"name": "cp", "b_cp": 8, "reuse": 168}
      ],
      "baseline": "vq",
      "pilots": {"count": 4, "design": "orthogonal"}
    })";
    const Scenario sc = Scenario::from_json_text(roster);
    const std::string dir = unique_dir("roster");
    const RunOutput out = run_scenario(sc, dir, 2);
    REQUIRE(out.rows.size() == 8);
    for (const auto& row : out.rows) {
        CHECK(std::isfinite(row.sum_se));
        CHECK(row.ser >= 0.0);
        CHECK(row.ser <= 1.0);
        CHECK(row.est_error_power > 0.0); // pilots simulated
        CHECK(row.sinr.n_elem == 2);
        CHECK(row.sinr.min() > 0.0);
        CHECK(row.metrics.ei.min() >= 0.0);
        if (row.scheme == "cp")
            CHECK(row.op_count == 0); // search-free baseline
        else
            CHECK(row.op_count > 0);
    }
    CHECK(std::filesystem::exists(dir + "/summary.json"));
    CHECK(std::filesystem::exists(dir + "/codebook_tree_mq_b2.json"));
    CHECK(std::filesystem::exists(dir + "/codebook_neural_mq_b2.bin"));
    const std::string summary = read_file(dir + "/summary.json");
    CHECK(summary.find("\"baseline\": \"vq\"") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("CLI") {
    SUBCASE("run completes, writes results, and reruns byte-identically") {
        const std::string dir = unique_dir("cli");
        const std::string scenario_path = dir + "_scenario.json";
        {
            std::ofstream out(scenario_path);
            out << kMinimalScenario;
        }
        std::string output;
        CHECK(run_cli("run " + scenario_path + " --out-dir " + dir, &output) == 0);
        const std::string first = read_file(dir + "/results.csv");
        CHECK(run_cli("run " + scenario_path + " --out-dir " + dir, &output) == 0);
        CHECK(read_file(dir + "/results.csv") == first);

        // Seed override changes the results.
        CHECK(run_cli("run " + scenario_path + " --seed 99 --out-dir " + dir, &output) == 0);
        CHECK(read_file(dir + "/results.csv") != first);

        std::filesystem::remove_all(dir);
        std::filesystem::remove(scenario_path);
    }
    SUBCASE("train writes codebooks") {
        const std::string dir = unique_dir("train");
        const std::string scenario_path = dir + "_scenario.json";
        {
            std::ofstream out(scenario_path);
            out << kMinimalScenario;
        }
        CHECK(run_cli("train " + scenario_path + " --out-dir " + dir) == 0);
        CHECK(std::filesystem::exists(dir + "/codebook_vq_b2.json"));
        std::filesystem::remove_all(dir);
        std::filesystem::remove(scenario_path);
    }
    SUBCASE("schema violations exit with code 2 and the field path") {
        const std::string scenario_path = "/tmp/cfmq_bad_scenario.json";
        {
            std::ofstream out(scenario_path);
            out << R"({"seed": 1, "bogus_key": true})";
        }
        std::string output;
        CHECK(run_cli("run " + scenario_path, &output) == 2);
        CHECK(output.find("$.bogus_key") != std::string::npos);
        std::filesystem::remove(scenario_path);
    }
    SUBCASE("runtime failures exit with code 1") {
        std::string output;
        CHECK(run_cli("run /tmp/definitely_missing_scenario.json", &output) == 1);
    }
    SUBCASE("flops and overhead emit the reference tables") {
        std::string output;
        CHECK(run_cli(std::string("flops ") + CFMQ_SCENARIO_DIR + "/reference_complexity.json",
                      &output) == 0);
        CHECK(output.find("44032") != std::string::npos);
        CHECK(run_cli(std::string("overhead ") + CFMQ_SCENARIO_DIR + "/reference_overhead.json",
                      &output) == 0);
        CHECK(output.find("cp_bits_per_use,67.0476") != std::string::npos);
    }
}

TEST_CASE("channel dumps") {
    Rng rng(41);
    const SystemConfig cfg = test::scalar_config(2, 2, 1);
    const ChannelState channel = test::random_channel(cfg, rng);
    const std::string csv = channel_to_csv(channel);
    CHECK(csv.find("row,col,re,im") == 0);
    int lines = 0;
    for (char c : csv)
        lines += c == '\n';
    CHECK(lines == 1 + 4);

    const std::string path = "/tmp/cfmq_channel_dump.bin";
    channel_write_binary(channel, path);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), sizeof re);
    in.read(reinterpret_cast<char*>(&im), sizeof im);
    CHECK(re == channel.h(0, 0).real());
    CHECK(im == channel.h(0, 0).imag());
    std::remove(path.c_str());
}
