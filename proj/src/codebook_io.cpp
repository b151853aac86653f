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

#include <json.hpp>

namespace cfmq {

using nlohmann::json;

// Codewords travel as flat [re, im, re, im, ...] arrays, one per codeword.
static json matrix_to_json(const arma::cx_mat& mat) {
    json cols = json::array();
    for (arma::uword j = 0; j < mat.n_cols; ++j) {
        json col = json::array();
        for (arma::uword i = 0; i < mat.n_rows; ++i) {
            col.push_back(mat(i, j).real());
            col.push_back(mat(i, j).imag());
        }
        cols.push_back(std::move(col));
    }
    return cols;
}

static arma::cx_mat matrix_from_json(const json& cols, arma::uword rows) {
    arma::cx_mat mat(rows, arma::uword(cols.size()));
    for (arma::uword j = 0; j < mat.n_cols; ++j) {
        const json& col = cols.at(j);
        if (col.size() != 2 * rows)
            throw ConfigError("codebook file: codeword entry count mismatch");
        for (arma::uword i = 0; i < rows; ++i)
            mat(i, j) = {col.at(2 * i).get<double>(), col.at(2 * i + 1).get<double>()};
    }
    return mat;
}

std::string codebooks_to_json(const std::vector<LookupCodebook>& books, const arma::vec& gamma) {
    json root;
    root["format"] = "cfmq-lookup-codebooks-v1";
    root["rus"] = json::array();
    for (std::size_t m = 0; m < books.size(); ++m) {
        json ru;
        ru["bits"] = books[m].bits;
        ru["dim"] = int(books[m].codewords.n_rows);
        ru["gamma"] = gamma.n_elem > m ? gamma(arma::uword(m)) : 1.0;
        ru["codewords"] = matrix_to_json(books[m].codewords);
        root["rus"].push_back(std::move(ru));
    }
    return root.dump(2);
}

std::pair<std::vector<LookupCodebook>, arma::vec> codebooks_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("codebook file: ") + e.what());
    }
    if (root.value("format", "") != "cfmq-lookup-codebooks-v1")
        throw ConfigError("codebook file: unknown format");
    std::vector<LookupCodebook> books;
    arma::vec gamma(arma::uword(root.at("rus").size()));
    for (std::size_t m = 0; m < root.at("rus").size(); ++m) {
        const json& ru = root.at("rus").at(m);
        LookupCodebook book;
        book.bits = ru.at("bits").get<int>();
        book.codewords = matrix_from_json(ru.at("codewords"), arma::uword(ru.at("dim").get<int>()));
        if (int(book.codewords.n_cols) != (1 << book.bits))
            throw ConfigError("codebook file: expected 2^bits codewords");
        gamma(arma::uword(m)) = ru.at("gamma").get<double>();
        books.push_back(std::move(book));
    }
    return {std::move(books), std::move(gamma)};
}

std::string trees_to_json(const std::vector<TreeCodebook>& trees, const arma::vec& gamma) {
    json root;
    root["format"] = "cfmq-tree-codebooks-v1";
    root["rus"] = json::array();
    for (std::size_t m = 0; m < trees.size(); ++m) {
        json ru;
        ru["depth"] = trees[m].depth;
        ru["dim"] = int(trees[m].levels.front().n_rows);
        ru["gamma"] = gamma.n_elem > m ? gamma(arma::uword(m)) : 1.0;
        ru["levels"] = json::array();
        for (const auto& level : trees[m].levels)
            ru["levels"].push_back(matrix_to_json(level));
        root["rus"].push_back(std::move(ru));
    }
    return root.dump(2);
}

std::pair<std::vector<TreeCodebook>, arma::vec> trees_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("tree codebook file: ") + e.what());
    }
    if (root.value("format", "") != "cfmq-tree-codebooks-v1")
        throw ConfigError("tree codebook file: unknown format");
    std::vector<TreeCodebook> trees;
    arma::vec gamma(arma::uword(root.at("rus").size()));
    for (std::size_t m = 0; m < root.at("rus").size(); ++m) {
        const json& ru = root.at("rus").at(m);
        TreeCodebook tree;
        tree.depth = ru.at("depth").get<int>();
        const arma::uword rows = arma::uword(ru.at("dim").get<int>());
        for (const auto& level : ru.at("levels"))
            tree.levels.push_back(matrix_from_json(level, rows));
        if (int(tree.levels.size()) != tree.depth)
            throw ConfigError("tree codebook file: level count mismatch");
        gamma(arma::uword(m)) = ru.at("gamma").get<double>();
        trees.push_back(std::move(tree));
    }
    return {std::move(trees), std::move(gamma)};
}

} // namespace cfmq
