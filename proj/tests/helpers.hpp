#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "scgm/scgm.hpp"

namespace scgm_test {

inline scgm::Layout layout(std::vector<int> cards, std::vector<scgm::Coding> codings = {}) {
    std::vector<scgm::VariableSpec> v;
    for (std::size_t j = 0; j < cards.size(); ++j)
        v.push_back({std::to_string(j + 1), cards[j], codings.empty() ? scgm::Coding::Baseline : codings[j], {}});
    return scgm::Layout(std::move(v));
}

inline scgm::ProbabilityVector random_pv(const scgm::Layout& l, std::mt19937_64& rng) {
    std::lognormal_distribution<double> d(0.0, 0.7);
    std::vector<double> w(l.n_cells());
    for (double& x : w) x = d(rng);
    return scgm::normalized(l, std::move(w));
}

inline std::string data_path(const std::string& name) { return std::string(SCGM_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace scgm_test
