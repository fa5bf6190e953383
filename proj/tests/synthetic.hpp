#pragma once

// Synthetic six-variable binary SCGM used by the search tests.
//
// Components {1,2}, {3}, {4}, {5}, {6}; every earlier vertex is a parent of
// every later one, and the single planted restriction is that 4 does not
// depend on 3 when 1 takes level 1.  All other slice associations have
// |log odds ratio| >= 0.6.

#include <cmath>
#include <random>

#include "scgm/chain_graph.hpp"
#include "scgm/tables.hpp"

namespace scgm_test {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Joint probabilities in layout order (last variable fastest), levels 1/2.
inline std::vector<double> synthetic_probabilities() {
    std::vector<double> p;
    double z12[4];
    double tot = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double z1 = a == 0, z2 = b == 0;
            z12[a * 2 + b] = std::exp(0.3 * z1 - 0.2 * z2 + 1.2 * z1 * z2);
            tot += z12[a * 2 + b];
        }
    for (int c = 0; c < 64; ++c) {
        int x[6];
        for (int j = 0; j < 6; ++j) x[j] = (c >> (5 - j)) & 1;
        double z[6];
        for (int j = 0; j < 6; ++j) z[j] = x[j] == 0 ? 1.0 : 0.0;
        const auto bern = [](double logit, double zv) { return zv > 0 ? logistic(logit) : 1.0 - logistic(logit); };
        double pr = z12[x[0] * 2 + x[1]] / tot;
        pr *= bern(-0.2 + 1.0 * z[0] - 1.1 * z[1] + 0.3 * z[0] * z[1], z[2]);
        pr *= bern(-0.1 + 0.9 * z[0] + 1.0 * z[1] + 1.2 * (1.0 - z[0]) * z[2], z[3]);
        pr *= bern(0.1 + 0.9 * z[0] - 1.0 * z[1] + 1.1 * z[2] - 1.2 * z[3] + 0.3 * z[0] * z[2] - 0.3 * z[1] * z[3],
                   z[4]);
        pr *= bern(-0.2 + 1.0 * z[0] + 0.9 * z[1] - 1.0 * z[2] + 1.1 * z[3] + 1.2 * z[4] + 0.2 * z[2] * z[4], z[5]);
        p.push_back(pr);
    }
    return p;
}

inline scgm::ContingencyTable synthetic_table(std::uint64_t seed, long n) {
    const auto p = synthetic_probabilities();
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> d(p.begin(), p.end());
    std::vector<scgm::VariableSpec> vars;
    for (int j = 1; j <= 6; ++j) vars.push_back({std::to_string(j), 2, scgm::Coding::Baseline, {}});
    std::vector<double> counts(64, 0.0);
    for (long i = 0; i < n; ++i) counts[static_cast<std::size_t>(d(rng))] += 1.0;
    return scgm::ContingencyTable(scgm::Layout(std::move(vars)), std::move(counts));
}

inline const char* kSyntheticSkeleton =
    "component T1 = {1,2}\n"
    "component T2 = {3}\n"
    "component T3 = {4}\n"
    "component T4 = {5}\n"
    "component T5 = {6}\n"
    "edge 1 -- 2\n"
    "arc 1 -> 3\narc 2 -> 3\n"
    "arc 1 -> 4\narc 2 -> 4\narc 3 -> 4\n"
    "arc 1 -> 5\narc 2 -> 5\narc 3 -> 5\narc 4 -> 5\n"
    "arc 1 -> 6\narc 2 -> 6\narc 3 -> 6\narc 4 -> 6\narc 5 -> 6\n";

inline const char* kSyntheticPlanted = "CS: {4} _||_ {3} | {1,2} = (1,*)";

}  // namespace scgm_test
