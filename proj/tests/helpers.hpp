#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnn/graph.hpp"

namespace testing {

inline tgnn::LoadedGraph load(const std::string& nodes, const std::string& edges, const std::string& config) {
    std::istringstream n(nodes), e(edges);
    return tgnn::load_graph(n, e, nlohmann::json::parse(config));
}

// Small academic graph: papers, authors and
// one organization. Relations point from the child level to the parent.
//   AO: a1→o1, a2→o1        PA: p1→a1, p2→a1, p3→a2, p4→a2, p2→a2
inline tgnn::LoadedGraph academic(std::size_t dim = 2) {
    std::string nodes;
    int k = 0;
    auto row = [&](const std::string& id, const std::string& type) {
        nodes += id + "\t" + type + "\t";
        for (std::size_t j = 0; j < dim; ++j) {
            nodes += (j ? "," : "") + std::to_string(0.1 * (k + 1) * (j % 2 ? -1.0 : 1.0) + 0.05 * j);
        }
        nodes += "\n";
        ++k;
    };
    for (auto id : {"p1", "p2", "p3", "p4"}) row(id, "P");
    for (auto id : {"a1", "a2"}) row(id, "A");
    row("o1", "O");
    const std::string edges = "a1\to1\tAO\na2\to1\tAO\np1\ta1\tPA\np2\ta1\tPA\np3\ta2\tPA\np4\ta2\tPA\np2\ta2\tPA\n";
    const std::string config = R"({"types":["P","A","O"],
        "relations":[{"name":"PA","from":"P","to":"A"},{"name":"AO","from":"A","to":"O"}],
        "schemas":{"O":[["P","PA","AO"]],"A":[["P","PA"]]}})";
    return load(nodes, edges, config);
}

// exp by Taylor series with Horner evaluation after range reduction; a
// library-free oracle.
inline double series_exp(double x) {
    int halvings = 0;
    while (std::fabs(x) > 0.5) {
        x /= 2;
        ++halvings;
    }
    double r = 1.0;
    for (int n = 30; n >= 1; --n) r = 1.0 + x * r / n;
    for (int i = 0; i < halvings; ++i) r *= r;
    return r;
}

inline double series_tanh(double x) {
    const double e = series_exp(2 * x);
    return (e - 1) / (e + 1);
}

inline double series_sigmoid(double x) { return 1.0 / (1.0 + series_exp(-x)); }

} // namespace testing
