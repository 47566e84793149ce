#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tgnn/graph.hpp"

namespace tgnn {

// Planted-community heterogeneous graph generator.
struct SyntheticSpec {
    struct TypeSpec {
        std::string name;
        std::size_t count = 0;
    };
    // Every `from` node links to `branching` distinct `to` nodes. A non-empty
    // `mirror` also emits the reverse edge under that relation name.
    struct RelationSpec {
        std::string name;
        std::string from;
        std::string to;
        std::size_t branching = 1;
        std::string mirror;
    };

    std::vector<TypeSpec> types;
    std::vector<RelationSpec> relations;
    // Root type name → schemas as token chains (same form as the config file).
    std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> schemas;
    std::size_t communities = 4;
    double epsilon = 0.05;       // probability of attaching to a uniform random parent
    std::size_t feature_dim = 16;
    double sigma = 0.5;          // feature noise around the community centroid
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static SyntheticSpec from_json(const nlohmann::json& j);

    // P/A/V benchmark, ~600 nodes, 4 communities.
    static SyntheticSpec benchmark(std::uint64_t seed = 7);
    // Paper/author/venue/term roster at 1/50 of the DBLP subset, with the
    // schemas AP, TP (paper), TPA (author), TPV, APV (venue).
    static SyntheticSpec dblp_small(std::uint64_t seed = 0);
};

struct SyntheticGraph {
    HetGraph graph;
    std::vector<TreeSchema> schemas;
    std::vector<std::pair<std::string, std::string>> labels;  // node name → community
    nlohmann::json schema_config;
};

// Children pick a same-community parent with probability 1 − ε, otherwise a
// uniform one. Features are a per-community N(0, I) centroid plus N(0, σ²I)
// noise. Throws ContractError on infeasible branching.
SyntheticGraph gen_synthetic(const SyntheticSpec& spec);

// Writes nodes.tsv, edges.tsv, labels.tsv and schemas.json into `dir`.
void write_synthetic(const SyntheticGraph& g, const std::string& dir);

} // namespace tgnn
