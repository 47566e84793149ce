#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tgnn/graph.hpp"
#include "tgnn/rng.hpp"

namespace tgnn {

// Per-parent child cap; nullopt means every neighbor is kept.
using Fanout = std::optional<std::size_t>;

inline constexpr std::size_t default_fanout = 10;

// A sampled tree-structured neighborhood. levels[a] holds the distinct nodes
// of type t_a; children[a][p] lists, for the p-th node of levels[a], the
// positions of its children in levels[a-1]. A node may be a child of several
// parents but appears once per level.
struct NeighborTree {
    std::size_t schema_index = 0;
    TreeSchema schema;
    NodeId root = 0;
    std::vector<std::vector<NodeId>> levels;
    std::vector<std::vector<std::vector<std::size_t>>> children;
    Fanout fanout;

    std::size_t depth() const noexcept { return schema.depth(); }
    // Child node ids of levels[a][p].
    std::vector<NodeId> child_nodes(std::size_t a, std::size_t p) const;

    bool operator==(const NeighborTree&) const = default;
};

NeighborTree sample_tree(const HetGraph& graph, NodeId root, const TreeSchema& schema, Fanout fanout, Rng& rng,
                         std::size_t schema_index = 0);

// Indices (into `schemas`) of every schema rooted at type t, in list order.
std::vector<std::size_t> schema_set_for_type(std::span<const TreeSchema> schemas, TypeId t);

// One stage per distinct schema prefix t_0..t_a. Entries are deduplicated by
// (node, children), so a sub-tree shared between trees is computed once.
struct PlanStage {
    std::vector<TypeId> prefix_types;
    std::vector<RelationId> prefix_relations;
    std::size_t level = 0;
    std::optional<std::size_t> child_stage;  // stage holding level-1 entries
    std::vector<NodeId> nodes;
    std::vector<std::vector<std::size_t>> children;  // rows of child_stage, per entry
};

struct PlanOutput {
    NodeId root = 0;
    std::size_t schema_index = 0;
    std::size_t stage = 0;
    std::size_t row = 0;
};

// Stages are ordered bottom-up: every stage follows its child stage.
struct AggregationPlan {
    std::vector<PlanStage> stages;
    std::vector<PlanOutput> outputs;  // one per input tree, same order

    std::size_t entry_count() const;
};

AggregationPlan build_plan(std::span<const NeighborTree> trees);

nlohmann::json plan_to_json(const AggregationPlan& plan, const HetGraph& graph);

} // namespace tgnn
