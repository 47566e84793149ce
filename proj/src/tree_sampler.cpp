#include "tgnn/tree_sampler.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "tgnn/error.hpp"

namespace tgnn {

std::vector<NodeId> NeighborTree::child_nodes(std::size_t a, std::size_t p) const {
    std::vector<NodeId> out;
    for (std::size_t c : children.at(a).at(p)) out.push_back(levels[a - 1][c]);
    return out;
}

NeighborTree sample_tree(const HetGraph& graph, NodeId root, const TreeSchema& schema, Fanout fanout, Rng& rng,
                         std::size_t schema_index) {
    if (graph.type_of(root) != schema.root_type())
        throw ContractError("sample_tree: root " + graph.node_name(root) + " has type " +
                            graph.type_name(graph.type_of(root)) + " but schema " + schema.label(graph) +
                            " is rooted at " + graph.type_name(schema.root_type()));
    const std::size_t m = schema.depth();
    NeighborTree tree;
    tree.schema_index = schema_index;
    tree.schema = schema;
    tree.root = root;
    tree.fanout = fanout;
    tree.levels.assign(m + 1, {});
    tree.children.assign(m + 1, {});
    tree.levels[m] = {root};

    std::vector<NodeId> pool;
    for (std::size_t a = m; a >= 1; --a) {
        const RelationId rel = schema.relations[a - 1];
        std::unordered_map<NodeId, std::size_t> position;
        auto& below = tree.levels[a - 1];
        tree.children[a].resize(tree.levels[a].size());
        for (std::size_t p = 0; p < tree.levels[a].size(); ++p) {
            // Children are the sources of r_a edges entering the parent.
            const auto nb = graph.neighbors(tree.levels[a][p], rel, Direction::reverse);
            pool.assign(nb.begin(), nb.end());
            if (fanout && pool.size() > *fanout) {
                // Partial Fisher-Yates: uniform sample without replacement.
                for (std::size_t i = 0; i < *fanout; ++i) {
                    const std::size_t j = i + uniform_index(rng, pool.size() - i);
                    std::swap(pool[i], pool[j]);
                }
                pool.resize(*fanout);
                std::sort(pool.begin(), pool.end());
            }
            auto& kids = tree.children[a][p];
            kids.reserve(pool.size());
            for (NodeId c : pool) {
                auto [it, fresh] = position.try_emplace(c, below.size());
                if (fresh) below.push_back(c);
                kids.push_back(it->second);
            }
        }
    }
    return tree;
}

std::vector<std::size_t> schema_set_for_type(std::span<const TreeSchema> schemas, TypeId t) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < schemas.size(); ++i)
        if (schemas[i].root_type() == t) out.push_back(i);
    return out;
}

std::size_t AggregationPlan::entry_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.nodes.size();
    return n;
}

namespace {

struct PrefixKey {
    std::vector<TypeId> types;
    std::vector<RelationId> relations;
    auto operator<=>(const PrefixKey&) const = default;
};

struct EntryKey {
    NodeId node;
    std::vector<std::size_t> children;
    auto operator<=>(const EntryKey&) const = default;
};

} // namespace

AggregationPlan build_plan(std::span<const NeighborTree> trees) {
    struct Building {
        PlanStage stage;
        std::map<EntryKey, std::size_t> rows;
    };
    std::vector<Building> building;
    std::map<PrefixKey, std::size_t> stage_of;
    AggregationPlan plan;

    auto stage_for = [&](const TreeSchema& s, std::size_t level) {
        PrefixKey key{{s.types.begin(), s.types.begin() + static_cast<std::ptrdiff_t>(level) + 1},
                      {s.relations.begin(), s.relations.begin() + static_cast<std::ptrdiff_t>(level)}};
        auto [it, fresh] = stage_of.try_emplace(key, building.size());
        if (fresh) {
            Building b;
            b.stage.prefix_types = key.types;
            b.stage.prefix_relations = key.relations;
            b.stage.level = level;
            building.push_back(std::move(b));
        }
        return it->second;
    };

    for (const NeighborTree& tree : trees) {
        std::vector<std::size_t> prev_rows;
        std::optional<std::size_t> prev_stage;
        std::size_t s = 0;
        for (std::size_t a = 0; a <= tree.depth(); ++a) {
            s = stage_for(tree.schema, a);
            if (a > 0) building[s].stage.child_stage = prev_stage;
            std::vector<std::size_t> rows(tree.levels[a].size());
            for (std::size_t p = 0; p < tree.levels[a].size(); ++p) {
                EntryKey key{tree.levels[a][p], {}};
                if (a > 0)
                    for (std::size_t c : tree.children[a][p]) key.children.push_back(prev_rows[c]);
                auto& b = building[s];
                auto [it, fresh] = b.rows.try_emplace(key, b.stage.nodes.size());
                if (fresh) {
                    b.stage.nodes.push_back(key.node);
                    b.stage.children.push_back(key.children);
                }
                rows[p] = it->second;
            }
            prev_rows = std::move(rows);
            prev_stage = s;
        }
        plan.outputs.push_back({tree.root, tree.schema_index, s, prev_rows.at(0)});
    }

    // Bottom-up order: stable by level, then remap stage references.
    std::vector<std::size_t> order(building.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return building[x].stage.level < building[y].stage.level; });
    std::vector<std::size_t> new_index(building.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_index[order[i]] = i;
    for (std::size_t i : order) {
        PlanStage st = std::move(building[i].stage);
        if (st.child_stage) st.child_stage = new_index[*st.child_stage];
        plan.stages.push_back(std::move(st));
    }
    for (auto& o : plan.outputs) o.stage = new_index[o.stage];
    return plan;
}

nlohmann::json plan_to_json(const AggregationPlan& plan, const HetGraph& graph) {
    nlohmann::json out;
    out["stages"] = nlohmann::json::array();
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
        const PlanStage& s = plan.stages[i];
        TreeSchema prefix{s.prefix_types, s.prefix_relations};
        nlohmann::json js;
        js["index"] = i;
        js["prefix"] = prefix.label(graph);
        js["level"] = s.level;
        js["relation"] = s.level > 0 ? graph.relation(s.prefix_relations.back()).name : "";
        js["child_stage"] = s.child_stage ? nlohmann::json(*s.child_stage) : nlohmann::json(nullptr);
        js["entries"] = nlohmann::json::array();
        for (std::size_t r = 0; r < s.nodes.size(); ++r)
            js["entries"].push_back({{"node", graph.node_name(s.nodes[r])}, {"children", s.children[r]}});
        out["stages"].push_back(js);
    }
    out["outputs"] = nlohmann::json::array();
    for (const auto& o : plan.outputs)
        out["outputs"].push_back(
            {{"root", graph.node_name(o.root)}, {"schema", o.schema_index}, {"stage", o.stage}, {"row", o.row}});
    return out;
}

} // namespace tgnn
