#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "tgnn/error.hpp"
#include "tgnn/tree_sampler.hpp"

using namespace tgnn;

namespace {

// Breadth-first expansion of the schema from the root with every neighbor
// kept; level a as a sorted set.
std::vector<std::set<NodeId>> bfs_levels(const HetGraph& g, NodeId root, const TreeSchema& s) {
    std::vector<std::set<NodeId>> levels(s.depth() + 1);
    levels[s.depth()] = {root};
    for (std::size_t a = s.depth(); a >= 1; --a)
        for (NodeId parent : levels[a])
            for (NodeId c : g.neighbors(parent, s.relations[a - 1], Direction::reverse)) levels[a - 1].insert(c);
    return levels;
}

} // namespace

TEST_SUITE("tree-sampler") {

TEST_CASE("unlimited fanout reproduces the full neighborhood") {
    auto lg = testing::academic();
    const HetGraph& g = lg.graph;
    const TreeSchema& poa = lg.schemas.at(1);  // P→A→O
    REQUIRE(poa.label(g) == "PAO");
    Rng rng(1);
    const NodeId o1 = *g.find_node("o1");
    const NeighborTree t = sample_tree(g, o1, poa, std::nullopt, rng);
    REQUIRE(t.levels.size() == 3);
    CHECK(t.levels[2] == std::vector<NodeId>{o1});
    const auto oracle = bfs_levels(g, o1, poa);
    for (std::size_t a = 0; a < 3; ++a)
        CHECK(std::set<NodeId>(t.levels[a].begin(), t.levels[a].end()) == oracle[a]);
    CHECK(t.levels[1].size() == 2);
    CHECK(t.levels[0].size() == 4);
    // p2 is shared by both authors but stored once.
    const NodeId a1 = *g.find_node("a1");
    const auto pos = std::find(t.levels[1].begin(), t.levels[1].end(), a1) - t.levels[1].begin();
    CHECK(t.child_nodes(1, pos) == std::vector<NodeId>{*g.find_node("p1"), *g.find_node("p2")});
}

TEST_CASE("root without neighbors yields empty lower levels") {
    auto lg = testing::load("o1\tO\t0\na1\tA\t0\np1\tP\t0\n", "p1\ta1\tPA\n", R"({"types":["P","A","O"],
        "relations":[{"name":"PA","from":"P","to":"A"},{"name":"AO","from":"A","to":"O"}],
        "schemas":{"O":[["P","PA","AO"]]}})");
    Rng rng(3);
    const NeighborTree t = sample_tree(lg.graph, *lg.graph.find_node("o1"), lg.schemas[0], std::nullopt, rng);
    CHECK(t.levels[1].empty());
    CHECK(t.levels[0].empty());
}

TEST_CASE("root type must match the schema") {
    auto lg = testing::academic();
    Rng rng(0);
    CHECK_THROWS_AS(sample_tree(lg.graph, *lg.graph.find_node("p1"), lg.schemas[0], std::nullopt, rng), ContractError);
}

TEST_CASE("fanout cap draws distinct children deterministically") {
    std::string nodes = "a\tA\t0\n", edges;
    for (int i = 0; i < 5; ++i) {
        nodes += "p" + std::to_string(i) + "\tP\t0\n";
        edges += "p" + std::to_string(i) + "\ta\tPA\n";
    }
    auto lg = testing::load(nodes, edges, R"({"relations":[{"name":"PA","from":"P","to":"A"}],
                                             "schemas":{"A":[["P","PA"]]}})");
    const NodeId a = *lg.graph.find_node("a");
    const auto all = lg.graph.neighbors(a, 0, Direction::reverse);
    const std::set<NodeId> universe(all.begin(), all.end());
    std::set<std::vector<NodeId>> seen;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        Rng r1(seed), r2(seed);
        const auto t1 = sample_tree(lg.graph, a, lg.schemas[0], 2, r1);
        const auto t2 = sample_tree(lg.graph, a, lg.schemas[0], 2, r2);
        CHECK(t1 == t2);
        REQUIRE(t1.levels[0].size() == 2);
        CHECK(t1.levels[0][0] != t1.levels[0][1]);
        for (NodeId c : t1.levels[0]) CHECK(universe.count(c) == 1);
        auto pair = t1.levels[0];
        std::sort(pair.begin(), pair.end());
        seen.insert(pair);
    }
    // Every 2-subset of the 5 children is reachable.
    CHECK(seen.size() == 10);
}

TEST_CASE("shared sub-trees are computed once in the plan") {
    // TP for paper p1; TPA for author a1, whose level 1 contains p1.
    auto lg = testing::load("t1\tT\t0\nt2\tT\t0\np1\tP\t0\na1\tA\t0\n", "t1\tp1\tTP\nt2\tp1\tTP\np1\ta1\tPA\n",
                            R"({"types":["T","P","A"],
                                "relations":[{"name":"TP","from":"T","to":"P"},{"name":"PA","from":"P","to":"A"}],
                                "schemas":{"P":[["T","TP"]],"A":[["T","TP","PA"]]}})");
    const HetGraph& g = lg.graph;
    const TypeId P = *g.find_type("P"), A = *g.find_type("A");
    const std::size_t tp = schema_set_for_type(lg.schemas, P).at(0);
    const std::size_t tpa = schema_set_for_type(lg.schemas, A).at(0);
    Rng rng(0);
    std::vector<NeighborTree> trees{sample_tree(g, *g.find_node("p1"), lg.schemas[tp], std::nullopt, rng, tp),
                                    sample_tree(g, *g.find_node("a1"), lg.schemas[tpa], std::nullopt, rng, tpa)};
    const AggregationPlan plan = build_plan(trees);
    std::size_t tp_stage_entries_for_p1 = 0;
    for (const auto& st : plan.stages)
        if (st.prefix_relations == std::vector<RelationId>{*g.find_relation("TP")})
            tp_stage_entries_for_p1 += std::count(st.nodes.begin(), st.nodes.end(), *g.find_node("p1"));
    CHECK(tp_stage_entries_for_p1 == 1);
    // T leaves shared too: stages are T, T→P, T→P→A.
    CHECK(plan.stages.size() == 3);
    CHECK(plan.entry_count() == 4);
    CHECK(plan.outputs[0].stage == plan.outputs[1].stage - 1);
}

TEST_CASE("single tree plan mirrors its levels bottom-up") {
    auto lg = testing::academic();
    Rng rng(0);
    const auto tree = sample_tree(lg.graph, *lg.graph.find_node("o1"), lg.schemas[1], std::nullopt, rng, 1);
    const AggregationPlan plan = build_plan(std::span<const NeighborTree>(&tree, 1));
    REQUIRE(plan.stages.size() == tree.levels.size());
    for (std::size_t a = 0; a < tree.levels.size(); ++a) {
        CHECK(plan.stages[a].level == a);
        CHECK(plan.stages[a].nodes == tree.levels[a]);
        if (a > 0) {
            CHECK(plan.stages[a].children == tree.children[a]);
            CHECK(plan.stages[a].child_stage == a - 1);
        }
    }
    CHECK(plan.outputs.at(0).stage == 2);
    CHECK(plan.outputs.at(0).row == 0);
    const auto j = plan_to_json(plan, lg.graph);
    CHECK(j.at("stages").size() == 3);
}

}
