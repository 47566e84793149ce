#include "tgnn/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "tgnn/error.hpp"
#include "tgnn/rng.hpp"

namespace tgnn {

namespace {

const SyntheticSpec::TypeSpec* find_type_spec(const SyntheticSpec& s, const std::string& name) {
    for (const auto& t : s.types)
        if (t.name == name) return &t;
    return nullptr;
}

} // namespace

void SyntheticSpec::validate() const {
    if (types.empty()) throw ContractError("synthetic: no node types");
    if (communities == 0) throw ContractError("synthetic: community count must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("synthetic: epsilon must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw ContractError("synthetic: sigma must be >= 0");
    if (feature_dim == 0) throw ContractError("synthetic: feature dimension must be >= 1");
    std::set<std::string> names;
    for (const auto& t : types) {
        if (!names.insert(t.name).second) throw ContractError("synthetic: duplicate type '" + t.name + "'");
        if (t.count < communities)
            throw ContractError("synthetic: type '" + t.name + "' has " + std::to_string(t.count) +
                                " nodes, fewer than the " + std::to_string(communities) + " communities");
    }
    for (const auto& r : relations) {
        const auto* from = find_type_spec(*this, r.from);
        const auto* to = find_type_spec(*this, r.to);
        if (!from || !to) throw ContractError("synthetic: relation '" + r.name + "' references an unknown type");
        if (r.branching == 0) throw ContractError("synthetic: relation '" + r.name + "' needs branching >= 1");
        // Parents available to one child: the whole type under noise, the
        // smallest community otherwise.
        std::size_t pool = to->count - (r.from == r.to ? 1 : 0);
        if (epsilon < 1.0) pool = std::min(pool, to->count / communities - (r.from == r.to ? 1 : 0));
        if (r.branching > pool)
            throw ContractError("synthetic: relation '" + r.name + "' asks each '" + r.from + "' node for " +
                                std::to_string(r.branching) + " distinct '" + r.to + "' parents but only " +
                                std::to_string(pool) + " are available");
    }
}

nlohmann::json SyntheticSpec::to_json() const {
    nlohmann::json j;
    j["types"] = nlohmann::json::array();
    for (const auto& t : types) j["types"].push_back({{"name", t.name}, {"count", t.count}});
    j["relations"] = nlohmann::json::array();
    for (const auto& r : relations) {
        nlohmann::json rj{{"name", r.name}, {"from", r.from}, {"to", r.to}, {"branching", r.branching}};
        if (!r.mirror.empty()) rj["mirror"] = r.mirror;
        j["relations"].push_back(rj);
    }
    j["schemas"] = nlohmann::json::object();
    for (const auto& [root, chains] : schemas) j["schemas"][root] = chains;
    j["communities"] = communities;
    j["epsilon"] = epsilon;
    j["feature_dim"] = feature_dim;
    j["sigma"] = sigma;
    j["seed"] = seed;
    return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"types",       "relations", "schemas", "communities",
                                             "epsilon",     "feature_dim", "sigma",  "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ParseError("synthetic spec", 0, "unknown key '" + it.key() + "'");
    SyntheticSpec s;
    try {
        for (const auto& t : j.at("types")) s.types.push_back({t.at("name").get<std::string>(), t.at("count").get<std::size_t>()});
        for (const auto& r : j.value("relations", nlohmann::json::array()))
            s.relations.push_back({r.at("name").get<std::string>(), r.at("from").get<std::string>(),
                                   r.at("to").get<std::string>(), r.value("branching", std::size_t{1}),
                                   r.value("mirror", std::string{})});
        if (j.contains("schemas"))
            for (auto it = j["schemas"].begin(); it != j["schemas"].end(); ++it)
                s.schemas.emplace_back(it.key(), it.value().get<std::vector<std::vector<std::string>>>());
        s.communities = j.value("communities", s.communities);
        s.epsilon = j.value("epsilon", s.epsilon);
        s.feature_dim = j.value("feature_dim", s.feature_dim);
        s.sigma = j.value("sigma", s.sigma);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("synthetic spec", 0, e.what());
    }
    return s;
}

SyntheticSpec SyntheticSpec::benchmark(std::uint64_t seed) {
    SyntheticSpec s;
    s.types = {{"P", 400}, {"A", 150}, {"V", 50}};
    s.relations = {{"PA", "P", "A", 2, "AP"}, {"PV", "P", "V", 1, "VP"}};
    s.schemas = {{"P", {{"A", "AP"}, {"V", "VP"}}}, {"A", {{"V", "VP", "PA"}}}, {"V", {{"A", "AP", "PV"}}}};
    s.communities = 4;
    s.epsilon = 0.05;
    s.sigma = 0.5;
    s.feature_dim = 16;
    s.seed = seed;
    return s;
}

SyntheticSpec SyntheticSpec::dblp_small(std::uint64_t seed) {
    SyntheticSpec s;
    // 20,552 papers and 19,247 authors scaled by 1/50; the 12 venues are kept
    // whole so each of the 4 areas has its 3 venues.
    s.types = {{"P", 411}, {"A", 385}, {"V", 12}, {"T", 100}};
    s.relations = {{"PA", "P", "A", 3, "AP"}, {"PT", "P", "T", 4, "TP"}, {"PV", "P", "V", 1, ""}};
    s.schemas = {{"P", {{"A", "AP"}, {"T", "TP"}}},
                 {"A", {{"T", "TP", "PA"}}},
                 {"V", {{"T", "TP", "PV"}, {"A", "AP", "PV"}}}};
    s.communities = 4;
    s.epsilon = 0.05;
    s.sigma = 0.5;
    s.feature_dim = 16;
    s.seed = seed;
    return s;
}

SyntheticGraph gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng = derive_rng(spec.seed, "synthetic");

    std::vector<std::vector<double>> centroids(spec.communities, std::vector<double>(spec.feature_dim));
    for (auto& c : centroids)
        for (double& v : c) v = gaussian(rng);

    HetGraph::Builder b;
    std::map<std::string, TypeId> type_id;
    for (const auto& t : spec.types) type_id[t.name] = b.add_type(t.name);
    std::vector<RelationId> rel_id, mirror_id;
    for (const auto& r : spec.relations) {
        rel_id.push_back(b.add_relation(r.name, type_id.at(r.from), type_id.at(r.to)));
        mirror_id.push_back(r.mirror.empty() ? RelationId(-1)
                                             : b.add_relation(r.mirror, type_id.at(r.to), type_id.at(r.from)));
    }

    SyntheticGraph out{HetGraph{}, {}, {}, {}};
    // Per type: node ids, and node ids per community.
    std::map<std::string, std::vector<NodeId>> nodes;
    std::map<std::string, std::vector<std::vector<NodeId>>> by_community;
    std::vector<std::size_t> community;
    for (const auto& t : spec.types) {
        auto& comm = by_community[t.name];
        comm.resize(spec.communities);
        for (std::size_t i = 0; i < t.count; ++i) {
            const std::size_t c = i % spec.communities;
            std::vector<double> f(spec.feature_dim);
            for (std::size_t j = 0; j < spec.feature_dim; ++j) f[j] = centroids[c][j] + spec.sigma * gaussian(rng);
            const std::string name = t.name + std::to_string(i);
            const NodeId id = b.add_node(name, type_id.at(t.name), std::move(f));
            nodes[t.name].push_back(id);
            comm[c].push_back(id);
            community.push_back(c);
            out.labels.emplace_back(name, "c" + std::to_string(c));
        }
    }

    for (std::size_t ri = 0; ri < spec.relations.size(); ++ri) {
        const auto& r = spec.relations[ri];
        const auto& all_parents = nodes.at(r.to);
        for (NodeId child : nodes.at(r.from)) {
            const auto& same = by_community.at(r.to)[community[child]];
            std::set<NodeId> chosen;
            while (chosen.size() < r.branching) {
                const bool noisy = uniform01(rng) < spec.epsilon;
                const auto& pool = noisy ? all_parents : same;
                const NodeId p = pool[uniform_index(rng, pool.size())];
                if (p == child || chosen.count(p)) continue;
                chosen.insert(p);
            }
            for (NodeId p : chosen) {
                b.add_edge(child, p, rel_id[ri]);
                if (mirror_id[ri] != RelationId(-1)) b.add_edge(p, child, mirror_id[ri]);
            }
        }
    }
    out.graph = std::move(b).build();

    nlohmann::json cfg = schema_config(out.graph, {});
    nlohmann::json by_root = nlohmann::json::object();
    for (const auto& [root, chains] : spec.schemas) by_root[root] = chains;
    cfg["schemas"] = by_root;
    out.schemas = parse_schemas(out.graph, cfg);
    const auto violations = validate_schemas(out.graph, out.schemas);
    if (!violations.empty()) throw ContractError("synthetic: invalid schemas: " + violations.front().message);
    out.schema_config = schema_config(out.graph, out.schemas);
    return out;
}

void write_synthetic(const SyntheticGraph& g, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    auto open = [&](const std::string& file) {
        std::ofstream f(dir + "/" + file, std::ios::binary);
        if (!f) throw IoError("cannot write " + dir + "/" + file);
        return f;
    };
    {
        auto f = open("nodes.tsv");
        write_nodes(g.graph, f);
    }
    {
        auto f = open("edges.tsv");
        write_edges(g.graph, f);
    }
    {
        auto f = open("labels.tsv");
        for (const auto& [n, l] : g.labels) f << n << '\t' << l << '\n';
    }
    {
        auto f = open("schemas.json");
        f << g.schema_config.dump(2) << '\n';
        if (!f) throw IoError("write failed for " + dir + "/schemas.json");
    }
}

} // namespace tgnn
