#include "tgnn/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tgnn/error.hpp"

namespace tgnn {

// ---- HetGraph -------------------------------------------------------------

void HetGraph::check_node(NodeId n) const {
    if (n >= node_type_.size()) throw ReferenceError("unknown node id " + std::to_string(n));
}

TypeId HetGraph::type_of(NodeId n) const {
    check_node(n);
    return node_type_[n];
}

std::span<const double> HetGraph::features(NodeId n) const {
    check_node(n);
    return {features_.data() + static_cast<std::size_t>(n) * feature_dim_, feature_dim_};
}

const std::string& HetGraph::node_name(NodeId n) const {
    check_node(n);
    return node_names_[n];
}

const std::string& HetGraph::type_name(TypeId t) const {
    if (t >= type_names_.size()) throw ReferenceError("unknown type id " + std::to_string(t));
    return type_names_[t];
}

const RelationInfo& HetGraph::relation(RelationId r) const {
    if (r >= relations_.size()) throw ReferenceError("unknown relation id " + std::to_string(r));
    return relations_[r];
}

std::optional<NodeId> HetGraph::find_node(const std::string& name) const {
    // Node names are not indexed after build; linear scan is fine for the
    // lookups the CLI does.
    auto it = std::find(node_names_.begin(), node_names_.end(), name);
    if (it == node_names_.end()) return std::nullopt;
    return static_cast<NodeId>(it - node_names_.begin());
}

std::optional<TypeId> HetGraph::find_type(const std::string& name) const {
    auto it = std::find(type_names_.begin(), type_names_.end(), name);
    if (it == type_names_.end()) return std::nullopt;
    return static_cast<TypeId>(it - type_names_.begin());
}

std::optional<RelationId> HetGraph::find_relation(const std::string& name) const {
    for (std::size_t r = 0; r < relations_.size(); ++r)
        if (relations_[r].name == name) return static_cast<RelationId>(r);
    return std::nullopt;
}

std::span<const NodeId> HetGraph::neighbors(NodeId node, RelationId relation, Direction direction) const {
    check_node(node);
    if (relation >= relations_.size()) throw ReferenceError("unknown relation id " + std::to_string(relation));
    const Csr& csr = direction == Direction::forward ? forward_[relation] : reverse_[relation];
    return {csr.targets.data() + csr.offsets[node], csr.offsets[node + 1] - csr.offsets[node]};
}

std::vector<NodeId> HetGraph::all_neighbors(NodeId node) const {
    std::vector<NodeId> out;
    for (RelationId r = 0; r < relations_.size(); ++r) {
        for (Direction d : {Direction::forward, Direction::reverse}) {
            auto nb = neighbors(node, r, d);
            out.insert(out.end(), nb.begin(), nb.end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeId> HetGraph::nodes_of_type(TypeId t) const {
    std::vector<NodeId> out;
    for (NodeId n = 0; n < node_type_.size(); ++n)
        if (node_type_[n] == t) out.push_back(n);
    return out;
}

std::vector<Edge> HetGraph::edges() const {
    std::vector<Edge> out;
    for (RelationId r = 0; r < relations_.size(); ++r) {
        const Csr& csr = forward_[r];
        for (NodeId s = 0; s < node_type_.size(); ++s)
            for (std::size_t k = csr.offsets[s]; k < csr.offsets[s + 1]; ++k) out.push_back({s, csr.targets[k], r});
    }
    return out;
}

// ---- Builder --------------------------------------------------------------

TypeId HetGraph::Builder::add_type(const std::string& name) {
    if (auto t = find_type(name)) return *t;
    g_.type_names_.push_back(name);
    return static_cast<TypeId>(g_.type_names_.size() - 1);
}

RelationId HetGraph::Builder::add_relation(const std::string& name, TypeId source, TypeId target) {
    if (find_relation(name)) throw ContractError("relation '" + name + "' declared twice");
    if (source >= g_.type_names_.size() || target >= g_.type_names_.size())
        throw ReferenceError("relation '" + name + "' references an unknown type");
    g_.relations_.push_back({name, source, target});
    edges_.emplace_back();
    return static_cast<RelationId>(g_.relations_.size() - 1);
}

NodeId HetGraph::Builder::add_node(const std::string& name, TypeId type, std::vector<double> features) {
    if (type >= g_.type_names_.size()) throw ReferenceError("node '" + name + "' has unknown type");
    if (node_index_.count(name)) throw ContractError("duplicate node id '" + name + "'");
    if (!have_dim_) {
        g_.feature_dim_ = features.size();
        have_dim_ = true;
    } else if (features.size() != g_.feature_dim_) {
        throw DimensionError("node '" + name + "' has " + std::to_string(features.size()) +
                             " features, expected " + std::to_string(g_.feature_dim_));
    }
    const auto id = static_cast<NodeId>(g_.node_type_.size());
    g_.node_names_.push_back(name);
    g_.node_type_.push_back(type);
    g_.features_.insert(g_.features_.end(), features.begin(), features.end());
    node_index_.emplace(name, id);
    return id;
}

void HetGraph::Builder::add_edge(NodeId src, NodeId dst, RelationId relation) {
    const std::size_t n = g_.node_type_.size();
    if (src >= n || dst >= n) throw ReferenceError("edge endpoint out of range");
    if (relation >= g_.relations_.size()) throw ReferenceError("unknown relation id " + std::to_string(relation));
    const RelationInfo& rel = g_.relations_[relation];
    if (src == dst)
        throw ContractError("self-loop on '" + g_.node_names_[src] + "' under relation " + rel.name +
                            " (self-loops are not supported)");
    if (g_.node_type_[src] != rel.source || g_.node_type_[dst] != rel.target)
        throw ContractError("edge " + g_.node_names_[src] + "->" + g_.node_names_[dst] + " has types " +
                            g_.type_names_[g_.node_type_[src]] + "->" + g_.type_names_[g_.node_type_[dst]] +
                            " but relation " + rel.name + " is " + g_.type_names_[rel.source] + "->" +
                            g_.type_names_[rel.target]);
    if (!edge_keys_.emplace(relation, src, dst).second)
        throw ContractError("parallel edge " + g_.node_names_[src] + "->" + g_.node_names_[dst] + " under relation " +
                            rel.name + " (parallel edges are not supported)");
    edges_[relation].emplace_back(src, dst);
}

std::optional<TypeId> HetGraph::Builder::find_type(const std::string& name) const { return g_.find_type(name); }

std::optional<RelationId> HetGraph::Builder::find_relation(const std::string& name) const {
    return g_.find_relation(name);
}

std::optional<NodeId> HetGraph::Builder::find_node(const std::string& name) const {
    auto it = node_index_.find(name);
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
}

HetGraph HetGraph::Builder::build() && {
    const std::size_t n = g_.node_type_.size();
    auto make_csr = [n](std::vector<std::pair<NodeId, NodeId>>& pairs) {
        std::sort(pairs.begin(), pairs.end());
        Csr csr;
        csr.offsets.assign(n + 1, 0);
        for (auto [s, d] : pairs) ++csr.offsets[s + 1];
        for (std::size_t i = 0; i < n; ++i) csr.offsets[i + 1] += csr.offsets[i];
        csr.targets.reserve(pairs.size());
        for (auto [s, d] : pairs) csr.targets.push_back(d);
        return csr;
    };
    for (std::size_t r = 0; r < edges_.size(); ++r) {
        auto& fwd = edges_[r];
        std::sort(fwd.begin(), fwd.end());
        if (auto dup = std::adjacent_find(fwd.begin(), fwd.end()); dup != fwd.end())
            throw ContractError("parallel edge " + g_.node_names_[dup->first] + "->" + g_.node_names_[dup->second] +
                                " under relation " + g_.relations_[r].name + " (parallel edges are not supported)");
        std::vector<std::pair<NodeId, NodeId>> rev;
        rev.reserve(fwd.size());
        for (auto [s, d] : fwd) rev.emplace_back(d, s);
        g_.forward_.push_back(make_csr(fwd));
        g_.reverse_.push_back(make_csr(rev));
    }
    return std::move(g_);
}

// ---- schemas --------------------------------------------------------------

std::string TreeSchema::label(const HetGraph& g) const {
    bool short_names = std::all_of(types.begin(), types.end(), [&](TypeId t) { return g.type_name(t).size() == 1; });
    std::string out;
    for (std::size_t i = 0; i < types.size(); ++i) {
        if (!short_names && i > 0) out += '-';
        out += g.type_name(types[i]);
    }
    return out;
}

namespace {

// Token sequence t_0, r_1, t_1, ..., r_m, t_m with relations offset so the
// two id spaces cannot collide.
std::vector<std::uint64_t> tokens(const TreeSchema& s) {
    std::vector<std::uint64_t> out;
    out.push_back(s.types.front());
    for (std::size_t a = 0; a < s.relations.size(); ++a) {
        out.push_back((std::uint64_t{1} << 32) | s.relations[a]);
        out.push_back(s.types[a + 1]);
    }
    return out;
}

bool is_suffix(const std::vector<std::uint64_t>& shorter, const std::vector<std::uint64_t>& longer) {
    if (shorter.size() > longer.size()) return false;
    return std::equal(shorter.rbegin(), shorter.rend(), longer.rbegin());
}

} // namespace

std::vector<SchemaViolation> validate_schemas(const HetGraph& graph, std::span<const TreeSchema> schemas) {
    std::vector<SchemaViolation> out;
    std::vector<bool> well_formed(schemas.size(), true);
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        const TreeSchema& s = schemas[i];
        if (s.relations.empty() || s.types.size() != s.relations.size() + 1) {
            out.push_back({SchemaViolation::Kind::malformed, i, 0,
                           "schema " + std::to_string(i) + " must have depth >= 1 and one more type than relations"});
            well_formed[i] = false;
            continue;
        }
        for (TypeId t : s.types) {
            if (t >= graph.type_count()) {
                out.push_back({SchemaViolation::Kind::malformed, i, 0,
                               "schema " + std::to_string(i) + " references unknown type id " + std::to_string(t)});
                well_formed[i] = false;
            }
        }
        for (RelationId r : s.relations) {
            if (r >= graph.relation_count()) {
                out.push_back({SchemaViolation::Kind::malformed, i, 0,
                               "schema " + std::to_string(i) + " references unknown relation id " + std::to_string(r)});
                well_formed[i] = false;
            }
        }
        if (!well_formed[i]) continue;
        for (std::size_t a = 1; a <= s.depth(); ++a) {
            const RelationInfo& rel = graph.relation(s.relations[a - 1]);
            if (rel.source != s.types[a - 1] || rel.target != s.types[a]) {
                out.push_back({SchemaViolation::Kind::type_mismatch, i, 0,
                               "schema " + s.label(graph) + ": relation " + rel.name + " is " +
                                   graph.type_name(rel.source) + "->" + graph.type_name(rel.target) +
                                   " but is used at " + graph.type_name(s.types[a - 1]) + "->" +
                                   graph.type_name(s.types[a])});
            }
        }
    }
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        if (!well_formed[i]) continue;
        const auto ti = tokens(schemas[i]);
        for (std::size_t j = 0; j < schemas.size(); ++j) {
            if (i == j || !well_formed[j] || schemas[i].root_type() != schemas[j].root_type()) continue;
            const auto tj = tokens(schemas[j]);
            // Identical chains are reported once, on the later index.
            if (ti == tj && i < j) continue;
            if (is_suffix(ti, tj)) {
                out.push_back({SchemaViolation::Kind::subsequence, i, j,
                               "schema " + schemas[i].label(graph) + " is a suffix-aligned subsequence of " +
                                   schemas[j].label(graph)});
            }
        }
    }
    return out;
}

std::vector<TreeSchema> parse_schemas(const HetGraph& graph, const nlohmann::json& config) {
    std::vector<TreeSchema> out;
    if (!config.contains("schemas")) return out;
    const auto& schemas = config.at("schemas");
    if (!schemas.is_object()) throw ParseError("schemas", 0, "\"schemas\" must be an object keyed by root type");
    for (auto it = schemas.begin(); it != schemas.end(); ++it) {
        const std::string& root_name = it.key();
        const auto root = graph.find_type(root_name);
        if (!root) throw ReferenceError("schema root type '" + root_name + "' is not declared");
        for (const auto& chain : it.value()) {
            if (!chain.is_array() || chain.size() < 2)
                throw ParseError("schemas", 0, "schema for '" + root_name + "' must list t_0 followed by relations");
            TreeSchema s;
            const std::string first = chain[0].get<std::string>();
            const auto t0 = graph.find_type(first);
            if (!t0) throw ReferenceError("schema for '" + root_name + "' starts with unknown type '" + first + "'");
            s.types.push_back(*t0);
            // Accepts both [t_0, r_1, ..., r_m] and the fully alternating
            // [t_0, r_1, t_1, ..., r_m, t_m]; a type token must name the
            // target of the preceding relation.
            for (std::size_t k = 1; k < chain.size(); ++k) {
                const std::string tok = chain[k].get<std::string>();
                if (auto r = graph.find_relation(tok)) {
                    s.relations.push_back(*r);
                    s.types.push_back(graph.relation(*r).target);
                } else if (auto t = graph.find_type(tok)) {
                    if (s.relations.empty() || s.types.back() != *t)
                        throw ReferenceError("schema token '" + tok + "' for root '" + root_name +
                                             "' does not follow a relation into that type");
                } else {
                    throw ReferenceError("schema for '" + root_name + "' references unknown relation '" + tok + "'");
                }
            }
            if (s.relations.empty())
                throw ParseError("schemas", 0, "schema for '" + root_name + "' has no relations");
            if (s.root_type() != *root)
                throw ReferenceError("schema " + s.label(graph) + " listed under '" + root_name + "' ends at type '" +
                                     graph.type_name(s.root_type()) + "'");
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---- loading --------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

double parse_double(const std::string& tok, const std::string& source, std::size_t line_no) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || tok.empty())
        throw ParseError(source, line_no, "invalid number '" + tok + "'");
    if (!std::isfinite(v)) throw ParseError(source, line_no, "non-finite feature '" + tok + "'");
    return v;
}

} // namespace

LoadedGraph load_graph(std::istream& nodes, std::istream& edges, const nlohmann::json& config,
                       const std::string& nodes_name, const std::string& edges_name) {
    HetGraph::Builder b;
    if (config.contains("types"))
        for (const auto& t : config.at("types")) b.add_type(t.get<std::string>());
    if (config.contains("relations")) {
        for (const auto& r : config.at("relations")) {
            const auto name = r.at("name").get<std::string>();
            const TypeId from = b.add_type(r.at("from").get<std::string>());
            const TypeId to = b.add_type(r.at("to").get<std::string>());
            b.add_relation(name, from, to);
        }
    }

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(nodes, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 3) throw ParseError(nodes_name, line_no, "expected 3 tab-separated columns");
        const auto type = b.find_type(cols[1]);
        if (!type) throw ReferenceError(nodes_name + ":" + std::to_string(line_no) + ": unknown type '" + cols[1] + "'");
        std::vector<double> feats;
        if (!cols[2].empty())
            for (const auto& tok : split(cols[2], ',')) feats.push_back(parse_double(tok, nodes_name, line_no));
        try {
            b.add_node(cols[0], *type, std::move(feats));
        } catch (const DimensionError& e) {
            throw DimensionError(nodes_name + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ContractError& e) {
            throw ParseError(nodes_name, line_no, e.what());
        }
    }

    line_no = 0;
    while (std::getline(edges, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 3) throw ParseError(edges_name, line_no, "expected 3 tab-separated columns");
        const auto src = b.find_node(cols[0]);
        if (!src) throw ReferenceError(edges_name + ":" + std::to_string(line_no) + ": unknown node id '" + cols[0] + "'");
        const auto dst = b.find_node(cols[1]);
        if (!dst) throw ReferenceError(edges_name + ":" + std::to_string(line_no) + ": unknown node id '" + cols[1] + "'");
        const auto rel = b.find_relation(cols[2]);
        if (!rel) throw ReferenceError(edges_name + ":" + std::to_string(line_no) + ": unknown relation '" + cols[2] + "'");
        try {
            b.add_edge(*src, *dst, *rel);
        } catch (const ContractError& e) {
            throw ParseError(edges_name, line_no, e.what());
        }
    }

    LoadedGraph out{std::move(b).build(), {}};
    out.schemas = parse_schemas(out.graph, config);
    const auto violations = validate_schemas(out.graph, out.schemas);
    if (!violations.empty()) {
        std::string msg = "invalid schemas:";
        for (const auto& v : violations) msg += "\n  " + v.message;
        throw ContractError(msg);
    }
    return out;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
}

LoadedGraph load_graph(const std::string& nodes_path, const std::string& edges_path, const std::string& schema_path) {
    std::ifstream nodes(nodes_path);
    if (!nodes) throw IoError("cannot open " + nodes_path);
    std::ifstream edges(edges_path);
    if (!edges) throw IoError("cannot open " + edges_path);
    return load_graph(nodes, edges, read_json_file(schema_path), nodes_path, edges_path);
}

// ---- writing --------------------------------------------------------------

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_nodes(const HetGraph& graph, std::ostream& out) {
    for (NodeId n = 0; n < graph.node_count(); ++n) {
        out << graph.node_name(n) << '\t' << graph.type_name(graph.type_of(n)) << '\t';
        const auto f = graph.features(n);
        for (std::size_t j = 0; j < f.size(); ++j) {
            if (j) out << ',';
            out << format_double(f[j]);
        }
        out << '\n';
    }
}

void write_edges(const HetGraph& graph, std::ostream& out) {
    for (const Edge& e : graph.edges())
        out << graph.node_name(e.src) << '\t' << graph.node_name(e.dst) << '\t' << graph.relation(e.relation).name << '\n';
}

nlohmann::json schema_config(const HetGraph& graph, std::span<const TreeSchema> schemas) {
    nlohmann::json cfg;
    cfg["types"] = graph.type_names();
    cfg["relations"] = nlohmann::json::array();
    for (const auto& r : graph.relations())
        cfg["relations"].push_back({{"name", r.name}, {"from", graph.type_name(r.source)}, {"to", graph.type_name(r.target)}});
    nlohmann::json by_root = nlohmann::json::object();
    for (const auto& s : schemas) {
        nlohmann::json chain = nlohmann::json::array();
        chain.push_back(graph.type_name(s.types.front()));
        for (RelationId r : s.relations) chain.push_back(graph.relation(r).name);
        by_root[graph.type_name(s.root_type())].push_back(chain);
    }
    cfg["schemas"] = by_root;
    return cfg;
}

std::vector<std::pair<std::string, std::string>> load_labels(std::istream& in, const std::string& name) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto cols = split(line, '\t');
        if (cols.size() != 2) throw ParseError(name, line_no, "expected node_id<TAB>label");
        out.emplace_back(cols[0], cols[1]);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return load_labels(in, path);
}

} // namespace tgnn
