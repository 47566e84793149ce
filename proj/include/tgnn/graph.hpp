#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace tgnn {

using NodeId = std::uint32_t;
using TypeId = std::uint32_t;
using RelationId = std::uint32_t;

enum class Direction { forward, reverse };

struct RelationInfo {
    std::string name;
    TypeId source = 0;
    TypeId target = 0;

    bool operator==(const RelationInfo&) const = default;
};

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    RelationId relation = 0;

    bool operator==(const Edge&) const = default;
};

// Typed nodes with features and per-relation adjacency in both directions.
// Immutable once built; adjacency lists are sorted and duplicate-free.
class HetGraph {
public:
    class Builder;

    std::size_t node_count() const noexcept { return node_type_.size(); }
    std::size_t type_count() const noexcept { return type_names_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }
    std::size_t feature_dim() const noexcept { return feature_dim_; }

    TypeId type_of(NodeId n) const;
    std::span<const double> features(NodeId n) const;
    const std::string& node_name(NodeId n) const;
    const std::string& type_name(TypeId t) const;
    const std::vector<std::string>& type_names() const noexcept { return type_names_; }
    const RelationInfo& relation(RelationId r) const;
    const std::vector<RelationInfo>& relations() const noexcept { return relations_; }

    std::optional<NodeId> find_node(const std::string& name) const;
    std::optional<TypeId> find_type(const std::string& name) const;
    std::optional<RelationId> find_relation(const std::string& name) const;

    // Forward: targets of edges leaving `node`; reverse: sources of edges
    // entering it.
    std::span<const NodeId> neighbors(NodeId node, RelationId relation, Direction direction) const;
    // Union over all relations and both directions, sorted and unique.
    std::vector<NodeId> all_neighbors(NodeId node) const;
    std::vector<NodeId> nodes_of_type(TypeId t) const;
    // Edges ordered by (relation, src, dst).
    std::vector<Edge> edges() const;

    bool operator==(const HetGraph&) const = default;

private:
    struct Csr {
        std::vector<std::size_t> offsets;
        std::vector<NodeId> targets;

        bool operator==(const Csr&) const = default;
    };

    void check_node(NodeId n) const;

    std::vector<std::string> type_names_;
    std::vector<RelationInfo> relations_;
    std::vector<std::string> node_names_;
    std::vector<TypeId> node_type_;
    std::size_t feature_dim_ = 0;
    std::vector<double> features_;
    std::vector<Csr> forward_;
    std::vector<Csr> reverse_;
};

class HetGraph::Builder {
public:
    TypeId add_type(const std::string& name);
    RelationId add_relation(const std::string& name, TypeId source, TypeId target);
    NodeId add_node(const std::string& name, TypeId type, std::vector<double> features);
    // Rejects self-loops, parallel edges and endpoint-type mismatches.
    void add_edge(NodeId src, NodeId dst, RelationId relation);

    std::optional<TypeId> find_type(const std::string& name) const;
    std::optional<RelationId> find_relation(const std::string& name) const;
    std::optional<NodeId> find_node(const std::string& name) const;
    std::size_t node_count() const noexcept { return g_.node_type_.size(); }

    HetGraph build() &&;

private:
    HetGraph g_;
    std::map<std::string, NodeId> node_index_;
    std::vector<std::vector<std::pair<NodeId, NodeId>>> edges_;
    std::set<std::tuple<RelationId, NodeId, NodeId>> edge_keys_;
    bool have_dim_ = false;
};

// Chain t_0 -r_1-> t_1 ... -r_m-> t_m; the tree root has type t_m.
struct TreeSchema {
    std::vector<TypeId> types;          // m + 1 entries
    std::vector<RelationId> relations;  // m entries, relations[a-1] links level a-1 to a

    TypeId root_type() const { return types.back(); }
    std::size_t depth() const noexcept { return relations.size(); }
    std::string label(const HetGraph& g) const;

    bool operator==(const TreeSchema&) const = default;
};

struct SchemaViolation {
    enum class Kind { type_mismatch, subsequence, malformed };
    Kind kind;
    std::size_t schema;         // index into the validated list
    std::size_t other = 0;      // the longer schema, for subsequence violations
    std::string message;
};

std::vector<SchemaViolation> validate_schemas(const HetGraph& graph, std::span<const TreeSchema> schemas);

struct LoadedGraph {
    HetGraph graph;
    std::vector<TreeSchema> schemas;
};

LoadedGraph load_graph(std::istream& nodes, std::istream& edges, const nlohmann::json& schema_config,
                       const std::string& nodes_name = "nodes", const std::string& edges_name = "edges");
LoadedGraph load_graph(const std::string& nodes_path, const std::string& edges_path,
                       const std::string& schema_path);

// Parses the "schemas" object of a config against an existing graph.
std::vector<TreeSchema> parse_schemas(const HetGraph& graph, const nlohmann::json& schema_config);

void write_nodes(const HetGraph& graph, std::ostream& out);
void write_edges(const HetGraph& graph, std::ostream& out);
nlohmann::json schema_config(const HetGraph& graph, std::span<const TreeSchema> schemas);

// node name → label string, in file order.
std::vector<std::pair<std::string, std::string>> load_labels(std::istream& in, const std::string& name = "labels");
std::vector<std::pair<std::string, std::string>> load_labels(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
std::string format_double(double v);

} // namespace tgnn
