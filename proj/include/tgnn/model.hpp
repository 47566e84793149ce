#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgnn/autodiff.hpp"
#include "tgnn/graph.hpp"
#include "tgnn/params.hpp"
#include "tgnn/tree_sampler.hpp"

namespace tgnn {

struct ModelDims {
    std::size_t input = 0;   // d, node feature dimension
    std::size_t hidden = 0;  // d', hidden and representation dimension

    bool operator==(const ModelDims&) const = default;
};

enum class GruWeight : std::size_t { A_z, B_z, A_r, B_r, A_h, B_h };

inline constexpr std::array<const char*, 6> gru_weight_names{"A_z", "B_z", "A_r", "B_r", "A_h", "B_h"};

// Encoder weights. One GRU shared by every schema, level and type; one W_r
// per relation; one projection W_t and attention vector a per node type.
//   gru.A_*   d'×d      gru.B_*   d'×d'
//   rel.R.W   d'×d'     type.T.W  d'×d      attn.T  1×2d'
class ModelParams {
public:
    // All-zero parameters shaped for the graph's types and relations.
    static ModelParams zeros(const HetGraph& graph, ModelDims dims);

    ModelDims dims;
    ParamStore store;
    std::vector<std::string> type_names;
    std::vector<std::string> relation_names;

    ad::Parameter& gru(GruWeight w);
    ad::Parameter& relation(RelationId r);
    ad::Parameter& type_projection(TypeId t);
    ad::Parameter& attention(TypeId t);
};

// Forward computations recorded on a tape. Matrices are row-batched: a batch
// of n inputs is an n×dim matrix.
class Encoder {
public:
    Encoder(ad::Tape& tape, const HetGraph& graph, ModelParams& params);

    ad::Tape& tape() noexcept { return tape_; }

    // Input features of the given nodes as a constant n×d matrix.
    ad::Var features(std::span<const NodeId> nodes);

    // z = σ(A_z x + B_z h), r = σ(A_r x + B_r h),
    // h̃ = tanh(A_h x + B_h (r∘h)), ĥ = z∘h + (1−z)∘h̃. No biases.
    ad::Var gru_cell(ad::Var x, ad::Var h);

    // Row i: W_r times the mean of the child rows in segments[i]; zero when
    // the segment is empty.
    ad::Var aggregate_relation(ad::Var child_states, std::vector<std::vector<std::size_t>> segments,
                               RelationId relation);

    // Leaf states: raw features when d = d', otherwise W_{t_0} x.
    ad::Var leaf_states(std::span<const NodeId> nodes, TypeId leaf_type);

    // Direct bottom-up recursion over one tree; returns z (1×d').
    ad::Var hierarchical_aggregate(const NeighborTree& tree);

    // Executes every stage of the plan; result[i] holds the states of
    // plan.stages[i], one row per entry.
    std::vector<ad::Var> execute_plan(const AggregationPlan& plan);

    struct Integrated {
        ad::Var u;                   // n×d'
        ad::Var alpha;               // n×(k+1), column 0 belongs to z^0
        std::vector<ad::Var> z;      // k+1 matrices n×d', z[0] = W_t x
    };

    // Attention fusion of z^0 = W_t x with the schema outputs for nodes of a
    // single type: α = softmax(LeakyReLU(aᵀ[z^0‖z^i])), u = ReLU(Σ α^i z^i).
    Integrated integrate(std::span<const NodeId> roots, TypeId root_type, std::span<const ad::Var> schema_outputs);

    struct Encoded {
        std::vector<NodeId> nodes;  // row order of u
        ad::Var u;
        struct Group {
            TypeId type;
            std::vector<std::size_t> rows;          // positions in `nodes`
            std::vector<std::size_t> schema_indices;
            Integrated integrated;
        };
        std::vector<Group> groups;
    };

    // Encodes `nodes` (duplicates are not allowed) from pre-sampled trees,
    // which must come from sample_batch_trees for the same node list.
    Encoded encode(std::span<const NodeId> nodes, std::span<const TreeSchema> schemas,
                   std::span<const NeighborTree> trees, bool use_plan = true);

private:
    ad::Tape& tape_;
    const HetGraph& graph_;
    ModelParams& params_;
};

// Trees for every (node, schema of its type), in node-major order. Each tree
// draws from its own stream derived from (seed, root, schema index).
std::vector<NeighborTree> sample_batch_trees(const HetGraph& graph, std::span<const NodeId> nodes,
                                             std::span<const TreeSchema> schemas, Fanout fanout, std::uint64_t seed);

// Plain-value result of encoding a batch.
struct EncodedBatch {
    std::vector<NodeId> nodes;
    ad::Matrix u;                              // row i belongs to nodes[i]
    std::vector<std::vector<double>> alpha;    // per node, k+1 weights
    std::vector<ad::Matrix> z;                 // per node, (k+1)×d'

    std::size_t row_of(NodeId n) const;
    std::span<const double> embedding(NodeId n) const { return u.row_span(row_of(n)); }
};

EncodedBatch encode_nodes(const HetGraph& graph, std::span<const NodeId> nodes, std::span<const TreeSchema> schemas,
                          ModelParams& params, Fanout fanout, std::uint64_t seed);

} // namespace tgnn
