#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgnn/autodiff.hpp"
#include "tgnn/graph.hpp"
#include "tgnn/model.hpp"
#include "tgnn/params.hpp"
#include "tgnn/rng.hpp"

namespace tgnn {

enum class MetricMode { dot, bilinear, perceptron };

MetricMode parse_metric_mode(const std::string& s);
std::string to_string(MetricMode m);

// Canonical unordered type pair, first <= second.
struct TypePair {
    TypeId first = 0;
    TypeId second = 0;

    static TypePair of(TypeId a, TypeId b) { return a <= b ? TypePair{a, b} : TypePair{b, a}; }
    bool same_type() const noexcept { return first == second; }
    auto operator<=>(const TypePair&) const = default;
};

// Cross-type similarity parameters; only the active mode's parameters exist.
//   bilinear:    metric.bilinear.A|B   d'×d'   (A before B in type order)
//   perceptron:  metric.type.A.M       d_m×d'
//                metric.pair.A|B.m     1×d_m
class MetricParams {
public:
    static MetricParams zeros(const HetGraph& graph, MetricMode mode, std::size_t hidden, std::size_t metric_dim);

    MetricMode mode = MetricMode::dot;
    std::size_t hidden = 0;
    std::size_t metric_dim = 0;
    std::vector<std::string> type_names;
    ParamStore store;

    ad::Parameter& bilinear(TypePair key);
    ad::Parameter& perceptron_type(TypeId t);
    ad::Parameter& perceptron_pair(TypePair key);
    std::string pair_name(TypePair key) const;
};

// Row-batched similarity s(u_i, u_j) for rows of `left` (type ti) against
// rows of `right` (type tj). Same type → dot product; otherwise per mode.
ad::Var similarity(ad::Tape& tape, MetricParams& metrics, ad::Var left, ad::Var right, TypeId ti, TypeId tj);

double similarity(std::span<const double> ui, std::span<const double> uj, TypeId ti, TypeId tj, MetricParams& metrics);

// Union of forward and reverse adjacency over every relation (CSR).
class MergedAdjacency {
public:
    explicit MergedAdjacency(const HetGraph& graph);
    std::span<const NodeId> operator()(NodeId n) const {
        return {targets_.data() + offsets_[n], offsets_[n + 1] - offsets_[n]};
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> targets_;
};

// Draws nodes of one type with probability ∝ f^{3/4}.
class NegativeSampler {
public:
    NegativeSampler() = default;
    NegativeSampler(const HetGraph& graph, std::span<const std::uint64_t> node_freq);

    NodeId sample(TypeId t, Rng& rng) const;
    // Analytic probability of drawing n among nodes of its type.
    double probability(NodeId n) const;
    const std::vector<NodeId>& candidates(TypeId t) const { return nodes_.at(t); }
    const std::vector<double>& cumulative(TypeId t) const { return cumulative_.at(t); }

private:
    std::vector<std::vector<NodeId>> nodes_;        // per type, nodes with f > 0
    std::vector<std::vector<double>> cumulative_;   // per type, running f^{3/4}
    std::vector<double> weight_;                    // per node f^{3/4}
    std::vector<TypeId> type_of_;
};

struct WalkCorpus {
    std::vector<std::vector<NodeId>> paths;
    std::vector<std::uint64_t> node_freq;  // indexed by node id
    std::vector<TypeId> node_type;
    NegativeSampler sampler;

    std::uint64_t token_count() const;
};

// walks_per_node uniform walks from every node over the merged adjacency;
// a walk stops early at a node without neighbors.
WalkCorpus generate_walks(const HetGraph& graph, std::size_t walks_per_node, std::size_t walk_length,
                          std::uint64_t seed);

void write_corpus(const WalkCorpus& corpus, std::ostream& out);

struct TrainingPair {
    NodeId center = 0;
    NodeId context = 0;
    TypePair key;
    std::vector<NodeId> negatives;

    bool operator==(const TrainingPair&) const = default;
};

// Skip-gram pairs within ±window of each position, skipping self pairs, with
// negatives drawn i.i.d. from the context type's f^{3/4} table.
std::vector<TrainingPair> extract_pairs(const WalkCorpus& corpus, std::size_t window, std::size_t negatives,
                                        std::uint64_t seed, bool exclude_context = false);

// −[log σ(s_pos) + Σ log σ(−s_neg)], summed over rows.
ad::Var pair_loss(ad::Var positive_scores, ad::Var negative_scores);

double pair_loss(std::span<const double> u_center, std::span<const double> u_context,
                 std::span<const std::vector<double>> u_negatives, TypeId center_type, TypeId context_type,
                 MetricParams& metrics);

// Exact softmax over every node of the context's type; `embeddings` row n
// holds u for node n.
double context_probability_reference(const HetGraph& graph, NodeId center, NodeId context,
                                     const ad::Matrix& embeddings, MetricParams& metrics);

// Mean pair loss over the batch plus λ Σ‖θ‖² over `regularized`.
// `rows` maps node id → row of `u` (SIZE_MAX for absent nodes).
ad::Var total_loss(ad::Tape& tape, const HetGraph& graph, std::span<const TrainingPair> pairs, ad::Var u,
                   std::span<const std::size_t> rows, MetricParams& metrics, double lambda,
                   std::span<ParamStore* const> regularized);

} // namespace tgnn
