#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnn/autodiff.hpp"
#include "tgnn/graph.hpp"
#include "tgnn/trainer.hpp"

namespace tgnn::eval {

using ad::Matrix;

struct EvalReport {
    std::string task;  // cluster | classify | inductive-cluster | inductive-classify | link
    std::map<std::string, double> metrics;
    std::string split;
    std::uint64_t seed = 0;
    std::vector<std::string> flags;

    nlohmann::json to_json() const;
};

// ---- clustering -----------------------------------------------------------

struct KMeansResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
    // Inertia after each Lloyd iteration of the winning restart.
    std::vector<double> history;
};

// Lloyd iterations from k-means++ seeding; lowest inertia over `restarts`.
KMeansResult kmeans_cluster(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                            std::size_t max_iter = 300);

// Normalized mutual information, arithmetic-mean normalization.
double nmi(std::span<const int> pred, std::span<const int> truth);
// Adjusted Rand index.
double ari(std::span<const int> pred, std::span<const int> truth);

// ---- classification -------------------------------------------------------

// Multinomial logistic regression on standardized features, full-batch
// gradient descent with L2 on the weights.
class LogisticRegression {
public:
    LogisticRegression(std::size_t num_classes, double l2, std::size_t iterations = 500, double learning_rate = 0.5);

    void fit(const Matrix& x, std::span<const int> y);
    Matrix predict_proba(const Matrix& x) const;
    std::vector<int> predict(const Matrix& x) const;

private:
    std::size_t classes_;
    double l2_;
    std::size_t iterations_;
    double lr_;
    std::vector<double> mean_, scale_;
    Matrix weights_;  // classes × (features + 1), last column is the bias
};

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;
    std::vector<int> missing_classes;  // test classes never seen in training
};

F1Scores f1_scores(std::span<const int> pred, std::span<const int> truth);

// Trains on (train_x, train_y), reports F1 on the test set. Classes in the
// test set that training never saw score F1 = 0 and are listed.
F1Scores logistic_classify(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                           std::span<const int> test_y, double l2 = 1e-2);

inline constexpr double l2_grid[3] = {1e-4, 1e-2, 1.0};

// 50/10/40 seeded unstratified split; validation picks L2 from l2_grid.
EvalReport classify_embeddings(const Matrix& x, std::span<const int> y, std::uint64_t seed);

EvalReport cluster_embeddings(const Matrix& x, std::span<const int> y, std::uint64_t seed);

// ---- link prediction ------------------------------------------------------

// Rank-statistic AUC with midranks for ties.
double auc(std::span<const double> scores, std::span<const int> labels);

struct LinkSplit {
    std::vector<Edge> train, val, test;
};

// Link vector u_i ∘ u_j into a binary logistic classifier trained on train
// positives plus `negative_ratio`× sampled non-edges; AUC and F1 (threshold
// 0.5) on test positives plus sampled non-edges. Non-edges are drawn between
// the node types of each split's relation and avoid every edge of `graph`.
EvalReport link_predict_eval(const HetGraph& graph, const Matrix& embeddings, const LinkSplit& split,
                             std::size_t negative_ratio, std::uint64_t seed);

// Splits the edges of one relation 70/0/30 (train/val/test by fractions).
LinkSplit split_relation_edges(const HetGraph& graph, RelationId relation, double val_fraction, double test_fraction,
                               std::uint64_t seed);

// Copy of `graph` without the given edges.
HetGraph remove_edges(const HetGraph& graph, std::span<const Edge> removed);

// Holds out `fraction` of the edges of `relation` and removes them, plus any
// reverse edge between the same endpoints, from the training graph. Node ids
// are unchanged.
struct EdgeHoldout {
    HetGraph train_graph;
    std::vector<Edge> heldout;
};
EdgeHoldout hold_out_edges(const HetGraph& graph, RelationId relation, double fraction, std::uint64_t seed);

// ---- inductive ------------------------------------------------------------

// Copy of `graph` without `hidden` nodes and their incident edges. Type and
// relation ids are preserved; node ids are renumbered in order.
HetGraph remove_nodes(const HetGraph& graph, std::span<const NodeId> hidden);

struct InductiveResult {
    EvalReport cluster;
    EvalReport classify;
};

// Hides `hidden_fraction` of the labeled nodes of `root_type`, trains on the
// rest of the graph, encodes hidden nodes on the full graph, then clusters
// the hidden nodes and classifies them with a classifier fitted on visible
// ones. A zero fraction reduces to the transductive protocol.
// labels[n] < 0 marks an unlabeled node.
InductiveResult inductive_protocol(const HetGraph& graph, std::span<const TreeSchema> schemas,
                                   std::span<const int> labels, TypeId root_type, double hidden_fraction,
                                   const TrainConfig& config);

// Maps label strings to dense ids in first-appearance order; nodes without a
// label get -1.
std::vector<int> label_vector(const HetGraph& graph, const std::vector<std::pair<std::string, std::string>>& labels);

} // namespace tgnn::eval
