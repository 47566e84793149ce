#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnn/graph.hpp"
#include "tgnn/model.hpp"
#include "tgnn/objective.hpp"
#include "tgnn/tree_sampler.hpp"

namespace tgnn {

struct TrainConfig {
    std::size_t hidden_dim = 128;       // d'
    double learning_rate = 1e-3;
    double lambda = 1e-4;
    std::size_t window = 2;
    std::size_t negatives = 3;
    MetricMode metric = MetricMode::perceptron;
    std::size_t metric_dim = 32;        // d_m
    std::size_t walks_per_node = 5;
    std::size_t walk_length = 20;
    Fanout fanout = default_fanout;     // training-time cap
    Fanout eval_fanout = std::nullopt;  // inference default: every neighbor
    std::size_t batch_size = 128;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    bool regenerate_walks = true;
    bool exclude_context_from_negatives = false;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct Model {
    ModelParams params;
    MetricParams metrics;
};

// Glorot-uniform matrices, ±0.1 uniform attention and metric vectors.
Model init_params(const HetGraph& graph, std::span<const TreeSchema> schemas, const TrainConfig& config,
                  std::uint64_t seed);

struct OptimizerState {
    std::uint64_t step = 0;
    std::map<std::string, ad::Matrix> first_moment;
    std::map<std::string, ad::Matrix> second_moment;
};

// Bias-corrected Adam update of every parameter in the stores from its grad.
// Throws NumericError (leaving parameters untouched) on non-finite gradients.
void adam_step(std::span<ParamStore* const> stores, OptimizerState& state, double lr, double beta1, double beta2,
               double eps);

// Rescales gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_gradients(std::span<ParamStore* const> stores, double max_norm);

struct LossRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double loss = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<LossRecord> log;

    std::vector<double> epoch_means() const;
};

using ProgressFn = std::function<void(const LossRecord&)>;

TrainResult train(const HetGraph& graph, std::span<const TreeSchema> schemas, const TrainConfig& config,
                  const ProgressFn& progress = {});

void write_loss_log(const std::vector<LossRecord>& log, std::ostream& out);

// Checkpoint: JSON with dims, metric mode and every parameter as
// {"shape": [rows, cols], "values": [...]} keyed by its stable name.
nlohmann::json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::json& j, const HetGraph& graph);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path, const HetGraph& graph);

// Encodes every node of the graph with the trained encoder.
EncodedBatch embed_all(const HetGraph& graph, std::span<const TreeSchema> schemas, Model& model, Fanout fanout,
                       std::uint64_t seed);

} // namespace tgnn
