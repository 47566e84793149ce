#include "tgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "tgnn/error.hpp"

namespace tgnn {

// ---- config ---------------------------------------------------------------

void TrainConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw ContractError(std::string("config: ") + name + " must be >= 1");
    };
    positive(hidden_dim, "hidden_dim");
    positive(window, "window");
    positive(walks_per_node, "walks_per_node");
    positive(walk_length, "walk_length");
    positive(batch_size, "batch_size");
    if (metric == MetricMode::perceptron) positive(metric_dim, "metric_dim");
    if (fanout) positive(*fanout, "fanout");
    if (eval_fanout) positive(*eval_fanout, "eval_fanout");
    if (!(learning_rate > 0)) throw ContractError("config: learning_rate must be > 0");
    if (!(lambda >= 0)) throw ContractError("config: lambda must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        throw ContractError("config: adam betas must lie in [0, 1)");
    if (!(adam_eps > 0)) throw ContractError("config: adam_eps must be > 0");
    if (!(clip_norm > 0)) throw ContractError("config: clip_norm must be > 0");
}

namespace {

nlohmann::json fanout_json(Fanout f) { return f ? nlohmann::json(*f) : nlohmann::json("unlimited"); }

Fanout fanout_from(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "unlimited") return std::nullopt;
        throw ContractError("config: fanout must be a count or \"unlimited\"");
    }
    if (j.is_null()) return std::nullopt;
    return j.get<std::size_t>();
}

} // namespace

nlohmann::json TrainConfig::to_json() const {
    return {{"hidden_dim", hidden_dim},
            {"learning_rate", learning_rate},
            {"lambda", lambda},
            {"window", window},
            {"negatives", negatives},
            {"metric", to_string(metric)},
            {"metric_dim", metric_dim},
            {"walks_per_node", walks_per_node},
            {"walk_length", walk_length},
            {"fanout", fanout_json(fanout)},
            {"eval_fanout", fanout_json(eval_fanout)},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"clip_norm", clip_norm},
            {"regenerate_walks", regenerate_walks},
            {"exclude_context_from_negatives", exclude_context_from_negatives}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    static const char* known[] = {"hidden_dim", "learning_rate", "lambda",     "window",    "negatives",
                                  "metric",     "metric_dim",    "walks_per_node", "walk_length", "fanout",
                                  "eval_fanout", "batch_size",   "epochs",     "seed",      "beta1",
                                  "beta2",      "adam_eps",      "clip_norm",  "regenerate_walks",
                                  "exclude_context_from_negatives"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
            throw ContractError("config: unknown key '" + it.key() + "'");
    TrainConfig c;
    try {
        if (j.contains("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
        if (j.contains("window")) c.window = j.at("window").get<std::size_t>();
        if (j.contains("negatives")) c.negatives = j.at("negatives").get<std::size_t>();
        if (j.contains("metric")) c.metric = parse_metric_mode(j.at("metric").get<std::string>());
        if (j.contains("metric_dim")) c.metric_dim = j.at("metric_dim").get<std::size_t>();
        if (j.contains("walks_per_node")) c.walks_per_node = j.at("walks_per_node").get<std::size_t>();
        if (j.contains("walk_length")) c.walk_length = j.at("walk_length").get<std::size_t>();
        if (j.contains("fanout")) c.fanout = fanout_from(j.at("fanout"));
        if (j.contains("eval_fanout")) c.eval_fanout = fanout_from(j.at("eval_fanout"));
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
        if (j.contains("adam_eps")) c.adam_eps = j.at("adam_eps").get<double>();
        if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
        if (j.contains("regenerate_walks")) c.regenerate_walks = j.at("regenerate_walks").get<bool>();
        if (j.contains("exclude_context_from_negatives"))
            c.exclude_context_from_negatives = j.at("exclude_context_from_negatives").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---- init -----------------------------------------------------------------

Model init_params(const HetGraph& graph, std::span<const TreeSchema> schemas, const TrainConfig& config,
                  std::uint64_t seed) {
    config.validate();
    const auto violations = validate_schemas(graph, schemas);
    if (!violations.empty()) throw ContractError("init_params: " + violations.front().message);
    Model m{ModelParams::zeros(graph, {graph.feature_dim(), config.hidden_dim}),
            MetricParams::zeros(graph, config.metric, config.hidden_dim, config.metric_dim)};
    auto fill = [](ParamStore& store, Rng& rng) {
        for (ad::Parameter& p : store.items()) {
            const bool vector_param = p.name.rfind("attn.", 0) == 0 || p.name.rfind("metric.pair.", 0) == 0;
            const double bound =
                vector_param ? 0.1 : std::sqrt(6.0 / static_cast<double>(p.value.rows + p.value.cols));
            for (double& v : p.value.data) v = bound * (2.0 * uniform01(rng) - 1.0);
        }
    };
    Rng model_rng = derive_rng(seed, "init.model");
    fill(m.params.store, model_rng);
    Rng metric_rng = derive_rng(seed, "init.metric");
    fill(m.metrics.store, metric_rng);
    return m;
}

// ---- optimizer ------------------------------------------------------------

void adam_step(std::span<ParamStore* const> stores, OptimizerState& state, double lr, double beta1, double beta2,
               double eps) {
    for (ParamStore* s : stores)
        for (const ad::Parameter& p : s->items())
            for (double g : p.grad.data)
                if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + p.name);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (ParamStore* s : stores) {
        for (ad::Parameter& p : s->items()) {
            if (p.grad.size() != p.value.size()) continue;
            auto& m = state.first_moment[p.name];
            auto& v = state.second_moment[p.name];
            if (m.size() != p.value.size()) m = ad::Matrix(p.value.rows, p.value.cols);
            if (v.size() != p.value.size()) v = ad::Matrix(p.value.rows, p.value.cols);
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad.data[k];
                m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * g;
                v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * g * g;
                const double mhat = m.data[k] / c1;
                const double vhat = v.data[k] / c2;
                p.value.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
}

double clip_gradients(std::span<ParamStore* const> stores, double max_norm) {
    double sq = 0.0;
    for (ParamStore* s : stores)
        for (const ad::Parameter& p : s->items())
            for (double g : p.grad.data) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double f = max_norm / norm;
        for (ParamStore* s : stores)
            for (ad::Parameter& p : s->items())
                for (double& g : p.grad.data) g *= f;
    }
    return norm;
}

// ---- training -------------------------------------------------------------

std::vector<double> TrainResult::epoch_means() const {
    std::vector<double> sums, counts;
    for (const auto& r : log) {
        if (r.epoch >= sums.size()) {
            sums.resize(r.epoch + 1, 0.0);
            counts.resize(r.epoch + 1, 0.0);
        }
        sums[r.epoch] += r.loss;
        counts[r.epoch] += 1.0;
    }
    for (std::size_t e = 0; e < sums.size(); ++e) sums[e] = counts[e] > 0 ? sums[e] / counts[e] : 0.0;
    return sums;
}

TrainResult train(const HetGraph& graph, std::span<const TreeSchema> schemas, const TrainConfig& config,
                  const ProgressFn& progress) {
    TrainResult result{init_params(graph, schemas, config, derive_seed(config.seed, "init")), {}};
    Model& model = result.model;
    std::array<ParamStore*, 2> stores{&model.params.store, &model.metrics.store};
    OptimizerState opt;
    std::vector<std::size_t> rows(graph.node_count(), std::numeric_limits<std::size_t>::max());

    WalkCorpus corpus;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch == 0 || config.regenerate_walks) {
            const std::size_t walk_epoch = config.regenerate_walks ? epoch : 0;
            corpus = generate_walks(graph, config.walks_per_node, config.walk_length,
                                    derive_seed(config.seed, "walks", walk_epoch));
        }
        auto pairs = extract_pairs(corpus, config.window, config.negatives, derive_seed(config.seed, "pairs", epoch),
                                   config.exclude_context_from_negatives);
        Rng shuffle_rng = derive_rng(config.seed, "shuffle", epoch);
        for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[uniform_index(shuffle_rng, i)]);

        const std::size_t batches = (pairs.size() + config.batch_size - 1) / config.batch_size;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * config.batch_size;
            const std::size_t hi = std::min(pairs.size(), lo + config.batch_size);
            std::span<const TrainingPair> batch(pairs.data() + lo, hi - lo);

            std::vector<NodeId> nodes;
            for (const auto& p : batch) {
                nodes.push_back(p.center);
                nodes.push_back(p.context);
                nodes.insert(nodes.end(), p.negatives.begin(), p.negatives.end());
            }
            std::sort(nodes.begin(), nodes.end());
            nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
            for (std::size_t i = 0; i < nodes.size(); ++i) rows[nodes[i]] = i;

            ad::Tape tape;
            Encoder enc(tape, graph, model.params);
            const auto trees =
                sample_batch_trees(graph, nodes, schemas, config.fanout, derive_seed(config.seed, "trees", epoch, b));
            const auto encoded = enc.encode(nodes, schemas, trees);
            const ad::Var loss =
                total_loss(tape, graph, batch, encoded.u, rows, model.metrics, config.lambda, stores);
            const double value = loss.scalar();
            if (!std::isfinite(value))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b));
            for (ParamStore* s : stores) s->zero_grad();
            tape.backward(loss);
            clip_gradients(stores, config.clip_norm);
            try {
                adam_step(stores, opt, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b) + ")");
            }
            for (NodeId n : nodes) rows[n] = std::numeric_limits<std::size_t>::max();

            LossRecord rec{epoch, b, value};
            result.log.push_back(rec);
            if (progress) progress(rec);
        }
    }
    return result;
}

void write_loss_log(const std::vector<LossRecord>& log, std::ostream& out) {
    out << "epoch,batch,loss\n";
    for (const auto& r : log) out << r.epoch << ',' << r.batch << ',' << format_double(r.loss) << '\n';
}

// ---- checkpoints ----------------------------------------------------------

nlohmann::json checkpoint_to_json(const Model& model) {
    nlohmann::json j;
    j["format"] = "tgnn-checkpoint-1";
    j["dims"] = {{"input", model.params.dims.input}, {"hidden", model.params.dims.hidden}};
    j["metric"] = {{"mode", to_string(model.metrics.mode)}, {"dim", model.metrics.metric_dim}};
    j["types"] = model.params.type_names;
    j["relations"] = model.params.relation_names;
    nlohmann::json params = nlohmann::json::object();
    for (const ParamStore* store : {&model.params.store, &model.metrics.store})
        for (const ad::Parameter& p : store->items())
            params[p.name] = {{"shape", {p.value.rows, p.value.cols}}, {"values", p.value.data}};
    j["params"] = params;
    return j;
}

Model checkpoint_from_json(const nlohmann::json& j, const HetGraph& graph) {
    try {
        if (j.at("format").get<std::string>() != "tgnn-checkpoint-1") throw ContractError("unknown checkpoint format");
        const ModelDims dims{j.at("dims").at("input").get<std::size_t>(), j.at("dims").at("hidden").get<std::size_t>()};
        if (j.at("types").get<std::vector<std::string>>() != graph.type_names())
            throw ContractError("checkpoint types do not match the graph");
        Model m{ModelParams::zeros(graph, dims),
                MetricParams::zeros(graph, parse_metric_mode(j.at("metric").at("mode").get<std::string>()),
                                    dims.hidden, j.at("metric").at("dim").get<std::size_t>())};
        if (m.params.relation_names != j.at("relations").get<std::vector<std::string>>())
            throw ContractError("checkpoint relations do not match the graph");
        const auto& params = j.at("params");
        for (ParamStore* store : {&m.params.store, &m.metrics.store}) {
            for (ad::Parameter& p : store->items()) {
                if (!params.contains(p.name)) throw ReferenceError("checkpoint is missing parameter '" + p.name + "'");
                const auto& e = params.at(p.name);
                const auto shape = e.at("shape").get<std::vector<std::size_t>>();
                if (shape.size() != 2 || shape[0] != p.value.rows || shape[1] != p.value.cols)
                    throw DimensionError("checkpoint parameter '" + p.name + "' has the wrong shape");
                p.value.data = e.at("values").get<std::vector<double>>();
                if (p.value.data.size() != p.value.rows * p.value.cols)
                    throw DimensionError("checkpoint parameter '" + p.name + "' has the wrong value count");
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << checkpoint_to_json(model).dump() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

Model load_checkpoint(const std::string& path, const HetGraph& graph) {
    return checkpoint_from_json(read_json_file(path), graph);
}

EncodedBatch embed_all(const HetGraph& graph, std::span<const TreeSchema> schemas, Model& model, Fanout fanout,
                       std::uint64_t seed) {
    std::vector<NodeId> nodes(graph.node_count());
    for (NodeId n = 0; n < nodes.size(); ++n) nodes[n] = n;
    return encode_nodes(graph, nodes, schemas, model.params, fanout, seed);
}

} // namespace tgnn
