#include "tgnn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "tgnn/error.hpp"

namespace tgnn {

MetricMode parse_metric_mode(const std::string& s) {
    if (s == "dot") return MetricMode::dot;
    if (s == "bilinear") return MetricMode::bilinear;
    if (s == "perceptron") return MetricMode::perceptron;
    throw ContractError("unknown metric mode '" + s + "' (expected dot, bilinear or perceptron)");
}

std::string to_string(MetricMode m) {
    switch (m) {
    case MetricMode::dot: return "dot";
    case MetricMode::bilinear: return "bilinear";
    case MetricMode::perceptron: return "perceptron";
    }
    return "?";
}

// ---- MetricParams ---------------------------------------------------------

MetricParams MetricParams::zeros(const HetGraph& graph, MetricMode mode, std::size_t hidden, std::size_t metric_dim) {
    MetricParams m;
    m.mode = mode;
    m.hidden = hidden;
    m.metric_dim = metric_dim;
    m.type_names = graph.type_names();
    const auto n = static_cast<TypeId>(m.type_names.size());
    if (mode == MetricMode::bilinear) {
        for (TypeId a = 0; a < n; ++a)
            for (TypeId b = a + 1; b < n; ++b)
                m.store.add("metric.bilinear." + m.pair_name({a, b}), ad::Matrix(hidden, hidden));
    } else if (mode == MetricMode::perceptron) {
        if (metric_dim == 0) throw ContractError("perceptron metric needs a positive metric dimension");
        for (TypeId t = 0; t < n; ++t)
            m.store.add("metric.type." + m.type_names[t] + ".M", ad::Matrix(metric_dim, hidden));
        for (TypeId a = 0; a < n; ++a)
            for (TypeId b = a + 1; b < n; ++b)
                m.store.add("metric.pair." + m.pair_name({a, b}) + ".m", ad::Matrix(1, metric_dim));
    }
    return m;
}

std::string MetricParams::pair_name(TypePair key) const {
    if (key.first >= type_names.size() || key.second >= type_names.size())
        throw ReferenceError("unknown type in pair key");
    return type_names[key.first] + "|" + type_names[key.second];
}

ad::Parameter& MetricParams::bilinear(TypePair key) {
    const std::string name = "metric.bilinear." + pair_name(key);
    if (!store.contains(name)) throw ReferenceError("no bilinear metric for type pair " + pair_name(key));
    return store.at(name);
}

ad::Parameter& MetricParams::perceptron_type(TypeId t) {
    if (t >= type_names.size()) throw ReferenceError("unknown type id " + std::to_string(t));
    const std::string name = "metric.type." + type_names[t] + ".M";
    if (!store.contains(name)) throw ReferenceError("no perceptron projection for type " + type_names[t]);
    return store.at(name);
}

ad::Parameter& MetricParams::perceptron_pair(TypePair key) {
    const std::string name = "metric.pair." + pair_name(key) + ".m";
    if (!store.contains(name)) throw ReferenceError("no perceptron metric for type pair " + pair_name(key));
    return store.at(name);
}

ad::Var similarity(ad::Tape& tape, MetricParams& metrics, ad::Var left, ad::Var right, TypeId ti, TypeId tj) {
    if (ti == tj || metrics.mode == MetricMode::dot) return ad::rowdot(left, right);
    const TypePair key = TypePair::of(ti, tj);
    if (metrics.mode == MetricMode::bilinear) {
        const ad::Var m = tape.param(metrics.bilinear(key));
        // Arguments in canonical type order: u_aᵀ M u_b with type(a) < type(b).
        if (ti < tj) return ad::rowdot(ad::matmul(left, m), right);
        return ad::rowdot(ad::matmul(right, m), left);
    }
    const ad::Var hidden = ad::tanh(ad::add(ad::linear(left, tape.param(metrics.perceptron_type(ti))),
                                            ad::linear(right, tape.param(metrics.perceptron_type(tj)))));
    return ad::linear(hidden, tape.param(metrics.perceptron_pair(key)));
}

double similarity(std::span<const double> ui, std::span<const double> uj, TypeId ti, TypeId tj, MetricParams& metrics) {
    ad::Tape tape;
    const ad::Var l = tape.constant(ad::Matrix::row({ui.begin(), ui.end()}));
    const ad::Var r = tape.constant(ad::Matrix::row({uj.begin(), uj.end()}));
    const double s = similarity(tape, metrics, l, r, ti, tj).scalar();
    if (!std::isfinite(s)) throw NumericError("similarity is not finite");
    return s;
}

// ---- walks ----------------------------------------------------------------

MergedAdjacency::MergedAdjacency(const HetGraph& graph) {
    const std::size_t n = graph.node_count();
    offsets_.assign(n + 1, 0);
    for (NodeId v = 0; v < n; ++v) {
        const auto nb = graph.all_neighbors(v);
        offsets_[v + 1] = offsets_[v] + nb.size();
        targets_.insert(targets_.end(), nb.begin(), nb.end());
    }
}

NegativeSampler::NegativeSampler(const HetGraph& graph, std::span<const std::uint64_t> node_freq) {
    if (node_freq.size() != graph.node_count())
        throw DimensionError("negative sampler: frequency table size does not match node count");
    nodes_.assign(graph.type_count(), {});
    cumulative_.assign(graph.type_count(), {});
    weight_.assign(graph.node_count(), 0.0);
    type_of_.resize(graph.node_count());
    for (NodeId v = 0; v < graph.node_count(); ++v) {
        const TypeId t = graph.type_of(v);
        type_of_[v] = t;
        if (node_freq[v] == 0) continue;
        weight_[v] = std::pow(static_cast<double>(node_freq[v]), 0.75);
        const double prev = cumulative_[t].empty() ? 0.0 : cumulative_[t].back();
        nodes_[t].push_back(v);
        cumulative_[t].push_back(prev + weight_[v]);
    }
}

NodeId NegativeSampler::sample(TypeId t, Rng& rng) const {
    if (t >= cumulative_.size() || cumulative_[t].empty())
        throw ContractError("negative sampler: no candidates of type " + std::to_string(t));
    const auto& cum = cumulative_[t];
    const double x = uniform01(rng) * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), x);
    if (it == cum.end()) --it;
    return nodes_[t][static_cast<std::size_t>(it - cum.begin())];
}

double NegativeSampler::probability(NodeId n) const {
    const TypeId t = type_of_.at(n);
    if (cumulative_[t].empty()) return 0.0;
    return weight_[n] / cumulative_[t].back();
}

std::uint64_t WalkCorpus::token_count() const {
    std::uint64_t n = 0;
    for (const auto& p : paths) n += p.size();
    return n;
}

WalkCorpus generate_walks(const HetGraph& graph, std::size_t walks_per_node, std::size_t walk_length,
                          std::uint64_t seed) {
    if (walk_length == 0) throw ContractError("generate_walks: walk_length must be >= 1");
    const MergedAdjacency adj(graph);
    WalkCorpus corpus;
    corpus.node_freq.assign(graph.node_count(), 0);
    corpus.node_type.resize(graph.node_count());
    for (NodeId v = 0; v < graph.node_count(); ++v) corpus.node_type[v] = graph.type_of(v);
    corpus.paths.reserve(graph.node_count() * walks_per_node);
    for (std::size_t w = 0; w < walks_per_node; ++w) {
        for (NodeId start = 0; start < graph.node_count(); ++start) {
            Rng rng = derive_rng(seed, "walk", start, w);
            std::vector<NodeId> path{start};
            path.reserve(walk_length);
            while (path.size() < walk_length) {
                const auto nb = adj(path.back());
                if (nb.empty()) break;
                path.push_back(nb[uniform_index(rng, nb.size())]);
            }
            for (NodeId v : path) ++corpus.node_freq[v];
            corpus.paths.push_back(std::move(path));
        }
    }
    corpus.sampler = NegativeSampler(graph, corpus.node_freq);
    return corpus;
}

void write_corpus(const WalkCorpus& corpus, std::ostream& out) {
    for (const auto& p : corpus.paths) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) out << ' ';
            out << p[i];
        }
        out << '\n';
    }
}

std::vector<TrainingPair> extract_pairs(const WalkCorpus& corpus, std::size_t window, std::size_t negatives,
                                        std::uint64_t seed, bool exclude_context) {
    if (window == 0) throw ContractError("extract_pairs: window must be >= 1");
    Rng rng = derive_rng(seed, "negatives");
    std::vector<TrainingPair> out;
    for (const auto& path : corpus.paths) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            const std::size_t lo = i >= window ? i - window : 0;
            const std::size_t hi = std::min(path.size() - 1, i + window);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j == i || path[j] == path[i]) continue;
                TrainingPair p;
                p.center = path[i];
                p.context = path[j];
                const TypeId ct = corpus.node_type[p.context];
                p.key = TypePair::of(corpus.node_type[p.center], ct);
                p.negatives.reserve(negatives);
                while (p.negatives.size() < negatives) {
                    const NodeId n = corpus.sampler.sample(ct, rng);
                    if (exclude_context && n == p.context) {
                        if (corpus.sampler.candidates(ct).size() == 1)
                            throw ContractError("extract_pairs: cannot exclude the only candidate of its type");
                        continue;
                    }
                    p.negatives.push_back(n);
                }
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

// ---- losses ---------------------------------------------------------------

ad::Var pair_loss(ad::Var positive_scores, ad::Var negative_scores) {
    const ad::Var pos = ad::sum(ad::log_sigmoid(positive_scores));
    if (negative_scores.rows() == 0) return ad::neg(pos);
    const ad::Var negs = ad::sum(ad::log_sigmoid(ad::neg(negative_scores)));
    return ad::neg(ad::add(pos, negs));
}

double pair_loss(std::span<const double> u_center, std::span<const double> u_context,
                 std::span<const std::vector<double>> u_negatives, TypeId center_type, TypeId context_type,
                 MetricParams& metrics) {
    ad::Tape tape;
    const ad::Var c = tape.constant(ad::Matrix::row({u_center.begin(), u_center.end()}));
    const ad::Var x = tape.constant(ad::Matrix::row({u_context.begin(), u_context.end()}));
    const ad::Var pos = similarity(tape, metrics, c, x, center_type, context_type);
    ad::Var negs = tape.constant(ad::Matrix(0, 1));
    if (!u_negatives.empty()) {
        ad::Matrix centers(u_negatives.size(), u_center.size());
        ad::Matrix others(u_negatives.size(), u_center.size());
        for (std::size_t k = 0; k < u_negatives.size(); ++k) {
            std::copy(u_center.begin(), u_center.end(), centers.row_span(k).begin());
            if (u_negatives[k].size() != u_center.size()) throw ShapeError("pair_loss: negative has wrong length");
            std::copy(u_negatives[k].begin(), u_negatives[k].end(), others.row_span(k).begin());
        }
        negs = similarity(tape, metrics, tape.constant(std::move(centers)), tape.constant(std::move(others)),
                          center_type, context_type);
    }
    for (double s : pos.value().data)
        if (!std::isfinite(s)) throw NumericError("pair_loss: non-finite similarity");
    for (double s : negs.value().data)
        if (!std::isfinite(s)) throw NumericError("pair_loss: non-finite similarity");
    return pair_loss(pos, negs).scalar();
}

double context_probability_reference(const HetGraph& graph, NodeId center, NodeId context,
                                     const ad::Matrix& embeddings, MetricParams& metrics) {
    const TypeId ti = graph.type_of(center);
    const TypeId tc = graph.type_of(context);
    const auto candidates = graph.nodes_of_type(tc);
    std::vector<double> scores;
    double target = 0.0;
    for (NodeId j : candidates) {
        const double s = similarity(embeddings.row_span(center), embeddings.row_span(j), ti, tc, metrics);
        if (j == context) target = s;
        scores.push_back(s);
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    return std::exp(target - mx) / z;
}

ad::Var total_loss(ad::Tape& tape, const HetGraph& graph, std::span<const TrainingPair> pairs, ad::Var u,
                   std::span<const std::size_t> rows, MetricParams& metrics, double lambda,
                   std::span<ParamStore* const> regularized) {
    auto row = [&](NodeId n) {
        if (n >= rows.size() || rows[n] == std::numeric_limits<std::size_t>::max())
            throw ReferenceError("total_loss: no embedding for node " + std::to_string(n));
        return rows[n];
    };
    // Group by (center type, context type); all terms in a group share one metric.
    std::map<std::pair<TypeId, TypeId>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        groups[{graph.type_of(pairs[i].center), graph.type_of(pairs[i].context)}].push_back(i);

    std::vector<ad::Var> terms;
    for (const auto& [types, members] : groups) {
        std::vector<std::size_t> ci, xi, nci, ni;
        for (std::size_t idx : members) {
            const TrainingPair& p = pairs[idx];
            ci.push_back(row(p.center));
            xi.push_back(row(p.context));
            for (NodeId n : p.negatives) {
                if (graph.type_of(n) != types.second)
                    throw ContractError("total_loss: negative " + std::to_string(n) + " does not share the context type");
                nci.push_back(row(p.center));
                ni.push_back(row(n));
            }
        }
        const ad::Var pos = similarity(tape, metrics, ad::gather_rows(u, ci), ad::gather_rows(u, xi), types.first,
                                       types.second);
        ad::Var neg = tape.constant(ad::Matrix(0, 1));
        if (!ni.empty())
            neg = similarity(tape, metrics, ad::gather_rows(u, nci), ad::gather_rows(u, ni), types.first, types.second);
        terms.push_back(pair_loss(pos, neg));
    }

    ad::Var loss = tape.constant(ad::Matrix(1, 1));
    if (!terms.empty()) {
        ad::Var acc = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
        loss = ad::scale(acc, 1.0 / static_cast<double>(pairs.size()));
    }
    if (lambda != 0.0) {
        for (ParamStore* store : regularized) {
            for (ad::Parameter& p : store->items()) {
                const ad::Var v = tape.param(p);
                loss = ad::add(loss, ad::scale(ad::sum(ad::mul(v, v)), lambda));
            }
        }
    }
    return loss;
}

} // namespace tgnn
