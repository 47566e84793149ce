#include "tgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tgnn/error.hpp"
#include "tgnn/objective.hpp"
#include "tgnn/rng.hpp"

namespace tgnn::eval {

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["task"] = task;
    j["metrics"] = metrics;
    j["split"] = split;
    j["seed"] = seed;
    j["flags"] = flags;
    return j;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

Matrix select_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), x.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(x.row_span(idx[i]).begin(), x.cols, out.row_span(i).begin());
    return out;
}

std::vector<int> select(std::span<const int> y, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(y[i]);
    return out;
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

struct Contingency {
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    double n = 0;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw ContractError("clustering metrics need equal-length label vectors");
    if (pred.empty()) throw ContractError("clustering metrics need at least one label");
    Contingency c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        c.cells[{pred[i], truth[i]}] += 1.0;
        c.rows[pred[i]] += 1.0;
        c.cols[truth[i]] += 1.0;
    }
    c.n = static_cast<double>(pred.size());
    return c;
}

} // namespace

// ---- clustering -----------------------------------------------------------

KMeansResult kmeans_cluster(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                            std::size_t max_iter) {
    const std::size_t n = points.rows;
    if (k == 0) throw ContractError("kmeans: k must be >= 1");
    if (k > n) throw ContractError("kmeans: k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t run = 0; run < std::max<std::size_t>(restarts, 1); ++run) {
        Rng rng = derive_rng(seed, "kmeans", run);
        Matrix centers(k, points.cols);
        // k-means++ seeding.
        std::vector<double> d2(n, std::numeric_limits<double>::infinity());
        std::size_t pick = uniform_index(rng, n);
        for (std::size_t c = 0; c < k; ++c) {
            std::copy_n(points.row_span(pick).begin(), points.cols, centers.row_span(c).begin());
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d2[i] = std::min(d2[i], squared_distance(points.row_span(i), centers.row_span(c)));
                total += d2[i];
            }
            if (c + 1 == k) break;
            if (total <= 0.0) {
                pick = uniform_index(rng, n);
                continue;
            }
            double x = uniform01(rng) * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                x -= d2[i];
                if (x < 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        std::vector<int> labels(n, -1);
        std::vector<double> history;
        double inertia = 0.0;
        for (std::size_t it = 0; it < max_iter; ++it) {
            bool changed = false;
            inertia = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                int arg = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    const double d = squared_distance(points.row_span(i), centers.row_span(c));
                    if (d < bd) {
                        bd = d;
                        arg = static_cast<int>(c);
                    }
                }
                if (labels[i] != arg) changed = true;
                labels[i] = arg;
                inertia += bd;
            }
            history.push_back(inertia);
            if (!changed) break;
            Matrix sums(k, points.cols);
            std::vector<double> counts(k, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                auto row = sums.row_span(static_cast<std::size_t>(labels[i]));
                auto p = points.row_span(i);
                for (std::size_t j = 0; j < points.cols; ++j) row[j] += p[j];
                counts[static_cast<std::size_t>(labels[i])] += 1.0;
            }
            // Empty clusters keep their previous center.
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0.0) continue;
                for (std::size_t j = 0; j < points.cols; ++j) centers(c, j) = sums(c, j) / counts[c];
            }
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = labels;
            best.centers = centers;
            best.history = history;
        }
    }
    return best;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    auto entropy = [&](const std::map<int, double>& m) {
        double h = 0.0;
        for (const auto& [k, v] : m) h -= (v / c.n) * std::log(v / c.n);
        return h;
    };
    const double hp = entropy(c.rows);
    const double ht = entropy(c.cols);
    if (hp == 0.0 && ht == 0.0) return 1.0;
    double mi = 0.0;
    for (const auto& [key, v] : c.cells)
        mi += (v / c.n) * std::log(c.n * v / (c.rows.at(key.first) * c.cols.at(key.second)));
    const double denom = 0.5 * (hp + ht);
    return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    double index = 0.0, a = 0.0, b = 0.0;
    for (const auto& [key, v] : c.cells) index += comb2(v);
    for (const auto& [key, v] : c.rows) a += comb2(v);
    for (const auto& [key, v] : c.cols) b += comb2(v);
    const double total = comb2(c.n);
    const double expected = total > 0 ? a * b / total : 0.0;
    const double max_index = 0.5 * (a + b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

EvalReport cluster_embeddings(const Matrix& x, std::span<const int> y, std::uint64_t seed) {
    const std::set<int> classes(y.begin(), y.end());
    const KMeansResult km = kmeans_cluster(x, classes.size(), seed);
    EvalReport r;
    r.task = "cluster";
    r.seed = seed;
    r.split = "all " + std::to_string(x.rows) + " nodes, k=" + std::to_string(classes.size());
    r.metrics["nmi"] = nmi(km.labels, y);
    r.metrics["ari"] = ari(km.labels, y);
    r.metrics["inertia"] = km.inertia;
    return r;
}

// ---- classification -------------------------------------------------------

LogisticRegression::LogisticRegression(std::size_t num_classes, double l2, std::size_t iterations, double learning_rate)
    : classes_(num_classes), l2_(l2), iterations_(iterations), lr_(learning_rate) {}

void LogisticRegression::fit(const Matrix& x, std::span<const int> y) {
    const std::size_t n = x.rows, d = x.cols;
    if (n == 0) throw ContractError("logistic regression: empty training set");
    mean_.assign(d, 0.0);
    scale_.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean_[j] += x(i, j) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) scale_[j] += (x(i, j) - mean_[j]) * (x(i, j) - mean_[j]) / static_cast<double>(n);
    for (double& s : scale_) s = s > 1e-24 ? std::sqrt(s) : 1.0;

    Matrix xs(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) xs(i, j) = (x(i, j) - mean_[j]) / scale_[j];
        xs(i, d) = 1.0;
    }
    weights_ = Matrix(classes_, d + 1);
    Matrix grad(classes_, d + 1);
    std::vector<double> p(classes_);
    for (std::size_t it = 0; it < iterations_; ++it) {
        std::fill(grad.data.begin(), grad.data.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < classes_; ++c) {
                double s = 0.0;
                for (std::size_t j = 0; j <= d; ++j) s += weights_(c, j) * xs(i, j);
                p[c] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (double& v : p) z += (v = std::exp(v - mx));
            for (std::size_t c = 0; c < classes_; ++c) {
                const double err = p[c] / z - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
                for (std::size_t j = 0; j <= d; ++j) grad(c, j) += err * xs(i, j);
            }
        }
        for (std::size_t c = 0; c < classes_; ++c) {
            for (std::size_t j = 0; j <= d; ++j) {
                double g = grad(c, j) / static_cast<double>(n);
                if (j < d) g += l2_ * weights_(c, j);
                weights_(c, j) -= lr_ * g;
            }
        }
    }
}

Matrix LogisticRegression::predict_proba(const Matrix& x) const {
    const std::size_t d = mean_.size();
    if (x.cols != d) throw ShapeError("logistic regression: feature count mismatch");
    Matrix out(x.rows, classes_);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes_; ++c) {
            double s = weights_(c, d);
            for (std::size_t j = 0; j < d; ++j) s += weights_(c, j) * (x(i, j) - mean_[j]) / scale_[j];
            out(i, c) = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t c = 0; c < classes_; ++c) z += (out(i, c) = std::exp(out(i, c) - mx));
        for (std::size_t c = 0; c < classes_; ++c) out(i, c) /= z;
    }
    return out;
}

std::vector<int> LogisticRegression::predict(const Matrix& x) const {
    const Matrix p = predict_proba(x);
    std::vector<int> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto row = p.row_span(i);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

F1Scores f1_scores(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw ContractError("f1: length mismatch");
    if (pred.empty()) throw ContractError("f1: empty input");
    std::set<int> classes(truth.begin(), truth.end());
    classes.insert(pred.begin(), pred.end());
    double tp_all = 0.0, macro = 0.0;
    for (int c : classes) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == c && truth[i] == c) ++tp;
            else if (pred[i] == c) ++fp;
            else if (truth[i] == c) ++fn;
        }
        tp_all += tp;
        macro += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    F1Scores f;
    // Single-label multi-class: micro precision = micro recall = accuracy.
    f.micro = tp_all / static_cast<double>(pred.size());
    f.macro = macro / static_cast<double>(classes.size());
    return f;
}

F1Scores logistic_classify(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                           std::span<const int> test_y, double l2) {
    const std::set<int> train_classes(train_y.begin(), train_y.end());
    if (train_classes.size() < 2) throw ContractError("logistic_classify: training set needs at least two classes");
    if (*train_classes.begin() < 0) throw ContractError("logistic_classify: labels must be non-negative");
    int max_label = *train_classes.rbegin();
    for (int v : test_y) max_label = std::max(max_label, v);
    LogisticRegression lr(static_cast<std::size_t>(max_label) + 1, l2);
    lr.fit(train_x, train_y);
    const auto pred = lr.predict(test_x);
    F1Scores f = f1_scores(pred, test_y);
    for (int c : std::set<int>(test_y.begin(), test_y.end()))
        if (!train_classes.count(c)) f.missing_classes.push_back(c);
    return f;
}

EvalReport classify_embeddings(const Matrix& x, std::span<const int> y, std::uint64_t seed) {
    if (x.rows != y.size()) throw ContractError("classify: embeddings and labels differ in length");
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = derive_rng(seed, "classify.split");
    shuffle(idx, rng);
    const auto n_train = static_cast<std::size_t>(std::lround(0.5 * static_cast<double>(idx.size())));
    const auto n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(idx.size())));
    std::span<const std::size_t> all(idx);
    const auto tr = all.subspan(0, n_train);
    const auto va = all.subspan(n_train, n_val);
    const auto te = all.subspan(n_train + n_val);
    const Matrix xtr = select_rows(x, tr);
    const auto ytr = select(y, tr);

    double best_l2 = l2_grid[1];
    if (!va.empty()) {
        double best = -1.0;
        for (double l2 : l2_grid) {
            const double f = logistic_classify(xtr, ytr, select_rows(x, va), select(y, va), l2).micro;
            if (f > best) {
                best = f;
                best_l2 = l2;
            }
        }
    }
    const F1Scores f = logistic_classify(xtr, ytr, select_rows(x, te), select(y, te), best_l2);
    EvalReport r;
    r.task = "classify";
    r.seed = seed;
    r.split = "train " + std::to_string(tr.size()) + " / val " + std::to_string(va.size()) + " / test " +
              std::to_string(te.size()) + " (unstratified)";
    r.metrics["micro_f1"] = f.micro;
    r.metrics["macro_f1"] = f.macro;
    r.metrics["l2"] = best_l2;
    for (int c : f.missing_classes) r.flags.push_back("class " + std::to_string(c) + " absent from training split");
    return r;
}

// ---- link prediction ------------------------------------------------------

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ContractError("auc: length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos = 0, neg = 0, rank_sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++pos;
            rank_sum += rank[i];
        } else {
            ++neg;
        }
    }
    if (pos == 0 || neg == 0) throw ContractError("auc: need both positive and negative examples");
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

LinkSplit split_relation_edges(const HetGraph& graph, RelationId relation, double val_fraction, double test_fraction,
                               std::uint64_t seed) {
    std::vector<Edge> edges;
    for (const Edge& e : graph.edges())
        if (e.relation == relation) edges.push_back(e);
    Rng rng = derive_rng(seed, "link.split");
    shuffle(edges, rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(edges.size())));
    const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(edges.size())));
    LinkSplit s;
    s.test.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.val.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
                 edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    s.train.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), edges.end());
    return s;
}

namespace {

struct LinkData {
    Matrix x;
    std::vector<int> y;
};

LinkData link_examples(const HetGraph& graph, const MergedAdjacency& adj, const Matrix& emb, std::span<const Edge> pos,
                       std::size_t ratio, Rng& rng, std::set<std::pair<NodeId, NodeId>>& used) {
    LinkData d;
    d.x = Matrix(pos.size() * (1 + ratio), emb.cols);
    std::size_t row = 0;
    auto put = [&](NodeId a, NodeId b, int label) {
        if (a >= emb.rows || b >= emb.rows) throw ReferenceError("link_predict_eval: endpoint lacks an embedding");
        auto out = d.x.row_span(row++);
        for (std::size_t j = 0; j < emb.cols; ++j) out[j] = emb(a, j) * emb(b, j);
        d.y.push_back(label);
    };
    std::map<TypeId, std::vector<NodeId>> by_type;
    for (const Edge& e : pos) {
        put(e.src, e.dst, 1);
        const RelationInfo& rel = graph.relation(e.relation);
        auto& srcs = by_type[rel.source];
        auto& dsts = by_type[rel.target];
        if (srcs.empty()) srcs = graph.nodes_of_type(rel.source);
        if (dsts.empty()) dsts = graph.nodes_of_type(rel.target);
        const double capacity = static_cast<double>(srcs.size()) * static_cast<double>(dsts.size());
        for (std::size_t k = 0; k < ratio; ++k) {
            for (std::size_t attempt = 0;; ++attempt) {
                if (attempt > 1000 + 10 * capacity)
                    throw ContractError("link_predict_eval: cannot find enough non-edges");
                const NodeId a = srcs[uniform_index(rng, srcs.size())];
                const NodeId b = dsts[uniform_index(rng, dsts.size())];
                if (a == b) continue;
                const auto nb = adj(a);
                if (std::binary_search(nb.begin(), nb.end(), b)) continue;
                if (!used.insert({std::min(a, b), std::max(a, b)}).second) continue;
                put(a, b, 0);
                break;
            }
        }
    }
    return d;
}

double binary_f1(std::span<const double> scores, std::span<const int> labels) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool p = scores[i] >= 0.5;
        if (p && labels[i] == 1) ++tp;
        else if (p) ++fp;
        else if (labels[i] == 1) ++fn;
    }
    return tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
}

std::vector<double> positive_scores(const LogisticRegression& lr, const Matrix& x) {
    const Matrix p = lr.predict_proba(x);
    std::vector<double> s(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) s[i] = p(i, 1);
    return s;
}

} // namespace

EvalReport link_predict_eval(const HetGraph& graph, const Matrix& embeddings, const LinkSplit& split,
                             std::size_t negative_ratio, std::uint64_t seed) {
    if (split.train.empty() || split.test.empty()) throw ContractError("link_predict_eval: empty train or test split");
    const MergedAdjacency adj(graph);
    Rng rng = derive_rng(seed, "link.negatives");
    std::set<std::pair<NodeId, NodeId>> used;
    const LinkData tr = link_examples(graph, adj, embeddings, split.train, negative_ratio, rng, used);
    const LinkData te = link_examples(graph, adj, embeddings, split.test, negative_ratio, rng, used);
    double l2 = l2_grid[1];
    if (!split.val.empty()) {
        const LinkData va = link_examples(graph, adj, embeddings, split.val, negative_ratio, rng, used);
        double best = -1.0;
        for (double cand : l2_grid) {
            LogisticRegression lr(2, cand);
            lr.fit(tr.x, tr.y);
            const double a = auc(positive_scores(lr, va.x), va.y);
            if (a > best) {
                best = a;
                l2 = cand;
            }
        }
    }
    LogisticRegression lr(2, l2);
    lr.fit(tr.x, tr.y);
    const auto scores = positive_scores(lr, te.x);
    EvalReport r;
    r.task = "link";
    r.seed = seed;
    r.split = "train " + std::to_string(split.train.size()) + " / val " + std::to_string(split.val.size()) +
              " / test " + std::to_string(split.test.size()) + " positives, " + std::to_string(negative_ratio) +
              "x negatives";
    r.metrics["auc"] = auc(scores, te.y);
    r.metrics["f1"] = binary_f1(scores, te.y);
    r.metrics["l2"] = l2;
    return r;
}

// ---- graph surgery --------------------------------------------------------

namespace {

HetGraph rebuild(const HetGraph& graph, const std::vector<bool>& keep_node, const std::set<std::tuple<NodeId, NodeId, RelationId>>& drop_edges) {
    HetGraph::Builder b;
    for (const auto& t : graph.type_names()) b.add_type(t);
    for (const auto& r : graph.relations()) b.add_relation(r.name, r.source, r.target);
    std::vector<NodeId> new_id(graph.node_count(), 0);
    for (NodeId n = 0; n < graph.node_count(); ++n) {
        if (!keep_node[n]) continue;
        const auto f = graph.features(n);
        new_id[n] = b.add_node(graph.node_name(n), graph.type_of(n), {f.begin(), f.end()});
    }
    for (const Edge& e : graph.edges()) {
        if (!keep_node[e.src] || !keep_node[e.dst]) continue;
        if (drop_edges.count({e.src, e.dst, e.relation})) continue;
        b.add_edge(new_id[e.src], new_id[e.dst], e.relation);
    }
    return std::move(b).build();
}

} // namespace

HetGraph remove_edges(const HetGraph& graph, std::span<const Edge> removed) {
    std::set<std::tuple<NodeId, NodeId, RelationId>> drop;
    for (const Edge& e : removed) drop.insert({e.src, e.dst, e.relation});
    return rebuild(graph, std::vector<bool>(graph.node_count(), true), drop);
}

HetGraph remove_nodes(const HetGraph& graph, std::span<const NodeId> hidden) {
    std::vector<bool> keep(graph.node_count(), true);
    for (NodeId n : hidden) keep.at(n) = false;
    return rebuild(graph, keep, {});
}

EdgeHoldout hold_out_edges(const HetGraph& graph, RelationId relation, double fraction, std::uint64_t seed) {
    const LinkSplit split = split_relation_edges(graph, relation, 0.0, fraction, seed);
    std::set<std::pair<NodeId, NodeId>> held;
    for (const Edge& e : split.test) held.insert({e.dst, e.src});
    std::vector<Edge> drop = split.test;
    for (const Edge& e : graph.edges())
        if (held.count({e.src, e.dst})) drop.push_back(e);
    return {remove_edges(graph, drop), split.test};
}

// ---- inductive ------------------------------------------------------------

namespace {

Matrix rows_for(const EncodedBatch& enc, std::span<const NodeId> nodes) {
    Matrix out(nodes.size(), enc.u.cols);
    std::map<NodeId, std::size_t> where;
    for (std::size_t i = 0; i < enc.nodes.size(); ++i) where[enc.nodes[i]] = i;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto src = enc.u.row_span(where.at(nodes[i]));
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

} // namespace

InductiveResult inductive_protocol(const HetGraph& graph, std::span<const TreeSchema> schemas,
                                   std::span<const int> labels, TypeId root_type, double hidden_fraction,
                                   const TrainConfig& config) {
    if (hidden_fraction < 0.0 || hidden_fraction >= 1.0)
        throw ContractError("inductive_protocol: hidden fraction must lie in [0, 1)");
    if (labels.size() != graph.node_count()) throw ContractError("inductive_protocol: one label per node required");
    std::vector<NodeId> labeled;
    for (NodeId n : graph.nodes_of_type(root_type))
        if (labels[n] >= 0) labeled.push_back(n);
    if (labeled.empty()) throw ContractError("inductive_protocol: no labeled nodes of the root type");

    Rng rng = derive_rng(config.seed, "inductive.hide");
    std::vector<NodeId> order = labeled;
    shuffle(order, rng);
    const auto n_hidden = static_cast<std::size_t>(std::lround(hidden_fraction * static_cast<double>(order.size())));
    std::vector<NodeId> hidden(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hidden));
    std::vector<NodeId> visible(order.begin() + static_cast<std::ptrdiff_t>(n_hidden), order.end());
    std::sort(hidden.begin(), hidden.end());
    std::sort(visible.begin(), visible.end());
    const std::uint64_t eval_seed = derive_seed(config.seed, "inductive.eval");

    InductiveResult out;
    if (hidden.empty()) {
        TrainResult trained = train(graph, schemas, config);
        const EncodedBatch enc = encode_nodes(graph, labeled, schemas, trained.model.params, config.eval_fanout,
                                              derive_seed(config.seed, "embed"));
        const Matrix x = rows_for(enc, labeled);
        std::vector<int> y;
        for (NodeId n : labeled) y.push_back(labels[n]);
        out.cluster = cluster_embeddings(x, y, eval_seed);
        out.classify = classify_embeddings(x, y, eval_seed);
        out.cluster.task = "inductive-cluster";
        out.classify.task = "inductive-classify";
        out.cluster.split = "transductive (no hidden nodes): " + out.cluster.split;
        out.classify.split = "transductive (no hidden nodes): " + out.classify.split;
        return out;
    }

    const HetGraph visible_graph = remove_nodes(graph, hidden);
    TrainResult trained = train(visible_graph, schemas, config);
    // Same types and relations, so the parameters apply to the full graph.
    const EncodedBatch enc = encode_nodes(graph, labeled, schemas, trained.model.params, config.eval_fanout,
                                          derive_seed(config.seed, "embed"));
    const Matrix xh = rows_for(enc, hidden);
    std::vector<int> yh;
    for (NodeId n : hidden) yh.push_back(labels[n]);

    out.cluster = cluster_embeddings(xh, yh, eval_seed);
    out.cluster.task = "inductive-cluster";
    out.cluster.split = std::to_string(hidden.size()) + " hidden nodes clustered, k=" +
                        std::to_string(std::set<int>(yh.begin(), yh.end()).size());

    // Visible nodes: 5/6 fit the classifier, 1/6 picks L2.
    std::vector<NodeId> fit_nodes = visible;
    Rng vrng = derive_rng(eval_seed, "inductive.val");
    shuffle(fit_nodes, vrng);
    const auto n_val = static_cast<std::size_t>(std::lround(static_cast<double>(fit_nodes.size()) / 6.0));
    std::vector<NodeId> val_nodes(fit_nodes.begin(), fit_nodes.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit_nodes.erase(fit_nodes.begin(), fit_nodes.begin() + static_cast<std::ptrdiff_t>(n_val));
    const Matrix xf = rows_for(enc, fit_nodes);
    std::vector<int> yf;
    for (NodeId n : fit_nodes) yf.push_back(labels[n]);
    double l2 = l2_grid[1];
    if (!val_nodes.empty()) {
        const Matrix xv = rows_for(enc, val_nodes);
        std::vector<int> yv;
        for (NodeId n : val_nodes) yv.push_back(labels[n]);
        double best = -1.0;
        for (double cand : l2_grid) {
            const double f = logistic_classify(xf, yf, xv, yv, cand).micro;
            if (f > best) {
                best = f;
                l2 = cand;
            }
        }
    }
    const F1Scores f = logistic_classify(xf, yf, xh, yh, l2);
    out.classify.task = "inductive-classify";
    out.classify.seed = eval_seed;
    out.classify.split = std::to_string(fit_nodes.size()) + " visible train / " + std::to_string(val_nodes.size()) +
                         " visible val / " + std::to_string(hidden.size()) + " hidden test";
    out.classify.metrics["micro_f1"] = f.micro;
    out.classify.metrics["macro_f1"] = f.macro;
    out.classify.metrics["l2"] = l2;
    out.classify.metrics["hidden_fraction"] = hidden_fraction;
    out.cluster.metrics["hidden_fraction"] = hidden_fraction;
    for (int c : f.missing_classes)
        out.classify.flags.push_back("class " + std::to_string(c) + " has no visible training node");
    return out;
}

std::vector<int> label_vector(const HetGraph& graph, const std::vector<std::pair<std::string, std::string>>& labels) {
    std::vector<int> out(graph.node_count(), -1);
    std::map<std::string, int> ids;
    std::map<std::string, NodeId> index;
    for (NodeId n = 0; n < graph.node_count(); ++n) index.emplace(graph.node_name(n), n);
    for (const auto& [node, label] : labels) {
        auto it = index.find(node);
        if (it == index.end()) throw ReferenceError("labels: unknown node id '" + node + "'");
        auto [lit, fresh] = ids.try_emplace(label, static_cast<int>(ids.size()));
        out[it->second] = lit->second;
    }
    return out;
}

} // namespace tgnn::eval
