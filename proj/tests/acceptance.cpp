// Acceptance gate: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tgnn/error.hpp"
#include "tgnn/eval.hpp"
#include "tgnn/export.hpp"
#include "tgnn/gradcheck.hpp"
#include "tgnn/model.hpp"
#include "tgnn/objective.hpp"
#include "tgnn/synthetic.hpp"
#include "tgnn/trainer.hpp"

using namespace tgnn;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Training configuration for the synthetic benchmark runs.
TrainConfig benchmark_config(MetricMode mode) {
    TrainConfig c;
    c.hidden_dim = 32;
    c.metric = mode;
    c.metric_dim = 32;
    c.epochs = 30;
    c.walks_per_node = 2;
    c.walk_length = 10;
    c.window = 2;
    c.negatives = 3;
    c.batch_size = 512;
    c.learning_rate = 0.01;
    c.fanout = std::nullopt;
    c.eval_fanout = std::nullopt;
    c.seed = 7;
    return c;
}

// ---- independent scalar oracles ----------------------------------------

double o_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> o_matvec(const Matrix& m, const std::vector<double>& v) {
    std::vector<double> out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out[i] += m(i, j) * v[j];
    return out;
}

std::vector<double> o_gru(ModelParams& p, const std::vector<double>& x, const std::vector<double>& h) {
    auto W = [&](GruWeight w) -> const Matrix& { return p.gru(w).value; };
    const auto az = o_matvec(W(GruWeight::A_z), x), bz = o_matvec(W(GruWeight::B_z), h);
    const auto ar = o_matvec(W(GruWeight::A_r), x), br = o_matvec(W(GruWeight::B_r), h);
    const std::size_t n = h.size();
    std::vector<double> z(n), r(n), rh(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = o_sigmoid(az[i] + bz[i]);
        r[i] = o_sigmoid(ar[i] + br[i]);
        rh[i] = r[i] * h[i];
    }
    const auto ah = o_matvec(W(GruWeight::A_h), x), bh = o_matvec(W(GruWeight::B_h), rh);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] * h[i] + (1 - z[i]) * std::tanh(ah[i] + bh[i]);
    return out;
}

double o_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double o_similarity(MetricParams& m, TypeId ta, TypeId tb, std::vector<double> ua, std::vector<double> ub) {
    if (ta == tb || m.mode == MetricMode::dot) return o_dot(ua, ub);
    if (ta > tb) {
        std::swap(ta, tb);
        std::swap(ua, ub);
    }
    if (m.mode == MetricMode::bilinear) return o_dot(ua, o_matvec(m.bilinear(TypePair::of(ta, tb)).value, ub));
    const auto pa = o_matvec(m.perceptron_type(ta).value, ua);
    const auto pb = o_matvec(m.perceptron_type(tb).value, ub);
    std::vector<double> t(pa.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::tanh(pa[i] + pb[i]);
    const Matrix& mr = m.perceptron_pair(TypePair::of(ta, tb)).value;
    return o_dot(std::vector<double>(mr.data.begin(), mr.data.end()), t);
}

double o_pair_loss(double pos, const std::vector<double>& negs) {
    double l = std::log(o_sigmoid(pos));
    for (double n : negs) l += std::log(o_sigmoid(-n));
    return -l;
}

void randomize(ParamStore& s, Rng& rng, double scale = 1.0) {
    for (auto& p : s.items())
        for (double& v : p.value.data) v = scale * (2 * uniform01(rng) - 1);
}

std::vector<double> row_of(const Matrix& m, std::size_t r) { return {m.row_span(r).begin(), m.row_span(r).end()}; }

// ---- criteria -----------------------------------------------------------

void criterion1() {
    const auto t0 = Clock::now();
    const GradcheckReport r = full_model_gradcheck(0);
    const double secs = seconds_since(t0);
    report(1, "gradient correctness", r.max_relative_error < 1e-4 && secs < 10.0 && r.nodes <= 10,
           fmt("max relative error %.3e", r.max_relative_error) + " over " + std::to_string(r.scalars) +
               " entries, " + std::to_string(r.nodes) + " nodes, " + fmt("%.2fs", secs));
}

void criterion2() {
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::fabs(got - want)); };

    // GRU: unit-weight scalar case and random multi-dimensional cases.
    {
        auto with_dim = [](std::size_t d) {
            SyntheticSpec s = SyntheticSpec::benchmark(1);
            s.feature_dim = d;
            return gen_synthetic(s);
        };
        const SyntheticGraph g = with_dim(1), g3 = with_dim(3);
        ModelParams p = ModelParams::zeros(g.graph, {1, 1});
        for (auto& prm : p.store.items()) std::fill(prm.value.data.begin(), prm.value.data.end(), 1.0);
        ad::Tape t;
        Encoder enc(t, g.graph, p);
        track(enc.gru_cell(t.constant(Matrix::row({1.0})), t.constant(Matrix::row({1.0}))).scalar(),
              o_gru(p, {1.0}, {1.0})[0]);
        Rng rng(derive_seed(2, "gru"));
        for (int trial = 0; trial < 20; ++trial) {
            ModelParams q = ModelParams::zeros(g3.graph, {3, 4});
            randomize(q.store, rng);
            ad::Tape tq;
            Encoder e2(tq, g3.graph, q);
            std::vector<double> x(3), h(4);
            for (double& v : x) v = 2 * uniform01(rng) - 1;
            for (double& v : h) v = 2 * uniform01(rng) - 1;
            const Matrix got = e2.gru_cell(tq.constant(Matrix::row(x)), tq.constant(Matrix::row(h))).value();
            const auto want = o_gru(q, x, h);
            for (std::size_t i = 0; i < 4; ++i) track(got(0, i), want[i]);
        }
    }
    double gru_err = worst;
    worst = 0.0;

    // Similarity in every mode, scalar and batched, against the oracle.
    const SyntheticGraph g = gen_synthetic(SyntheticSpec::benchmark(1));
    Rng rng(derive_seed(2, "similarity"));
    for (auto mode : {MetricMode::dot, MetricMode::bilinear, MetricMode::perceptron}) {
        MetricParams m = MetricParams::zeros(g.graph, mode, 5, 3);
        randomize(m.store, rng);
        for (TypeId a = 0; a < 3; ++a) {
            for (TypeId b = 0; b < 3; ++b) {
                Matrix L(4, 5), R(4, 5);
                for (double& v : L.data) v = 2 * uniform01(rng) - 1;
                for (double& v : R.data) v = 2 * uniform01(rng) - 1;
                ad::Tape t;
                const Matrix s = similarity(t, m, t.constant(L), t.constant(R), a, b).value();
                for (std::size_t i = 0; i < 4; ++i) {
                    const double want = o_similarity(m, a, b, row_of(L, i), row_of(R, i));
                    track(s(i, 0), want);
                    track(similarity(L.row_span(i), R.row_span(i), a, b, m), want);
                }
            }
        }
    }
    {
        MetricParams m = MetricParams::zeros(g.graph, MetricMode::perceptron, 1, 1);
        for (auto& prm : m.store.items()) std::fill(prm.value.data.begin(), prm.value.data.end(), 1.0);
        const std::vector<double> one{1.0};
        track(similarity(one, one, 0, 1, m), std::tanh(2.0));
    }
    const double sim_err = worst;
    worst = 0.0;

    // Pair loss.
    {
        ad::Tape t;
        track(pair_loss(t.constant(Matrix(1, 1)), t.constant(Matrix(3, 1))).scalar(), 4 * std::log(2.0));
        track(pair_loss(t.constant(Matrix::row({2.0})), t.constant(Matrix::row({-2.0}))).scalar(),
              o_pair_loss(2.0, {-2.0}));
        MetricParams m = MetricParams::zeros(g.graph, MetricMode::perceptron, 4, 3);
        randomize(m.store, rng);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> uc(4), ux(4);
            for (double& v : uc) v = 2 * uniform01(rng) - 1;
            for (double& v : ux) v = 2 * uniform01(rng) - 1;
            std::vector<std::vector<double>> negs(3, std::vector<double>(4));
            std::vector<double> neg_scores;
            for (auto& n : negs) {
                for (double& v : n) v = 2 * uniform01(rng) - 1;
                neg_scores.push_back(o_similarity(m, 0, 1, uc, n));
            }
            track(pair_loss(uc, ux, negs, 0, 1, m), o_pair_loss(o_similarity(m, 0, 1, uc, ux), neg_scores));
        }
    }
    const double loss_err = worst;
    worst = 0.0;

    // Exact softmax: direct summation over every candidate of the type.
    {
        MetricParams m = MetricParams::zeros(g.graph, MetricMode::bilinear, 3, 0);
        randomize(m.store, rng, 0.5);
        Matrix u(g.graph.node_count(), 3);
        for (double& v : u.data) v = 2 * uniform01(rng) - 1;
        for (NodeId center : {NodeId{0}, NodeId{401}, NodeId{599}}) {
            for (NodeId context : {NodeId{5}, NodeId{420}, NodeId{560}}) {
                const TypeId tc = g.graph.type_of(center), tx = g.graph.type_of(context);
                double denom = 0;
                for (NodeId n : g.graph.nodes_of_type(tx))
                    denom += std::exp(o_similarity(m, tc, tx, row_of(u, center), row_of(u, n)));
                const double want = std::exp(o_similarity(m, tc, tx, row_of(u, center), row_of(u, context))) / denom;
                track(context_probability_reference(g.graph, center, context, u, m), want);
            }
        }
        const SyntheticGraph four = gen_synthetic(SyntheticSpec::benchmark(2));
        MetricParams dm = MetricParams::zeros(four.graph, MetricMode::dot, 2, 0);
        Matrix v(four.graph.node_count(), 2);
        const auto vs = four.graph.nodes_of_type(2);  // 50 V nodes
        v(0, 0) = 1.0;
        v(vs[0], 0) = 1.0;
        const double e = std::exp(1.0);
        track(context_probability_reference(four.graph, 0, vs[0], v, dm), e / (e + static_cast<double>(vs.size() - 1)));
    }
    const double ref_err = worst;
    const double all = std::max({gru_err, sim_err, loss_err, ref_err});
    report(2, "closed-form oracles", all <= 1e-9,
           fmt("gru %.2e", gru_err) + fmt(", similarity %.2e", sim_err) + fmt(", pair_loss %.2e", loss_err) +
               fmt(", softmax %.2e", ref_err));
}

void criterion3() {
    double worst_alpha = 0.0;
    std::size_t encodes = 0;
    Rng rng(derive_seed(3, "alpha"));
    const SyntheticGraph g = gen_synthetic(SyntheticSpec::benchmark(3));
    for (int round = 0; encodes < 1000; ++round) {
        ModelParams p = ModelParams::zeros(g.graph, {g.graph.feature_dim(), 8});
        randomize(p.store, rng, 1.5);
        std::vector<NodeId> batch;
        for (int i = 0; i < 60; ++i) batch.push_back(static_cast<NodeId>(uniform_index(rng, g.graph.node_count())));
        std::sort(batch.begin(), batch.end());
        batch.erase(std::unique(batch.begin(), batch.end()), batch.end());
        const auto e = encode_nodes(g.graph, batch, g.schemas, p, 3, derive_seed(round, "trees"));
        for (const auto& a : e.alpha) {
            worst_alpha = std::max(worst_alpha, std::fabs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0));
            ++encodes;
        }
    }

    double worst_ref = 0.0;
    SyntheticSpec spec = SyntheticSpec::benchmark(4);
    spec.types = {{"P", 100}, {"A", 60}, {"V", 20}};
    const SyntheticGraph small = gen_synthetic(spec);
    for (auto mode : {MetricMode::dot, MetricMode::bilinear, MetricMode::perceptron}) {
        MetricParams m = MetricParams::zeros(small.graph, mode, 6, 4);
        randomize(m.store, rng);
        Matrix u(small.graph.node_count(), 6);
        for (double& v : u.data) v = 2 * uniform01(rng) - 1;
        for (NodeId center = 0; center < small.graph.node_count(); center += 17) {
            for (TypeId t = 0; t < small.graph.type_count(); ++t) {
                double total = 0;
                for (NodeId n : small.graph.nodes_of_type(t))
                    total += context_probability_reference(small.graph, center, n, u, m);
                worst_ref = std::max(worst_ref, std::fabs(total - 1.0));
            }
        }
    }
    report(3, "normalization invariants", encodes >= 1000 && worst_alpha <= 1e-9 && worst_ref <= 1e-9,
           std::to_string(encodes) + fmt(" node encodes, max |sum alpha - 1| %.2e", worst_alpha) +
               fmt(", max |sum p - 1| %.2e", worst_ref));
}

void criterion4() {
    const SyntheticGraph g = gen_synthetic(SyntheticSpec::benchmark(7));
    const WalkCorpus c = generate_walks(g.graph, 2, 10, derive_seed(7, "walks"));
    const auto t0 = Clock::now();
    double worst = 0.0;
    const std::size_t draws = 1000000;
    Rng rng(derive_seed(7, "law"));
    for (TypeId t = 0; t < g.graph.type_count(); ++t) {
        std::vector<std::size_t> counts(g.graph.node_count(), 0);
        for (std::size_t i = 0; i < draws; ++i) ++counts[c.sampler.sample(t, rng)];
        // Analytic table recomputed from the raw frequencies.
        double z = 0;
        for (NodeId n : g.graph.nodes_of_type(t)) z += std::pow(static_cast<double>(c.node_freq[n]), 0.75);
        double tv = 0;
        for (NodeId n : g.graph.nodes_of_type(t)) {
            const double p = std::pow(static_cast<double>(c.node_freq[n]), 0.75) / z;
            const double q = static_cast<double>(counts[n]) / static_cast<double>(draws);
            tv += std::fabs(p - q);
        }
        worst = std::max(worst, tv / 2);
    }
    const double per_type = seconds_since(t0) / static_cast<double>(g.graph.type_count());
    report(4, "sampling law", worst < 0.01 && per_type < 5.0,
           fmt("max TV distance %.4f", worst) + " at 1e6 draws per type" + fmt(", %.2fs per type", per_type));
}

void criterion5() {
    const SyntheticGraph g = gen_synthetic(SyntheticSpec::benchmark(5));
    Rng rng(derive_seed(5, "plan"));
    double worst = 0.0;
    for (int batch = 0; batch < 100; ++batch) {
        ModelParams p = ModelParams::zeros(g.graph, {g.graph.feature_dim(), 6});
        randomize(p.store, rng, 0.8);
        std::vector<NodeId> nodes;
        for (int i = 0; i < 24; ++i) nodes.push_back(static_cast<NodeId>(uniform_index(rng, g.graph.node_count())));
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        const Fanout f = batch % 2 ? Fanout{3} : std::nullopt;
        const auto trees = sample_batch_trees(g.graph, nodes, g.schemas, f, derive_seed(5, "trees", batch));
        ad::Tape t;
        Encoder enc(t, g.graph, p);
        const Matrix a = enc.encode(nodes, g.schemas, trees, true).u.value();
        const Matrix b = enc.encode(nodes, g.schemas, trees, false).u.value();
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    }
    report(5, "plan equivalence", worst <= 1e-12, fmt("max |plan - recursion| %.2e over 100 batches", worst));
}

struct BenchmarkRuns {
    SyntheticGraph graph;
    std::vector<int> labels;
    TypeId root = 0;
};

void criteria6to8(const BenchmarkRuns& b) {
    const auto t0 = Clock::now();
    const auto transductive =
        eval::inductive_protocol(b.graph.graph, b.graph.schemas, b.labels, b.root, 0.0, benchmark_config(MetricMode::perceptron));
    const double secs = seconds_since(t0);
    const double nmi_p = transductive.cluster.metrics.at("nmi");
    const double f1 = transductive.classify.metrics.at("micro_f1");
    report(6, "end-to-end learning signal", nmi_p >= 0.80 && f1 >= 0.90 && secs < 300,
           fmt("NMI %.4f", nmi_p) + fmt(", micro-F1 %.4f", f1) + fmt(", %.1fs", secs));

    std::map<std::string, double> nmi{{"perceptron", nmi_p}};
    for (auto mode : {MetricMode::dot, MetricMode::bilinear}) {
        const auto r = eval::inductive_protocol(b.graph.graph, b.graph.schemas, b.labels, b.root, 0.0, benchmark_config(mode));
        nmi[to_string(mode)] = r.cluster.metrics.at("nmi");
    }
    report(7, "variant ordering", nmi["perceptron"] >= nmi["dot"] - 0.02 && nmi["bilinear"] >= nmi["dot"] - 0.02,
           fmt("NMI dot %.4f", nmi["dot"]) + fmt(", bilinear %.4f", nmi["bilinear"]) +
               fmt(", perceptron %.4f", nmi["perceptron"]));

    const auto inductive =
        eval::inductive_protocol(b.graph.graph, b.graph.schemas, b.labels, b.root, 0.1, benchmark_config(MetricMode::perceptron));
    const double hidden_f1 = inductive.classify.metrics.at("micro_f1");
    report(8, "inductive protocol", std::fabs(hidden_f1 - f1) <= 0.05,
           fmt("hidden micro-F1 %.4f", hidden_f1) + fmt(" vs transductive %.4f", f1) +
               fmt(" (hidden NMI %.4f)", inductive.cluster.metrics.at("nmi")));
}

void criterion9(const BenchmarkRuns& b) {
    const HetGraph& g = b.graph.graph;
    const TrainConfig config = benchmark_config(MetricMode::perceptron);
    const RelationId PA = *g.find_relation("PA");
    const auto held = eval::hold_out_edges(g, PA, 0.3, derive_seed(config.seed, "holdout"));
    TrainResult trained = train(held.train_graph, b.graph.schemas, config);
    const EncodedBatch enc = embed_all(held.train_graph, b.graph.schemas, trained.model, config.eval_fanout,
                                       derive_seed(config.seed, "embed"));
    eval::LinkSplit split;
    for (const Edge& e : held.train_graph.edges())
        if (e.relation == PA) split.train.push_back(e);
    split.test = held.heldout;
    const auto r = eval::link_predict_eval(g, enc.u, split, 3, derive_seed(config.seed, "link"));
    const double auc = r.metrics.at("auc");
    // Same split and negatives scored by the planted community alone.
    Matrix onehot(g.node_count(), 4);
    for (NodeId n = 0; n < g.node_count(); ++n) onehot(n, static_cast<std::size_t>(b.labels[n])) = 1.0;
    const double ceiling =
        eval::link_predict_eval(g, onehot, split, 3, derive_seed(config.seed, "link")).metrics.at("auc");
    report(9, "link prediction", auc >= 0.85,
           fmt("AUC %.4f", auc) + fmt(", F1 %.4f", r.metrics.at("f1")) + " (" + r.split + ")" +
               fmt(", community-oracle AUC %.4f", ceiling));
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void criterion10(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "tgnn-acceptance-determinism";
    fs::remove_all(root);
    TrainConfig c = benchmark_config(MetricMode::perceptron);
    c.epochs = 5;
    fs::create_directories(root);
    {
        std::ofstream f(root / "config.json");
        f << c.to_json().dump(2);
    }
    auto run = [&](const std::string& tag) {
        const fs::path d = root / tag;
        const std::string q = "'" + d.string() + "'";
        const std::string data = q + "/data";
        const std::vector<std::string> cmds{
            cli + " gen-synthetic --preset benchmark --seed 7 --out " + data,
            cli + " train --nodes " + data + "/nodes.tsv --edges " + data + "/edges.tsv --schemas " + data +
                "/schemas.json --config '" + (root / "config.json").string() + "' --seed 7 --out " + q + "/run",
            cli + " embed --nodes " + data + "/nodes.tsv --edges " + data + "/edges.tsv --schemas " + data +
                "/schemas.json --checkpoint " + q + "/run/checkpoint.json --seed 7 --out " + q + "/emb",
            cli + " eval-cluster --embeddings " + q + "/emb/P.tsv --labels " + data + "/labels.tsv --seed 7 --report " +
                q + "/cluster.json",
            cli + " eval-classify --embeddings " + q + "/emb/P.tsv --labels " + data +
                "/labels.tsv --seed 7 --report " + q + "/classify.json",
            cli + " train --nodes " + data + "/nodes.tsv --edges " + data + "/edges.tsv --schemas " + data +
                "/schemas.json --config '" + (root / "config.json").string() +
                "' --seed 7 --holdout-relation PA --holdout-fraction 0.3 --out " + q + "/link",
            cli + " eval-link --embeddings " + q + "/link/embeddings/P.tsv --embeddings " + q +
                "/link/embeddings/A.tsv --embeddings " + q + "/link/embeddings/V.tsv --edges " + q + "/link/train_edges.tsv --heldout " + q +
                "/link/heldout_edges.tsv --negatives 3 --seed 7 --report " + q + "/link.json",
        };
        for (const auto& cmd : cmds)
            if (std::system((cmd + " > /dev/null").c_str()) != 0) return false;
        return true;
    };
    const bool ran = run("a") && run("b");
    std::size_t compared = 0, differing = 0;
    if (ran) {
        for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
            if (!entry.is_regular_file()) continue;
            const fs::path rel = fs::relative(entry.path(), root / "a");
            ++compared;
            if (slurp(entry.path()) != slurp(root / "b" / rel)) ++differing;
        }
    }
    const bool key_files = fs::exists(root / "a/run/loss.csv") && fs::exists(root / "a/run/checkpoint.json") &&
                           fs::exists(root / "a/cluster.json") && fs::exists(root / "a/classify.json") && fs::exists(root / "a/link.json");
    report(10, "determinism", ran && key_files && differing == 0 && compared > 0,
           std::to_string(compared) + " files compared, " + std::to_string(differing) +
               " differ (loss log, checkpoint, embeddings, reports)");
    fs::remove_all(root);
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "tgnn";
    try {
        criterion1();
        criterion2();
        criterion3();
        criterion4();
        criterion5();
        BenchmarkRuns b{gen_synthetic(SyntheticSpec::benchmark(7)), {}, 0};
        b.labels = eval::label_vector(b.graph.graph, b.graph.labels);
        b.root = *b.graph.graph.find_type("P");
        criteria6to8(b);
        criterion9(b);
        criterion10(cli);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
