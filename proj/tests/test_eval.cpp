#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "tgnn/error.hpp"
#include "tgnn/eval.hpp"
#include "tgnn/rng.hpp"
#include "tgnn/synthetic.hpp"

using namespace tgnn;
using namespace tgnn::eval;

namespace {

SyntheticGraph small_graph() {
    SyntheticSpec s;
    s.types = {{"P", 40}, {"A", 16}, {"V", 4}};
    s.relations = {{"PA", "P", "A", 2, "AP"}, {"PV", "P", "V", 1, "VP"}};
    s.schemas = {{"P", {{"A", "AP"}, {"V", "VP"}}}, {"A", {{"V", "VP", "PA"}}}};
    s.communities = 2;
    s.epsilon = 0.0;
    s.feature_dim = 4;
    s.sigma = 0.3;
    s.seed = 12;
    return gen_synthetic(s);
}

TrainConfig small_config() {
    TrainConfig c;
    c.hidden_dim = 4;
    c.metric_dim = 4;
    c.epochs = 2;
    c.walks_per_node = 1;
    c.walk_length = 6;
    c.batch_size = 64;
    c.learning_rate = 0.01;
    c.seed = 2;
    return c;
}

} // namespace

TEST_SUITE("eval-harness") {

TEST_CASE("k-means exact and degenerate fits") {
    SUBCASE("two points") {
        const Matrix x(2, 2, std::vector<double>{0, 0, 3, 4});
        const auto r = kmeans_cluster(x, 2, 1);
        CHECK(r.inertia == 0.0);
        CHECK(r.labels[0] != r.labels[1]);
    }
    SUBCASE("identical points") {
        const Matrix x(5, 3, 1.5);
        CHECK(kmeans_cluster(x, 2, 1).inertia == 0.0);
    }
    SUBCASE("too many clusters") { CHECK_THROWS_AS(kmeans_cluster(Matrix(2, 1), 3, 0), ContractError); }
}

TEST_CASE("k-means recovers separated blobs") {
    Rng rng(derive_seed(4, "blobs"));
    const std::size_t n = 60;
    Matrix x(n, 2);
    std::vector<int> planted(n);
    const double centers[2][2] = {{0, 0}, {6, 8}};  // distance 10
    for (std::size_t i = 0; i < n; ++i) {
        planted[i] = static_cast<int>(i % 2);
        for (int j = 0; j < 2; ++j) x(i, j) = centers[planted[i]][j] + 0.1 * gaussian(rng);
    }
    // Brute-force oracle: nearest planted center.
    std::vector<int> oracle(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d[2];
        for (int c = 0; c < 2; ++c) d[c] = std::hypot(x(i, 0) - centers[c][0], x(i, 1) - centers[c][1]);
        oracle[i] = d[0] < d[1] ? 0 : 1;
    }
    REQUIRE(oracle == planted);
    const auto r = kmeans_cluster(x, 2, 9);
    CHECK(ari(r.labels, planted) == 1.0);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] + 1e-12);
}

TEST_CASE("NMI and ARI") {
    const std::vector<int> truth{0, 0, 1, 1, 2, 2};
    CHECK(nmi(truth, truth) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ari(truth, truth) == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<int> permuted{2, 2, 0, 0, 1, 1};
    CHECK(nmi(permuted, truth) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ari(permuted, truth) == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<int> t{0, 0, 1, 1}, p{0, 1, 0, 1};
    CHECK(std::fabs(nmi(p, t)) < 1e-12);
    CHECK(std::fabs(ari(p, t) + 0.5) < 1e-12);
}

TEST_CASE("logistic regression on separable data") {
    Rng rng(derive_seed(2, "separable"));
    Matrix x(20, 2);
    std::vector<int> y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        y[i] = static_cast<int>(i % 2);
        x(i, 0) = 2 * uniform01(rng) - 1;
        x(i, 1) = (y[i] ? 0.3 : -0.3) + 0.25 * x(i, 0) + (y[i] ? 1 : -1) * uniform01(rng);
    }
    // Separability oracle: some direction on a fine angular grid splits the
    // classes with a margin.
    bool separable = false;
    for (int k = 0; k < 3600 && !separable; ++k) {
        const double a = k * M_PI / 1800;
        double lo1 = INFINITY, hi0 = -INFINITY;
        for (std::size_t i = 0; i < 20; ++i) {
            const double proj = std::cos(a) * x(i, 0) + std::sin(a) * x(i, 1);
            if (y[i]) lo1 = std::min(lo1, proj);
            else hi0 = std::max(hi0, proj);
        }
        separable = lo1 > hi0;
    }
    REQUIRE(separable);
    const F1Scores f = logistic_classify(x, y, x, y, 1e-4);
    CHECK(f.micro == 1.0);
    CHECK(f.macro == 1.0);
}

TEST_CASE("classification edge cases") {
    const Matrix x(4, 1, std::vector<double>{0, 1, 2, 3});
    const std::vector<int> one{0, 0, 0, 0};
    CHECK_THROWS_AS(logistic_classify(x, one, x, one), ContractError);
    const std::vector<int> truth{0, 1, 0, 1}, wrong{1, 0, 1, 0};
    CHECK(f1_scores(wrong, truth).micro == 0.0);
    CHECK(f1_scores(truth, truth).macro == 1.0);
}

TEST_CASE("AUC") {
    const std::vector<double> s{0.9, 0.8, 0.1, 0.2};
    const std::vector<int> l{1, 1, 0, 0};
    CHECK(auc(s, l) == 1.0);
    const std::vector<double> tied(4, 0.3);
    CHECK(auc(tied, l) == 0.5);

    Rng rng(derive_seed(0, "auc"));
    std::vector<double> rs(10000);
    std::vector<int> rl(10000);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        rs[i] = uniform01(rng);
        rl[i] = static_cast<int>(i % 2);
    }
    CHECK(std::fabs(auc(rs, rl) - 0.5) < 0.02);
    CHECK_THROWS_AS(auc(s, std::vector<int>{1, 1, 1, 1}), ContractError);
}

TEST_CASE("edge hold-out drops mirrors") {
    const SyntheticGraph g = small_graph();
    const RelationId PA = *g.graph.find_relation("PA");
    const auto split = split_relation_edges(g.graph, PA, 0.1, 0.3, 1);
    CHECK(split.test.size() == 24);
    CHECK(split.val.size() == 8);
    CHECK(split.train.size() == 48);
    const auto held = hold_out_edges(g.graph, PA, 0.3, 1);
    CHECK(held.heldout.size() == 24);
    CHECK(held.train_graph.edges().size() == g.graph.edges().size() - 48);
    for (const Edge& e : held.heldout) {
        const auto back = held.train_graph.all_neighbors(e.src);
        CHECK(std::find(back.begin(), back.end(), e.dst) == back.end());
    }
}

TEST_CASE("inductive encode of a hidden node") {
    const SyntheticGraph g = small_graph();
    const NodeId hidden = 3;
    const HetGraph visible = remove_nodes(g.graph, std::vector<NodeId>{hidden});
    CHECK(visible.node_count() == g.graph.node_count() - 1);
    TrainResult r = train(visible, g.schemas, small_config());
    const auto enc = encode_nodes(g.graph, std::vector<NodeId>{hidden}, g.schemas, r.model.params, std::nullopt, 0);
    for (double v : enc.u.data) CHECK(std::isfinite(v));
    CHECK(std::fabs(std::accumulate(enc.alpha[0].begin(), enc.alpha[0].end(), 0.0) - 1.0) < 1e-12);
}

TEST_CASE("inductive protocol report shape") {
    const SyntheticGraph g = small_graph();
    const auto labels = label_vector(g.graph, g.labels);
    const TypeId P = *g.graph.find_type("P");
    for (double frac : {0.0, 0.2}) {
        const auto r = inductive_protocol(g.graph, g.schemas, labels, P, frac, small_config());
        CHECK(r.cluster.task == "inductive-cluster");
        CHECK(r.classify.task == "inductive-classify");
        CHECK(r.cluster.metrics.count("nmi") == 1);
        CHECK(r.cluster.metrics.count("ari") == 1);
        CHECK(r.classify.metrics.count("micro_f1") == 1);
        CHECK(r.classify.metrics.count("macro_f1") == 1);
        const auto j = r.classify.to_json();
        for (const char* key : {"task", "metrics", "split", "seed", "flags"}) CHECK(j.contains(key));
    }
}

}
