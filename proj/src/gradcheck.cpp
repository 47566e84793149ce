#include "tgnn/gradcheck.hpp"

#include <array>
#include <chrono>
#include <limits>
#include <vector>

#include "tgnn/model.hpp"
#include "tgnn/objective.hpp"
#include "tgnn/rng.hpp"
#include "tgnn/trainer.hpp"

namespace tgnn {

GradcheckReport full_model_gradcheck(std::uint64_t seed, double eps) {
    const auto start = std::chrono::steady_clock::now();
    HetGraph::Builder b;
    const TypeId P = b.add_type("P");
    const TypeId A = b.add_type("A");
    const RelationId PA = b.add_relation("PA", P, A);
    const RelationId AP = b.add_relation("AP", A, P);
    Rng rng = derive_rng(seed, "gradcheck.features");
    std::vector<NodeId> p, a;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> f(4);
        for (double& v : f) v = gaussian(rng);
        p.push_back(b.add_node("p" + std::to_string(i), P, f));
    }
    for (int i = 0; i < 4; ++i) {
        std::vector<double> f(4);
        for (double& v : f) v = gaussian(rng);
        a.push_back(b.add_node("a" + std::to_string(i), A, f));
    }
    const std::array<std::pair<int, int>, 7> links{{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}}};
    for (auto [i, j] : links) {
        b.add_edge(p[i], a[j], PA);
        b.add_edge(a[j], p[i], AP);
    }
    const HetGraph graph = std::move(b).build();
    const std::vector<TreeSchema> schemas{{{A, P}, {AP}}, {{A, P, A}, {AP, PA}}};

    TrainConfig config;
    config.hidden_dim = 4;
    config.metric = MetricMode::perceptron;
    config.metric_dim = 4;
    config.seed = seed;
    Model model = init_params(graph, schemas, config, derive_seed(seed, "gradcheck.init"));

    std::vector<NodeId> nodes(graph.node_count());
    for (NodeId n = 0; n < nodes.size(); ++n) nodes[n] = n;
    const auto trees = sample_batch_trees(graph, nodes, schemas, std::nullopt, derive_seed(seed, "gradcheck.trees"));
    const WalkCorpus corpus = generate_walks(graph, 1, 4, derive_seed(seed, "gradcheck.walks"));
    const auto pairs = extract_pairs(corpus, 1, 2, derive_seed(seed, "gradcheck.pairs"));
    std::vector<std::size_t> rows(nodes.begin(), nodes.end());

    std::array<ParamStore*, 2> stores{&model.params.store, &model.metrics.store};
    std::vector<ad::Parameter*> params;
    for (ParamStore* s : stores)
        for (ad::Parameter& prm : s->items()) params.push_back(&prm);

    auto loss = [&](ad::Tape& tape) {
        Encoder enc(tape, graph, model.params);
        const auto encoded = enc.encode(nodes, schemas, trees);
        return total_loss(tape, graph, pairs, encoded.u, rows, model.metrics, config.lambda, stores);
    };
    GradcheckReport r;
    r.max_relative_error = ad::grad_check(loss, params, eps);
    r.nodes = graph.node_count();
    for (const auto* prm : params) r.scalars += prm->value.size();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

} // namespace tgnn
