// tgnn command-line entry point.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgnn/error.hpp"
#include "tgnn/eval.hpp"
#include "tgnn/export.hpp"
#include "tgnn/gradcheck.hpp"
#include "tgnn/graph.hpp"
#include "tgnn/synthetic.hpp"
#include "tgnn/trainer.hpp"
#include "tgnn/tree_sampler.hpp"

namespace fs = std::filesystem;
using namespace tgnn;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_validation = 2;
constexpr int exit_numeric = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

void write_report(const eval::EvalReport& r, const std::string& path) {
    write_text(path, r.to_json().dump(2) + "\n");
}

Fanout parse_fanout(const std::string& s) {
    if (s == "unlimited") return std::nullopt;
    try {
        std::size_t pos = 0;
        const unsigned long v = std::stoul(s, &pos);
        if (pos != s.size() || v == 0) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ContractError("fanout must be a positive integer or 'unlimited', got '" + s + "'");
    }
}

TrainConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
    TrainConfig c = path.empty() ? TrainConfig{} : TrainConfig::from_json(read_json_file(path));
    if (seed) c.seed = *seed;
    c.validate();
    return c;
}

// Embedding rows of every --embeddings file, keyed by node name, with the
// file stem as the node type.
struct EmbeddingSet {
    std::vector<std::string> names;
    std::vector<std::string> types;
    eval::Matrix x;
};

EmbeddingSet read_embedding_files(const std::vector<std::string>& paths) {
    EmbeddingSet out;
    std::vector<double> data;
    std::size_t dim = 0;
    std::set<std::string> seen;
    for (const auto& path : paths) {
        const std::string type = fs::path(path).stem().string();
        for (auto& row : load_embeddings(path)) {
            if (dim == 0) dim = row.values.size();
            if (row.values.size() != dim) throw DimensionError(path + ": embedding dimension differs across files");
            if (!seen.insert(row.node).second) throw ContractError("node '" + row.node + "' embedded twice");
            out.names.push_back(row.node);
            out.types.push_back(type);
            data.insert(data.end(), row.values.begin(), row.values.end());
        }
    }
    if (out.names.empty()) throw ContractError("no embeddings loaded");
    out.x = eval::Matrix(out.names.size(), dim, std::move(data));
    return out;
}

// Rows of the embedding set that carry a label, with dense label ids.
std::pair<eval::Matrix, std::vector<int>> labeled_rows(const EmbeddingSet& e, const std::string& labels_path) {
    std::map<std::string, std::string> labels;
    for (auto& [n, l] : load_labels(labels_path)) labels[n] = l;
    std::map<std::string, int> ids;
    std::vector<std::size_t> rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < e.names.size(); ++i) {
        auto it = labels.find(e.names[i]);
        if (it == labels.end()) continue;
        rows.push_back(i);
        y.push_back(ids.try_emplace(it->second, static_cast<int>(ids.size())).first->second);
    }
    if (rows.empty()) throw ContractError("no embedded node has a label");
    eval::Matrix x(rows.size(), e.x.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = e.x.row_span(rows[i]);
        std::copy(src.begin(), src.end(), x.row_span(i).begin());
    }
    return {std::move(x), std::move(y)};
}

struct EdgeRow {
    std::string src, dst, relation;
};

std::vector<EdgeRow> read_edge_rows(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::vector<EdgeRow> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (std::size_t k; (k = line.find('\t', start)) != std::string::npos; start = k + 1)
            cols.push_back(line.substr(start, k - start));
        cols.push_back(line.substr(start));
        if (cols.size() != 3) throw ParseError(path, line_no, "expected src_id<TAB>dst_id<TAB>relation");
        out.push_back({cols[0], cols[1], cols[2]});
    }
    return out;
}

int run_gen_synthetic(const std::string& preset, const std::string& spec_path, const std::string& out,
                      std::optional<std::uint64_t> seed) {
    SyntheticSpec spec;
    if (!spec_path.empty()) spec = SyntheticSpec::from_json(read_json_file(spec_path));
    else if (preset == "benchmark") spec = SyntheticSpec::benchmark();
    else if (preset == "dblp-small") spec = SyntheticSpec::dblp_small();
    else throw ContractError("unknown preset '" + preset + "' (expected benchmark or dblp-small)");
    if (seed) spec.seed = *seed;
    const SyntheticGraph g = gen_synthetic(spec);
    write_synthetic(g, out);
    write_text(out + "/spec.json", spec.to_json().dump(2) + "\n");
    std::printf("wrote %zu nodes, %zu edges, %zu schemas to %s\n", g.graph.node_count(), g.graph.edges().size(),
                g.schemas.size(), out.c_str());
    return exit_ok;
}

struct TrainArgs {
    std::string nodes, edges, schemas, config, out;
    std::optional<std::uint64_t> seed;
    bool dump_plan = false;
    std::string holdout_relation;
    double holdout_fraction = 0.3;
};

int run_train(const TrainArgs& a) {
    LoadedGraph loaded = load_graph(a.nodes, a.edges, a.schemas);
    const TrainConfig config = load_config(a.config, a.seed);
    fs::create_directories(a.out);

    HetGraph graph = std::move(loaded.graph);
    if (!a.holdout_relation.empty()) {
        const auto rel = graph.find_relation(a.holdout_relation);
        if (!rel) throw ReferenceError("unknown relation '" + a.holdout_relation + "'");
        auto held = eval::hold_out_edges(graph, *rel, a.holdout_fraction, derive_seed(config.seed, "holdout"));
        std::ofstream f(a.out + "/heldout_edges.tsv", std::ios::binary);
        if (!f) throw IoError("cannot write " + a.out + "/heldout_edges.tsv");
        for (const Edge& e : held.heldout)
            f << graph.node_name(e.src) << '\t' << graph.node_name(e.dst) << '\t' << a.holdout_relation << '\n';
        graph = std::move(held.train_graph);
        std::ofstream g(a.out + "/train_edges.tsv", std::ios::binary);
        write_edges(graph, g);
    }

    std::printf("training on %zu nodes, %zu edges, %zu schemas\n", graph.node_count(), graph.edges().size(),
                loaded.schemas.size());
    std::size_t last_epoch = SIZE_MAX;
    double sum = 0.0;
    std::size_t count = 0;
    auto flush = [&] {
        if (count) std::printf("epoch %zu mean loss %.6f\n", last_epoch, sum / static_cast<double>(count));
    };
    TrainResult result = train(graph, loaded.schemas, config, [&](const LossRecord& r) {
        if (r.epoch != last_epoch) {
            flush();
            last_epoch = r.epoch;
            sum = 0.0;
            count = 0;
        }
        sum += r.loss;
        ++count;
    });
    flush();

    {
        std::ofstream f(a.out + "/loss.csv", std::ios::binary);
        if (!f) throw IoError("cannot write " + a.out + "/loss.csv");
        write_loss_log(result.log, f);
    }
    save_checkpoint(result.model, a.out + "/checkpoint.json");
    write_text(a.out + "/config.json", config.to_json().dump(2) + "\n");
    const EncodedBatch enc =
        embed_all(graph, loaded.schemas, result.model, config.eval_fanout, derive_seed(config.seed, "embed"));
    export_embeddings(graph, enc, a.out + "/embeddings");
    if (a.dump_plan) {
        std::vector<NodeId> nodes(graph.node_count());
        for (NodeId n = 0; n < nodes.size(); ++n) nodes[n] = n;
        const auto trees =
            sample_batch_trees(graph, nodes, loaded.schemas, config.eval_fanout, derive_seed(config.seed, "embed"));
        write_text(a.out + "/plan.json", plan_to_json(build_plan(trees), graph).dump(2) + "\n");
    }
    std::printf("wrote %s/{loss.csv,checkpoint.json,config.json,embeddings/}\n", a.out.c_str());
    return exit_ok;
}

int run_embed(const std::string& nodes, const std::string& edges, const std::string& schemas,
              const std::string& checkpoint, const std::string& out, const std::string& fanout,
              std::optional<std::uint64_t> seed) {
    const LoadedGraph loaded = load_graph(nodes, edges, schemas);
    Model model = load_checkpoint(checkpoint, loaded.graph);
    const EncodedBatch enc =
        embed_all(loaded.graph, loaded.schemas, model, parse_fanout(fanout), derive_seed(seed.value_or(0), "embed"));
    for (const auto& p : export_embeddings(loaded.graph, enc, out)) std::printf("wrote %s\n", p.c_str());
    return exit_ok;
}

int run_eval_cluster(const std::vector<std::string>& embeddings, const std::string& labels, const std::string& report,
                     std::uint64_t seed) {
    const auto [x, y] = labeled_rows(read_embedding_files(embeddings), labels);
    const auto r = eval::cluster_embeddings(x, y, seed);
    write_report(r, report);
    std::printf("nmi %.6f ari %.6f\n", r.metrics.at("nmi"), r.metrics.at("ari"));
    return exit_ok;
}

int run_eval_classify(const std::vector<std::string>& embeddings, const std::string& labels,
                      const std::string& report, std::uint64_t seed) {
    const auto [x, y] = labeled_rows(read_embedding_files(embeddings), labels);
    const auto r = eval::classify_embeddings(x, y, seed);
    write_report(r, report);
    std::printf("micro_f1 %.6f macro_f1 %.6f\n", r.metrics.at("micro_f1"), r.metrics.at("macro_f1"));
    return exit_ok;
}

// The training-graph edges give the positives used to fit the classifier;
// the held-out edges are the test positives. Non-edges avoid both sets.
int run_eval_link(const std::vector<std::string>& embeddings, const std::string& edges, const std::string& heldout,
                  const std::string& report, std::size_t ratio, std::uint64_t seed) {
    const EmbeddingSet e = read_embedding_files(embeddings);
    const auto train_rows = read_edge_rows(edges);
    const auto test_rows = read_edge_rows(heldout);
    if (test_rows.empty()) throw ContractError("no held-out edges");
    const std::string relation = test_rows.front().relation;

    HetGraph::Builder b;
    for (std::size_t i = 0; i < e.names.size(); ++i) {
        const auto t = b.find_type(e.types[i]);
        const TypeId type = t ? *t : b.add_type(e.types[i]);
        auto row = e.x.row_span(i);
        b.add_node(e.names[i], type, {row.begin(), row.end()});
    }
    auto node = [&](const std::string& name) {
        const auto n = b.find_node(name);
        if (!n) throw ReferenceError("edge endpoint '" + name + "' has no embedding");
        return *n;
    };
    auto add = [&](const EdgeRow& r) {
        const NodeId s = node(r.src), d = node(r.dst);
        // Endpoint types come from the embedding files.
        const TypeId ts = *b.find_type(e.types[s]), td = *b.find_type(e.types[d]);
        auto rel = b.find_relation(r.relation);
        if (!rel) rel = b.add_relation(r.relation, ts, td);
        b.add_edge(s, d, *rel);
        return std::pair{s, d};
    };
    for (const auto& r : train_rows) add(r);
    std::vector<std::pair<NodeId, NodeId>> test_pairs;
    for (const auto& r : test_rows) {
        if (r.relation != relation) throw ContractError("held-out edges must share one relation");
        test_pairs.push_back(add(r));
    }
    const HetGraph graph = std::move(b).build();
    const RelationId rel = *graph.find_relation(relation);
    eval::LinkSplit split;
    std::set<std::pair<NodeId, NodeId>> test_set(test_pairs.begin(), test_pairs.end());
    for (const Edge& ed : graph.edges()) {
        if (ed.relation != rel) continue;
        (test_set.count({ed.src, ed.dst}) ? split.test : split.train).push_back(ed);
    }
    eval::Matrix x(graph.node_count(), e.x.cols);
    for (NodeId n = 0; n < graph.node_count(); ++n) {
        auto f = graph.features(n);
        std::copy(f.begin(), f.end(), x.row_span(n).begin());
    }
    const auto r = eval::link_predict_eval(graph, x, split, ratio, seed);
    write_report(r, report);
    std::printf("auc %.6f f1 %.6f\n", r.metrics.at("auc"), r.metrics.at("f1"));
    return exit_ok;
}

int run_eval_inductive(const TrainArgs& a, const std::string& labels_path, const std::string& root,
                       double fraction, const std::string& report_prefix) {
    const LoadedGraph loaded = load_graph(a.nodes, a.edges, a.schemas);
    const TrainConfig config = load_config(a.config, a.seed);
    const auto root_type = loaded.graph.find_type(root);
    if (!root_type) throw ReferenceError("unknown root type '" + root + "'");
    const auto labels = eval::label_vector(loaded.graph, load_labels(labels_path));
    const auto res = eval::inductive_protocol(loaded.graph, loaded.schemas, labels, *root_type, fraction, config);
    nlohmann::json j = nlohmann::json::array({res.cluster.to_json(), res.classify.to_json()});
    write_text(report_prefix, j.dump(2) + "\n");
    std::printf("hidden nmi %.6f micro_f1 %.6f\n", res.cluster.metrics.at("nmi"), res.classify.metrics.at("micro_f1"));
    return exit_ok;
}

int run_gradcheck(std::uint64_t seed) {
    const GradcheckReport r = full_model_gradcheck(seed);
    std::printf("max relative error %.3e over %zu parameter entries (%zu nodes, %.2fs)\n", r.max_relative_error,
                r.scalars, r.nodes, r.seconds);
    return r.max_relative_error < 1e-4 ? exit_ok : exit_numeric;
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case Error::Kind::parse:
    case Error::Kind::dimension:
    case Error::Kind::reference:
    case Error::Kind::contract:
    case Error::Kind::shape:
        return exit_validation;
    case Error::Kind::numeric:
        return exit_numeric;
    case Error::Kind::io:
        return exit_failure;
    }
    return exit_failure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-schema heterogeneous graph neural network toolkit"};
    app.require_subcommand(1);
    std::optional<std::uint64_t> seed;

    auto* gen = app.add_subcommand("gen-synthetic", "Generate a planted-community graph");
    std::string preset = "benchmark", spec_path, gen_out;
    gen->add_option("--preset", preset, "benchmark | dblp-small");
    gen->add_option("--spec", spec_path, "JSON synthetic spec (overrides --preset)");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", seed);

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train an encoder and export embeddings");
    tr->add_option("--nodes", ta.nodes)->required();
    tr->add_option("--edges", ta.edges)->required();
    tr->add_option("--schemas", ta.schemas)->required();
    tr->add_option("--config", ta.config, "JSON training config");
    tr->add_option("--out", ta.out)->required();
    tr->add_option("--seed", ta.seed);
    tr->add_flag("--dump-plan", ta.dump_plan, "Write the aggregation plan of the final encode to plan.json");
    tr->add_option("--holdout-relation", ta.holdout_relation, "Hold out edges of this relation for link prediction");
    tr->add_option("--holdout-fraction", ta.holdout_fraction)->check(CLI::Range(0.0, 1.0));

    std::string emb_nodes, emb_edges, emb_schemas, emb_ckpt, emb_out, emb_fanout = "unlimited";
    auto* em = app.add_subcommand("embed", "Encode every node with a checkpoint");
    em->add_option("--nodes", emb_nodes)->required();
    em->add_option("--edges", emb_edges)->required();
    em->add_option("--schemas", emb_schemas)->required();
    em->add_option("--checkpoint", emb_ckpt)->required();
    em->add_option("--out", emb_out)->required();
    em->add_option("--fanout", emb_fanout, "Neighbor cap per level or 'unlimited'");
    em->add_option("--seed", seed);

    std::vector<std::string> embeddings;
    std::string labels, report, edges, heldout;
    std::uint64_t eval_seed = 0;
    std::size_t ratio = 3;
    auto add_eval = [&](const std::string& name, const std::string& help, bool need_labels) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("--embeddings", embeddings, "Per-type embedding TSV (repeatable)")->required();
        if (need_labels) c->add_option("--labels", labels)->required();
        c->add_option("--report", report)->required();
        c->add_option("--seed", eval_seed);
        return c;
    };
    auto* ec = add_eval("eval-cluster", "K-Means NMI/ARI on embeddings", true);
    auto* ecl = add_eval("eval-classify", "Logistic-regression F1 on embeddings", true);
    auto* el = add_eval("eval-link", "Link prediction AUC/F1", false);
    el->add_option("--edges", edges, "Edges seen during training")->required();
    el->add_option("--heldout", heldout, "Held-out positive edges of one relation")->required();
    el->add_option("--negatives", ratio, "Negatives per positive");

    TrainArgs ia;
    std::string ind_labels, ind_root, ind_report;
    double fraction = 0.1;
    auto* ei = app.add_subcommand("eval-inductive", "Hide labeled nodes, train, then evaluate the hidden ones");
    ei->add_option("--nodes", ia.nodes)->required();
    ei->add_option("--edges", ia.edges)->required();
    ei->add_option("--schemas", ia.schemas)->required();
    ei->add_option("--config", ia.config);
    ei->add_option("--labels", ind_labels)->required();
    ei->add_option("--root-type", ind_root)->required();
    ei->add_option("--hidden-fraction", fraction)->check(CLI::Range(0.0, 0.99));
    ei->add_option("--report", ind_report)->required();
    ei->add_option("--seed", ia.seed);

    std::uint64_t gc_seed = 0;
    auto* gc = app.add_subcommand("gradcheck", "Full-model gradient check on a toy instance");
    gc->add_option("--seed", gc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (*gen) return run_gen_synthetic(preset, spec_path, gen_out, seed);
        if (*tr) return run_train(ta);
        if (*em) return run_embed(emb_nodes, emb_edges, emb_schemas, emb_ckpt, emb_out, emb_fanout, seed);
        if (*ec) return run_eval_cluster(embeddings, labels, report, eval_seed);
        if (*ecl) return run_eval_classify(embeddings, labels, report, eval_seed);
        if (*el) return run_eval_link(embeddings, edges, heldout, report, ratio, eval_seed);
        if (*ei) return run_eval_inductive(ia, ind_labels, ind_root, fraction, ind_report);
        if (*gc) return run_gradcheck(gc_seed);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_failure;
    }
    return exit_failure;
}
