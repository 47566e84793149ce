#include "tgnn/model.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <unordered_map>

#include "tgnn/error.hpp"

namespace tgnn {

// ---- ModelParams ----------------------------------------------------------

ModelParams ModelParams::zeros(const HetGraph& graph, ModelDims dims) {
    if (dims.input == 0 || dims.hidden == 0) throw ContractError("model dimensions must be positive");
    ModelParams p;
    p.dims = dims;
    p.type_names = graph.type_names();
    for (const auto& r : graph.relations()) p.relation_names.push_back(r.name);
    const std::size_t d = dims.input, h = dims.hidden;
    for (std::size_t w = 0; w < gru_weight_names.size(); ++w) {
        const bool input_side = w % 2 == 0;
        p.store.add(std::string("gru.") + gru_weight_names[w], ad::Matrix(h, input_side ? d : h));
    }
    for (const auto& r : p.relation_names) p.store.add("rel." + r + ".W", ad::Matrix(h, h));
    for (const auto& t : p.type_names) p.store.add("type." + t + ".W", ad::Matrix(h, d));
    for (const auto& t : p.type_names) p.store.add("attn." + t, ad::Matrix(1, 2 * h));
    return p;
}

ad::Parameter& ModelParams::gru(GruWeight w) { return store[static_cast<std::size_t>(w)]; }

ad::Parameter& ModelParams::relation(RelationId r) {
    if (r >= relation_names.size()) throw ReferenceError("unknown relation id " + std::to_string(r));
    return store[gru_weight_names.size() + r];
}

ad::Parameter& ModelParams::type_projection(TypeId t) {
    if (t >= type_names.size()) throw ReferenceError("unknown type id " + std::to_string(t));
    return store[gru_weight_names.size() + relation_names.size() + t];
}

ad::Parameter& ModelParams::attention(TypeId t) {
    if (t >= type_names.size()) throw ReferenceError("unknown type id " + std::to_string(t));
    return store[gru_weight_names.size() + relation_names.size() + type_names.size() + t];
}

// ---- Encoder --------------------------------------------------------------

Encoder::Encoder(ad::Tape& tape, const HetGraph& graph, ModelParams& params)
    : tape_(tape), graph_(graph), params_(params) {
    if (graph.feature_dim() != params.dims.input)
        throw DimensionError("graph feature dimension " + std::to_string(graph.feature_dim()) +
                             " does not match model input dimension " + std::to_string(params.dims.input));
}

ad::Var Encoder::features(std::span<const NodeId> nodes) {
    const std::size_t d = graph_.feature_dim();
    ad::Matrix x(nodes.size(), d);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto f = graph_.features(nodes[i]);
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return tape_.constant(std::move(x));
}

ad::Var Encoder::gru_cell(ad::Var x, ad::Var h) {
    auto p = [this](GruWeight w) { return tape_.param(params_.gru(w)); };
    const ad::Var z = ad::sigmoid(ad::add(ad::linear(x, p(GruWeight::A_z)), ad::linear(h, p(GruWeight::B_z))));
    const ad::Var r = ad::sigmoid(ad::add(ad::linear(x, p(GruWeight::A_r)), ad::linear(h, p(GruWeight::B_r))));
    const ad::Var candidate =
        ad::tanh(ad::add(ad::linear(x, p(GruWeight::A_h)), ad::linear(ad::mul(r, h), p(GruWeight::B_h))));
    // z∘h + (1 − z)∘h̃ written without a ones constant.
    return ad::add(ad::mul(z, h), ad::sub(candidate, ad::mul(z, candidate)));
}

ad::Var Encoder::aggregate_relation(ad::Var child_states, std::vector<std::vector<std::size_t>> segments,
                                    RelationId relation) {
    ad::Parameter& w = params_.relation(relation);
    const ad::Var mean = ad::segment_mean(child_states, std::move(segments));
    return ad::linear(mean, tape_.param(w));
}

ad::Var Encoder::leaf_states(std::span<const NodeId> nodes, TypeId leaf_type) {
    const ad::Var x = features(nodes);
    if (params_.dims.input == params_.dims.hidden) return x;
    return ad::linear(x, tape_.param(params_.type_projection(leaf_type)));
}

ad::Var Encoder::hierarchical_aggregate(const NeighborTree& tree) {
    const TreeSchema& s = tree.schema;
    const std::size_t h = params_.dims.hidden;
    // Plain recursion, one node at a time.
    std::function<ad::Var(std::size_t, std::size_t)> state = [&](std::size_t a, std::size_t p) -> ad::Var {
        const NodeId node = tree.levels[a][p];
        if (a == 0) return leaf_states(std::span<const NodeId>(&node, 1), s.types[0]);
        const auto& kids = tree.children[a][p];
        ad::Var message;
        if (kids.empty()) {
            message = tape_.constant(ad::Matrix(1, h));
        } else {
            std::vector<ad::Var> child_states;
            child_states.reserve(kids.size());
            for (std::size_t c : kids) child_states.push_back(state(a - 1, c));
            std::vector<std::size_t> all(kids.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            message = aggregate_relation(ad::concat_rows(child_states), {all}, s.relations[a - 1]);
        }
        return gru_cell(features(std::span<const NodeId>(&node, 1)), message);
    };
    return state(tree.depth(), 0);
}

std::vector<ad::Var> Encoder::execute_plan(const AggregationPlan& plan) {
    std::vector<ad::Var> states(plan.stages.size());
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
        const PlanStage& st = plan.stages[i];
        if (st.level == 0) {
            states[i] = leaf_states(st.nodes, st.prefix_types[0]);
            continue;
        }
        if (!st.child_stage || *st.child_stage >= i)
            throw ContractError("aggregation plan stage " + std::to_string(i) + " is not in bottom-up order");
        const ad::Var message = aggregate_relation(states[*st.child_stage], st.children, st.prefix_relations.back());
        states[i] = gru_cell(features(st.nodes), message);
    }
    return states;
}

Encoder::Integrated Encoder::integrate(std::span<const NodeId> roots, TypeId root_type,
                                       std::span<const ad::Var> schema_outputs) {
    const std::size_t h = params_.dims.hidden;
    Integrated out;
    const ad::Var z0 = ad::linear(features(roots), tape_.param(params_.type_projection(root_type)));
    out.z.push_back(z0);
    for (const ad::Var& z : schema_outputs) {
        if (z.rows() != roots.size() || z.cols() != h)
            throw ShapeError("integrate: schema output has shape " + z.value().shape_string() + ", expected " +
                             std::to_string(roots.size()) + "x" + std::to_string(h));
        out.z.push_back(z);
    }
    const ad::Var a = tape_.param(params_.attention(root_type));
    std::vector<ad::Var> logits;
    logits.reserve(out.z.size());
    for (const ad::Var& z : out.z) {
        const std::array<ad::Var, 2> pair{z0, z};
        logits.push_back(ad::leaky_relu(ad::linear(ad::concat_cols(pair), a), 0.2));
    }
    out.alpha = ad::softmax_rows(ad::concat_cols(logits));
    ad::Var acc = ad::mul_rowwise(out.z[0], ad::slice_col(out.alpha, 0));
    for (std::size_t i = 1; i < out.z.size(); ++i)
        acc = ad::add(acc, ad::mul_rowwise(out.z[i], ad::slice_col(out.alpha, i)));
    out.u = ad::relu(acc);
    return out;
}

Encoder::Encoded Encoder::encode(std::span<const NodeId> nodes, std::span<const TreeSchema> schemas,
                                 std::span<const NeighborTree> trees, bool use_plan) {
    Encoded out;
    out.nodes.assign(nodes.begin(), nodes.end());
    {
        std::vector<NodeId> sorted(nodes.begin(), nodes.end());
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ContractError("encode: node batch contains duplicates");
    }
    // Tree offsets in node-major order.
    std::vector<std::size_t> first_tree(nodes.size());
    std::size_t expected = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        first_tree[i] = expected;
        expected += schema_set_for_type(schemas, graph_.type_of(nodes[i])).size();
    }
    if (expected != trees.size())
        throw ContractError("encode: expected " + std::to_string(expected) + " trees, got " + std::to_string(trees.size()));

    AggregationPlan plan;
    std::vector<ad::Var> states;
    if (use_plan) {
        plan = build_plan(trees);
        states = execute_plan(plan);
    }

    std::map<TypeId, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < nodes.size(); ++i) by_type[graph_.type_of(nodes[i])].push_back(i);

    std::vector<ad::Var> group_u;
    std::vector<std::size_t> row_in_concat(nodes.size());
    std::size_t offset = 0;
    for (auto& [type, rows] : by_type) {
        Encoded::Group g;
        g.type = type;
        g.rows = rows;
        g.schema_indices = schema_set_for_type(schemas, type);
        std::vector<NodeId> roots;
        for (std::size_t r : rows) roots.push_back(nodes[r]);
        std::vector<ad::Var> outputs;
        for (std::size_t j = 0; j < g.schema_indices.size(); ++j) {
            if (use_plan) {
                std::size_t stage = 0;
                std::vector<std::size_t> picks;
                for (std::size_t r : rows) {
                    const PlanOutput& o = plan.outputs[first_tree[r] + j];
                    if (!picks.empty() && o.stage != stage)
                        throw ContractError("encode: schema outputs of one type landed in different stages");
                    stage = o.stage;
                    picks.push_back(o.row);
                }
                outputs.push_back(ad::gather_rows(states[stage], std::move(picks)));
            } else {
                std::vector<ad::Var> zs;
                for (std::size_t r : rows) zs.push_back(hierarchical_aggregate(trees[first_tree[r] + j]));
                outputs.push_back(ad::concat_rows(zs));
            }
        }
        g.integrated = integrate(roots, type, outputs);
        group_u.push_back(g.integrated.u);
        for (std::size_t k = 0; k < rows.size(); ++k) row_in_concat[rows[k]] = offset + k;
        offset += rows.size();
        out.groups.push_back(std::move(g));
    }
    if (nodes.empty()) {
        out.u = tape_.constant(ad::Matrix(0, params_.dims.hidden));
        return out;
    }
    out.u = ad::gather_rows(ad::concat_rows(group_u), row_in_concat);
    return out;
}

// ---- batch helpers --------------------------------------------------------

std::vector<NeighborTree> sample_batch_trees(const HetGraph& graph, std::span<const NodeId> nodes,
                                             std::span<const TreeSchema> schemas, Fanout fanout, std::uint64_t seed) {
    std::vector<NeighborTree> trees;
    for (NodeId n : nodes) {
        for (std::size_t s : schema_set_for_type(schemas, graph.type_of(n))) {
            Rng rng = derive_rng(seed, "tree", n, s);
            trees.push_back(sample_tree(graph, n, schemas[s], fanout, rng, s));
        }
    }
    return trees;
}

std::size_t EncodedBatch::row_of(NodeId n) const {
    auto it = std::find(nodes.begin(), nodes.end(), n);
    if (it == nodes.end()) throw ReferenceError("node " + std::to_string(n) + " is not in the encoded batch");
    return static_cast<std::size_t>(it - nodes.begin());
}

EncodedBatch encode_nodes(const HetGraph& graph, std::span<const NodeId> nodes, std::span<const TreeSchema> schemas,
                          ModelParams& params, Fanout fanout, std::uint64_t seed) {
    for (NodeId n : nodes) (void)graph.type_of(n);
    ad::Tape tape;
    Encoder enc(tape, graph, params);
    const auto trees = sample_batch_trees(graph, nodes, schemas, fanout, seed);
    const Encoder::Encoded e = enc.encode(nodes, schemas, trees);

    EncodedBatch out;
    out.nodes = e.nodes;
    out.u = e.u.value();
    out.alpha.resize(nodes.size());
    out.z.resize(nodes.size());
    for (const auto& g : e.groups) {
        const ad::Matrix& alpha = g.integrated.alpha.value();
        for (std::size_t k = 0; k < g.rows.size(); ++k) {
            const std::size_t i = g.rows[k];
            auto row = alpha.row_span(k);
            out.alpha[i].assign(row.begin(), row.end());
            ad::Matrix z(g.integrated.z.size(), params.dims.hidden);
            for (std::size_t s = 0; s < g.integrated.z.size(); ++s) {
                auto zr = g.integrated.z[s].value().row_span(k);
                std::copy(zr.begin(), zr.end(), z.row_span(s).begin());
            }
            out.z[i] = std::move(z);
        }
    }
    return out;
}

} // namespace tgnn
