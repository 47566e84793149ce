#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tgnn/graph.hpp"
#include "tgnn/model.hpp"

namespace tgnn {

struct EmbeddingRow {
    std::string node;
    std::vector<double> values;
};

// One `<dir>/<type>.tsv` per node type present in the batch, rows
// `node_id<TAB>v_1,...,v_d'` sorted by node id. Returns the written paths.
std::vector<std::string> export_embeddings(const HetGraph& graph, const EncodedBatch& encoded, const std::string& dir);

void write_embedding_rows(const std::vector<EmbeddingRow>& rows, const std::string& path);
std::vector<EmbeddingRow> load_embeddings(const std::string& path);

} // namespace tgnn
