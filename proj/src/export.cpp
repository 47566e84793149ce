#include "tgnn/export.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "tgnn/error.hpp"

namespace tgnn {

std::vector<std::string> export_embeddings(const HetGraph& graph, const EncodedBatch& encoded, const std::string& dir) {
    if (encoded.nodes.empty()) throw ContractError("export_embeddings: empty batch");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

    std::map<TypeId, std::vector<std::size_t>> rows_by_type;
    for (std::size_t i = 0; i < encoded.nodes.size(); ++i) rows_by_type[graph.type_of(encoded.nodes[i])].push_back(i);
    std::vector<std::string> paths;
    for (auto& [type, rows] : rows_by_type) {
        std::sort(rows.begin(), rows.end(),
                  [&](std::size_t a, std::size_t b) { return encoded.nodes[a] < encoded.nodes[b]; });
        std::vector<EmbeddingRow> out;
        for (std::size_t r : rows) {
            auto u = encoded.u.row_span(r);
            out.push_back({graph.node_name(encoded.nodes[r]), {u.begin(), u.end()}});
        }
        const std::string path = dir + "/" + graph.type_name(type) + ".tsv";
        write_embedding_rows(out, path);
        paths.push_back(path);
    }
    return paths;
}

void write_embedding_rows(const std::vector<EmbeddingRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& row : rows) {
        f << row.node << '\t';
        for (std::size_t j = 0; j < row.values.size(); ++j) f << (j ? "," : "") << format_double(row.values[j]);
        f << '\n';
    }
    if (!f) throw IoError("write failed for " + path);
}

std::vector<EmbeddingRow> load_embeddings(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::vector<EmbeddingRow> out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw ParseError(path, line_no, "expected node_id<TAB>v_1,...,v_d");
        EmbeddingRow row{line.substr(0, tab), {}};
        const char* p = line.c_str() + tab + 1;
        const char* end = line.c_str() + line.size();
        while (p < end) {
            char* next = nullptr;
            errno = 0;
            const double v = std::strtod(p, &next);
            if (next == p || errno == ERANGE || (*next != ',' && *next != '\0'))
                throw ParseError(path, line_no, "malformed embedding value");
            row.values.push_back(v);
            p = *next == ',' ? next + 1 : next;
        }
        if (row.values.empty()) throw ParseError(path, line_no, "empty embedding");
        if (dim == 0) dim = row.values.size();
        if (row.values.size() != dim)
            throw DimensionError(path + ":" + std::to_string(line_no) + ": embedding has " +
                                 std::to_string(row.values.size()) + " values, expected " + std::to_string(dim));
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace tgnn
