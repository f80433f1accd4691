#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/core/graph.hpp"
#include "hyperflow/model/influence.hpp"
#include "hyperflow/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hyperflow::io {

namespace fs = std::filesystem;

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

inline std::string where(const fs::path& p, std::size_t line) { return p.string() + ":" + std::to_string(line); }

inline bool blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

inline long long parse_id(const std::string& tok, const fs::path& p, std::size_t line) {
  std::size_t used = 0;
  long long v = -1;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size() || v < 0) throw DataError("malformed node id '" + tok + "' at " + where(p, line));
  return v;
}

struct RawEdge {
  NodeId src = 0, dst = 0;
  std::optional<double> weight;
};

/// "src<TAB>dst[<TAB>weight]" per line; '#' lines are comments.
inline std::vector<RawEdge> read_edge_file(const fs::path& p) {
  auto in = open_in(p);
  std::vector<RawEdge> out;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (blank_or_comment(line)) continue;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.size() != 2 && tok.size() != 3) throw DataError("malformed edge line at " + where(p, ln));
    RawEdge e;
    const auto a = parse_id(tok[0], p, ln), b = parse_id(tok[1], p, ln);
    if (a > 0xffffffffLL || b > 0xffffffffLL) throw DataError("node id out of range at " + where(p, ln));
    e.src = static_cast<NodeId>(a);
    e.dst = static_cast<NodeId>(b);
    if (tok.size() == 3) {
      try {
        std::size_t used = 0;
        e.weight = std::stod(tok[2], &used);
        if (used != tok[2].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError("malformed edge weight at " + where(p, ln));
      }
    }
    out.push_back(e);
  }
  return out;
}

inline void write_edge_file(const fs::path& p, const EdgeSet& edges) {
  auto out = open_out(p);
  for (auto [a, b] : edges.pairs()) out << a << '\t' << b << '\n';
}

/// Comma-separated rows, one node per row.
inline Matrix read_features_csv(const fs::path& p, bool header) {
  auto in = open_in(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (ln == 1 && header) continue;
    if (blank_or_comment(line)) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError("malformed feature value at " + where(p, ln));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("feature dimension mismatch at " + where(p, ln));
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw DataError("empty feature file " + p.string());
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return x;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

/// One hyperedge per line, space-separated member ids.
inline std::vector<NodeSet> read_hyperedge_file(const fs::path& p, std::size_t node_count) {
  auto in = open_in(p);
  std::vector<NodeSet> out;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (blank_or_comment(line)) continue;
    std::istringstream ss(line);
    NodeSet e;
    for (std::string t; ss >> t;) {
      const auto id = parse_id(t, p, ln);
      if (static_cast<std::size_t>(id) >= node_count) throw DataError("node id out of range at " + where(p, ln));
      e.push_back(static_cast<NodeId>(id));
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_hyperedge_file(const fs::path& p, const std::vector<NodeSet>& hyperedges) {
  auto out = open_out(p);
  for (const auto& e : hyperedges) {
    for (std::size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
    out << '\n';
  }
}

/// "i<TAB>j" per undirected line-graph edge.
inline void write_line_graph(const fs::path& p, const LineGraph& lg) {
  auto out = open_out(p);
  for (auto [a, b] : lg.edges) out << a << '\t' << b << '\n';
}

inline LineGraph read_line_graph(const fs::path& p, std::size_t node_count) {
  LineGraph lg;
  lg.node_count = node_count;
  std::vector<NodePair> pairs;
  for (const auto& e : read_edge_file(p)) {
    if (e.src >= node_count || e.dst >= node_count) throw DataError("line graph endpoint out of range in " + p.string());
    pairs.emplace_back(e.src, e.dst);
  }
  lg.edges = EdgeSet(node_count, pairs).pairs();
  return lg;
}

/// id column followed by the embedding columns, with a header row.
inline void write_embeddings(const fs::path& p, const Matrix& emb) {
  auto out = open_out(p);
  out << "id";
  for (Eigen::Index j = 0; j < emb.cols(); ++j) out << ",e" << j;
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < emb.cols(); ++j) out << ',' << emb(i, j);
    out << '\n';
  }
}

inline Matrix read_embeddings(const fs::path& p) {
  const Matrix raw = read_features_csv(p, true);
  if (raw.cols() < 2) throw DataError("embedding file needs an id column and at least one value column");
  Matrix out(raw.rows(), raw.cols() - 1);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const auto id = static_cast<Eigen::Index>(raw(i, 0));
    if (id < 0 || id >= raw.rows()) throw DataError("embedding row id out of range in " + p.string());
    out.row(id) = raw.row(i).tail(raw.cols() - 1);
  }
  return out;
}

inline void write_loss_history(const fs::path& p, const std::vector<EpochRecord>& hist) {
  auto out = open_out(p);
  out.precision(17);
  out << "epoch,loss,pos_term,neg_term\n";
  for (const auto& r : hist) out << r.epoch << ',' << r.loss << ',' << r.pos_term << ',' << r.neg_term << '\n';
}

// Checkpoint layout: one line of JSON (tensor names, shapes, hyperparameters), then every
// tensor's entries in row-major order as little-endian IEEE-754 doubles.
inline constexpr const char* kCheckpointFormat = "hyperflow-checkpoint";

inline void write_checkpoint(const fs::path& p, const ModelParams& params) {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["version"] = 1;
  header["activation"] = activation_name(params.activation);
  header["hops"] = params.hops;
  header["gamma"] = params.gamma;
  header["layers"] = params.hyper_layers.size();
  header["tensors"] = nlohmann::json::array();
  const auto names = params.tensor_names();
  const auto ts = params.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i)
    header["tensors"].push_back({{"name", names[i]}, {"rows", ts[i]->rows()}, {"cols", ts[i]->cols()}});
  auto out = open_out(p, true);
  out << header.dump() << '\n';
  for (const auto* t : ts) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>((*t)(r, c));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char buf[8];
        std::memcpy(buf, &bits, 8);
        out.write(buf, 8);
      }
    }
  }
  if (!out) throw DataError("failed writing checkpoint " + p.string());
}

inline ModelParams read_checkpoint(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const std::exception&) {
    throw DataError("malformed checkpoint header in " + p.string());
  }
  if (header.value("format", "") != kCheckpointFormat) throw DataError("not a checkpoint: " + p.string());
  const std::size_t layers = header.at("layers").get<std::size_t>();
  ModelParams params;
  params.activation = parse_activation(header.at("activation").get<std::string>());
  params.hops = header.at("hops").get<std::size_t>();
  params.gamma = header.at("gamma").get<double>();
  params.hyper_layers.resize(layers);
  params.pair_layers.resize(layers);
  params.line_layers.resize(1);
  auto ts = params.tensors();
  const auto& desc = header.at("tensors");
  if (desc.size() != ts.size()) throw DataError("checkpoint tensor count mismatch in " + p.string());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto rows = desc[i].at("rows").get<Eigen::Index>(), cols = desc[i].at("cols").get<Eigen::Index>();
    ts[i]->resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        char buf[8];
        if (!in.read(buf, 8)) throw DataError("truncated checkpoint " + p.string());
        std::uint64_t bits;
        std::memcpy(&bits, buf, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        (*ts[i])(r, c) = std::bit_cast<double>(bits);
      }
    }
  }
  return params;
}

}  // namespace hyperflow::io
