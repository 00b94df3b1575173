#include "magsim/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace magsim {

namespace fs = std::filesystem;
using Kind = DatasetError::Kind;

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

std::vector<std::size_t> read_index_array(const nlohmann::json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw DatasetError(Kind::MalformedMeta, file.string() + ": missing array '" + key + "'");
  }
  std::vector<std::size_t> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_unsigned()) throw DatasetError(Kind::MalformedMeta, file.string() + ": non-index entry in '" + key + "'");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::size_t read_count(const nlohmann::json& j, const char* key, const fs::path& file) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw DatasetError(Kind::MalformedMeta, file.string() + ": missing or invalid '" + key + "'");
  }
  return j.at(key).get<std::size_t>();
}

}  // namespace

void save_dataset(const Mag& mag, const fs::path& dir) {
  mag.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["num_nodes"] = mag.num_nodes;
  meta["num_classes"] = mag.num_classes;
  meta["modalities"] = nlohmann::ordered_json::array();
  for (const auto& m : mag.modalities) meta["modalities"].push_back({{"name", m.name}, {"dim", m.dim}});
  meta["splits"] = {{"train", mag.splits.train}, {"val", mag.splits.val}, {"test", mag.splits.test}};
  meta["labels"] = mag.labels;
  {
    std::ofstream out(dir / "meta.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
    out << meta.dump() << "\n";
  }
  {
    std::ofstream out(dir / "edges.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "edges.csv").string());
    for (std::size_t v = 0; v < mag.num_nodes; ++v) {
      for (std::size_t u : mag.adjacency.neighbors(v)) {
        if (v < u) out << v << "," << u << "\n";
      }
    }
  }
  for (std::size_t m = 0; m < mag.modalities.size(); ++m) {
    const fs::path file = dir / ("feat_" + mag.modalities[m].name + ".f32");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    std::vector<std::uint32_t> buf(mag.features[m].size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const auto f = static_cast<float>(mag.features[m].data[i]);
      buf[i] = to_little(std::bit_cast<std::uint32_t>(f));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
    if (!out) throw IoError("short write on " + file.string());
  }
}

Mag load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError(Kind::Missing, "dataset directory not found: " + dir.string());
  const fs::path meta_path = dir / "meta.json";
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw DatasetError(Kind::Missing, "cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": " + e.what());
  }
  if (!meta.is_object()) throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": top level must be an object");

  Mag mag;
  mag.num_nodes = read_count(meta, "num_nodes", meta_path);
  mag.num_classes = read_count(meta, "num_classes", meta_path);
  if (!meta.contains("modalities") || !meta["modalities"].is_array()) {
    throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": missing array 'modalities'");
  }
  for (const auto& mj : meta["modalities"]) {
    if (!mj.is_object() || !mj.contains("name") || !mj["name"].is_string()) {
      throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": modality entry needs a string 'name'");
    }
    mag.modalities.push_back({mj["name"].get<std::string>(), read_count(mj, "dim", meta_path)});
  }
  if (!meta.contains("splits") || !meta["splits"].is_object()) {
    throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": missing object 'splits'");
  }
  mag.splits.train = read_index_array(meta["splits"], "train", meta_path);
  mag.splits.val = read_index_array(meta["splits"], "val", meta_path);
  mag.splits.test = read_index_array(meta["splits"], "test", meta_path);
  mag.labels = read_index_array(meta, "labels", meta_path);
  if (mag.labels.size() != mag.num_nodes) {
    throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": labels length differs from num_nodes");
  }
  for (std::size_t y : mag.labels) {
    if (y >= mag.num_classes) throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": label out of range");
  }
  {
    std::vector<char> seen(mag.num_nodes, 0);
    for (const auto* split : {&mag.splits.train, &mag.splits.val, &mag.splits.test}) {
      if (split->empty()) throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": empty split");
      for (std::size_t i : *split) {
        if (i >= mag.num_nodes) throw DatasetError(Kind::MalformedMeta, meta_path.string() + ": split index out of range");
        if (seen[i]) {
          throw DatasetError(Kind::SplitOverlap, meta_path.string() + ": splits overlap at node " + std::to_string(i));
        }
        seen[i] = 1;
      }
    }
  }

  const fs::path edges_path = dir / "edges.csv";
  std::ifstream edges_in(edges_path, std::ios::binary);
  if (!edges_in) throw DatasetError(Kind::Missing, "cannot open " + edges_path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(edges_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t src = 0;
    std::size_t dst = 0;
    char comma = 0;
    std::istringstream ls(line);
    if (!(ls >> src >> comma >> dst) || comma != ',' || !(ls >> std::ws).eof()) {
      throw DatasetError(Kind::BadEdges, edges_path.string() + ":" + std::to_string(line_no) + ": expected 'src,dst'");
    }
    if (src >= dst || dst >= mag.num_nodes) {
      throw DatasetError(Kind::BadEdges, edges_path.string() + ":" + std::to_string(line_no) +
                                             ": need src < dst < num_nodes");
    }
    edges.emplace_back(src, dst);
  }
  mag.adjacency = CsrMatrix::from_edges(mag.num_nodes, edges, /*symmetrize=*/true);

  for (const auto& mod : mag.modalities) {
    const fs::path file = dir / ("feat_" + mod.name + ".f32");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError(Kind::Missing, "cannot open " + file.string());
    const std::size_t expected = mag.num_nodes * mod.dim;
    std::vector<std::uint32_t> buf(expected);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected * sizeof(std::uint32_t)));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != expected * sizeof(std::uint32_t)) {
      throw DatasetError(Kind::TruncatedFeatures, file.string() + ": truncated, expected " +
                                                      std::to_string(expected * 4) + " bytes, read " + std::to_string(got));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw DatasetError(Kind::TruncatedFeatures, file.string() + ": trailing bytes beyond N x d floats");
    }
    Matrix x(mag.num_nodes, mod.dim);
    for (std::size_t i = 0; i < expected; ++i) x.data[i] = static_cast<double>(std::bit_cast<float>(to_little(buf[i])));
    mag.features.push_back(std::move(x));
  }
  mag.validate();
  return mag;
}

}  // namespace magsim
