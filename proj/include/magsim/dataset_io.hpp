#pragma once

#include <filesystem>
#include <string>

#include "magsim/errors.hpp"
#include "magsim/graph.hpp"

namespace magsim {

/// Dataset directory layout:
///   meta.json          node/class counts, modalities, splits, labels
///   edges.csv          "src,dst" per undirected edge, src < dst, each once
///   feat_<name>.f32    little-endian float32, row-major N x d_m, no header
class DatasetError : public IoError {
 public:
  enum class Kind { Missing, MalformedMeta, TruncatedFeatures, BadEdges, SplitOverlap };

  DatasetError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_dataset(const Mag& mag, const std::filesystem::path& dir);
Mag load_dataset(const std::filesystem::path& dir);

}  // namespace magsim
