#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magsim/graph.hpp"
#include "magsim/models.hpp"

namespace magsim {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_total = 0.0;
  double loss_task = 0.0;
  std::vector<double> loss_aux;
  double val_acc = 0.0;
  std::vector<std::pair<std::string, double>> grad_norms;  // per branch, before the optimizer step
};

struct TrainReport {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  double test_f1 = 0.0;
  double seconds = 0.0;
  std::size_t parameter_count = 0;

  std::size_t epochs_trained() const { return epochs.size(); }
  /// Everything except wall-clock time, so equal runs serialize identically.
  nlohmann::ordered_json to_json() const;
};

struct FitOptions {
  bool early_stopping = true;  // false: run exactly max_epochs and keep the last weights
  bool record_grads = true;
  bool track_validation = true;  // false: skip the per-epoch validation pass (requires !early_stopping)
};

struct FitResult {
  std::unique_ptr<Model> model;
  TrainReport report;
};

/// Full-batch training with Adam, validation accuracy each epoch, early
/// stopping on validation accuracy and best-checkpoint test evaluation.
/// Throws NumericError naming the epoch on a non-finite loss.
FitResult fit(const Mag& mag, const TrainConfig& cfg, const FitOptions& opts = {});
TrainReport train(const Mag& mag, const TrainConfig& cfg);

/// Tape-free evaluation-mode logits for every node.
Matrix predict_logits(Model& model, const Mag& mag);

struct Evaluation {
  double acc = 0.0;
  double f1 = 0.0;
};

Evaluation evaluate(Model& model, const Mag& mag, const std::vector<std::size_t>& rows);

}  // namespace magsim
