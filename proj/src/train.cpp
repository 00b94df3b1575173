#include "magsim/train.hpp"

#include <chrono>
#include <cmath>
#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "magsim/errors.hpp"
#include "magsim/metrics.hpp"
#include "magsim/run_config.hpp"
#include "magsim/seed.hpp"
#include "magsim/supra.hpp"

namespace magsim {

namespace {

// Activations are large, short-lived buffers. Keep them on the heap instead
// of a fresh mmap per allocation.
void tune_allocator() {
#ifdef __GLIBC__
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

std::vector<Tensor> feature_tensors(const Mag& mag) {
  std::vector<Tensor> out;
  out.reserve(mag.features.size());
  for (const auto& f : mag.features) out.emplace_back(f);
  return out;
}

Evaluation score(const Matrix& logits, const Mag& mag, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ValueError("evaluation on an empty row set");
  std::vector<std::size_t> all = argmax_rows(logits);
  std::vector<std::size_t> preds;
  preds.reserve(rows.size());
  for (std::size_t r : rows) preds.push_back(all[r]);
  std::vector<std::size_t> labels = mag.labels_of(rows);
  return {accuracy(preds, labels), macro_f1(preds, labels, mag.num_classes)};
}

Matrix logits_of(Model& model, const std::vector<Tensor>& feats, const CsrMatrix& adj) {
  ForwardContext ctx;
  return model.forward(ctx, feats, adj).logits.value();
}

}  // namespace

nlohmann::ordered_json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = magsim::to_json(config);
  j["parameter_count"] = parameter_count;
  j["epochs_trained"] = epochs_trained();
  j["best_epoch"] = best_epoch;
  j["best_val_acc"] = best_val_acc;
  j["test_acc"] = test_acc;
  j["test_f1"] = test_f1;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json row;
    row["epoch"] = e.epoch;
    row["loss_total"] = e.loss_total;
    row["loss_task"] = e.loss_task;
    row["loss_aux"] = e.loss_aux;
    row["val_acc"] = e.val_acc;
    nlohmann::ordered_json g = nlohmann::ordered_json::object();
    for (const auto& [name, v] : e.grad_norms) g[name] = v;
    row["grad_norms"] = g;
    j["epochs"].push_back(row);
  }
  return j;
}

Matrix predict_logits(Model& model, const Mag& mag) {
  CsrMatrix adj = mag.mean_adjacency();
  return logits_of(model, feature_tensors(mag), adj);
}

Evaluation evaluate(Model& model, const Mag& mag, const std::vector<std::size_t>& rows) {
  return score(predict_logits(model, mag), mag, rows);
}

FitResult fit(const Mag& mag, const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  if (opts.early_stopping && !opts.track_validation) throw ValueError("early stopping needs validation tracking");
  tune_allocator();
  if (mag.splits.train.empty() || mag.splits.val.empty() || mag.splits.test.empty()) {
    throw ValueError("training needs nonempty train, val and test splits");
  }
  const auto start = std::chrono::steady_clock::now();

  FitResult result;
  result.model = make_model(cfg, mag);
  Model& model = *result.model;
  TrainReport& report = result.report;
  report.config = cfg;
  report.parameter_count = model.parameter_count();

  const CsrMatrix adj = mag.mean_adjacency();
  const std::vector<Tensor> feats = feature_tensors(mag);
  const std::vector<std::size_t> train_labels = mag.labels_of(mag.splits.train);
  const double lambda = model.lambda_aux();

  std::vector<Parameter*> params = model.parameters();
  std::vector<Parameter*> trainable = model.trainable_parameters();
  std::vector<Branch> branches = model.branches();
  std::vector<Matrix> best_snapshot;
  std::mt19937_64 rng(derive_seed(cfg.seed, "dropout"));
  AdamState adam;
  AdamOptions adam_opts;
  adam_opts.lr = cfg.lr;
  adam_opts.weight_decay = cfg.weight_decay;

  report.best_val_acc = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (Parameter* p : params) p->zero_grad();
    Tape tape;
    ForwardContext ctx{&tape, true, cfg.dropout, &rng};
    ModelOutput out = model.forward(ctx, feats, adj);

    EpochRecord rec;
    rec.epoch = epoch;
    Tensor task = cross_entropy_smoothed(row_select(out.logits, mag.splits.train), train_labels, cfg.smoothing);
    rec.loss_task = task.item();
    Tensor total = task;
    if (lambda > 0.0) {
      for (const Tensor& aux_logits : out.aux_logits) {
        Tensor aux = cross_entropy_smoothed(row_select(aux_logits, mag.splits.train), train_labels, cfg.smoothing);
        rec.loss_aux.push_back(aux.item());
        total = add(total, scale(aux, lambda));
      }
    }
    rec.loss_total = total.item();
    if (!std::isfinite(rec.loss_total)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    tape.backward(total);
    if (opts.record_grads) {
      for (const auto& [name, group] : branches) rec.grad_norms.emplace_back(name, grad_norm(group));
    }
    adam_step(trainable, adam, adam_opts);

    if (opts.track_validation) rec.val_acc = score(logits_of(model, feats, adj), mag, mag.splits.val).acc;
    report.epochs.push_back(std::move(rec));

    const double val = report.epochs.back().val_acc;
    if (!opts.track_validation) {
      report.best_epoch = epoch;
    } else if (val > report.best_val_acc) {
      report.best_val_acc = val;
      report.best_epoch = epoch;
      if (opts.early_stopping) {
        best_snapshot.clear();
        for (Parameter* p : params) best_snapshot.push_back(p->value);
      }
    }
    if (opts.early_stopping && epoch - report.best_epoch >= cfg.patience) break;
  }

  if (opts.early_stopping) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_snapshot[i];
  }
  if (!opts.track_validation) report.best_val_acc = score(logits_of(model, feats, adj), mag, mag.splits.val).acc;
  Evaluation test = score(logits_of(model, feats, adj), mag, mag.splits.test);
  report.test_acc = test.acc;
  report.test_f1 = test.f1;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainReport train(const Mag& mag, const TrainConfig& cfg) { return fit(mag, cfg).report; }

}  // namespace magsim
