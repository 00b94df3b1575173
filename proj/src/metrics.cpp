#include "magsim/metrics.hpp"

#include <string>
#include <vector>

#include "magsim/errors.hpp"

namespace magsim {

namespace {

void check_inputs(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.empty()) throw ValueError("metrics need at least one prediction");
  if (preds.size() != labels.size()) {
    throw DimensionError("metrics: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  check_inputs(preds, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes) {
  check_inputs(preds, labels);
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0), support(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= num_classes || labels[i] >= num_classes) throw ValueError("metrics: class index out of range");
    ++support[labels[i]];
    if (preds[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[preds[i]];
      ++fn[labels[i]];
    }
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0) continue;
    ++counted;
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    total += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / denom;
  }
  return total / static_cast<double>(counted);
}

double harmonic_mean(double f, double d) {
  if (f + d == 0.0) return 0.0;
  return 2.0 * f * d / (f + d);
}

}  // namespace magsim
