#pragma once

#include <cstddef>
#include <span>

namespace magsim {

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);

/// Unweighted mean of per-class F1 over the classes present in `labels`.
/// A present class that is never predicted scores 0; classes absent from
/// `labels` are skipped even if predicted.
double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t num_classes);

/// 2FD / (F + D), or 0 when F + D == 0.
double harmonic_mean(double f, double d);

}  // namespace magsim
