#pragma once

#include <span>
#include <vector>

#include "dfree/ad/tape.hpp"

namespace dfree::ad {

inline constexpr double kProbClamp = 1e-7;

// Per-row -log softmax(logits)[target]; n x 1.
Var cross_entropy_rows(Var logits, const std::vector<int>& targets);
// Mean over rows.
Var cross_entropy(Var logits, const std::vector<int>& targets);

// Per-row entropy of softmax(logits); n x 1.
Var entropy_rows_from_logits(Var logits);

// 0.5 (pred - ret)^2, n x 1.
Var value_loss_rows(Var pred, const Matrix& returns);
// 0.5 max((v - R)^2, (v_old + clip(v - v_old, -eps, eps) - R)^2), n x 1.
Var clipped_value_loss_rows(Var pred, const Matrix& old_values, const Matrix& returns, double clip_eps);

// ---- plain scalar forms (used by oracles and diagnostics) -----------------

double entropy(std::span<const double> probs);
double cross_entropy(std::span<const double> logits, int target);
double value_loss(double pred, double ret);
double binary_cross_entropy(double p_hat, int c);
// Focal loss with the probability clamped to [1e-7, 1 - 1e-7].
double focal_loss(double p_hat, int c, double gamma, double alpha);

}  // namespace dfree::ad
