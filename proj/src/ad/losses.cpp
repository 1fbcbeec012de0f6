#include "dfree/ad/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dfree/errors.hpp"

namespace dfree::ad {

Var cross_entropy_rows(Var logits, const std::vector<int>& targets) {
  return scale(gather_cols(log_softmax(logits), targets), -1.0);
}

Var cross_entropy(Var logits, const std::vector<int>& targets) { return mean(cross_entropy_rows(logits, targets)); }

Var entropy_rows_from_logits(Var logits) {
  const Var logp = log_softmax(logits);
  const Var p = exp(logp);
  const Var plogp = mul(p, logp);
  Tape& t = *logits.tape;
  const Var ones = t.constant(Matrix::Constant(logits.cols(), 1, -1.0));
  return matmul(plogp, ones);
}

Var value_loss_rows(Var pred, const Matrix& returns) {
  Tape& t = *pred.tape;
  const Var diff = sub(pred, t.constant(returns));
  return scale(mul(diff, diff), 0.5);
}

Var clipped_value_loss_rows(Var pred, const Matrix& old_values, const Matrix& returns, double clip_eps) {
  Tape& t = *pred.tape;
  const Var old_v = t.constant(old_values);
  const Var ret = t.constant(returns);
  const Var d1 = sub(pred, ret);
  const Var clipped = add(old_v, clamp(sub(pred, old_v), -clip_eps, clip_eps));
  const Var d2 = sub(clipped, ret);
  // max(a, b) = -min(-a, -b)
  const Var worst = scale(minimum(scale(mul(d1, d1), -1.0), scale(mul(d2, d2), -1.0)), -1.0);
  return scale(worst, 0.5);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double cross_entropy(std::span<const double> logits, int target) {
  if (target < 0 || target >= static_cast<int>(logits.size())) throw ShapeMismatch("target index out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - m);
  return -(logits[static_cast<std::size_t>(target)] - m - std::log(s));
}

double value_loss(double pred, double ret) { return 0.5 * (pred - ret) * (pred - ret); }

double binary_cross_entropy(double p_hat, int c) {
  const double q = std::clamp(p_hat, kProbClamp, 1.0 - kProbClamp);
  return c == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double focal_loss(double p_hat, int c, double gamma, double alpha) {
  const double q = std::clamp(p_hat, kProbClamp, 1.0 - kProbClamp);
  if (c == 1) return -alpha * std::pow(1.0 - q, gamma) * std::log(q);
  return -(1.0 - alpha) * std::pow(q, gamma) * std::log(1.0 - q);
}

}  // namespace dfree::ad
