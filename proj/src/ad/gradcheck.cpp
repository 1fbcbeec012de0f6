#include "dfree/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dfree::ad {

GradcheckResult gradcheck(const std::function<Var(Tape&)>& loss_fn, ParamStore& params, double eps,
                          std::size_t max_coords_per_param) {
  params.zero_grad();
  {
    Tape tape;
    const Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape(false);
    return tape.scalar(loss_fn(tape));
  };

  GradcheckResult res;
  for (auto& [name, p] : params) {
    const Eigen::Index n = p.value.size();
    const Eigen::Index limit =
        max_coords_per_param > 0 ? std::min<Eigen::Index>(n, static_cast<Eigen::Index>(max_coords_per_param)) : n;
    for (Eigen::Index i = 0; i < limit; ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradcheckFloor});
      const double err = std::abs(analytic - numeric) / denom;
      ++res.coordinates;
      if (err > res.max_relative_error || res.worst_index < 0) {
        res.max_relative_error = err;
        res.worst_param = name;
        res.worst_index = i;
        res.analytic = analytic;
        res.numeric = numeric;
      }
    }
  }
  params.zero_grad();
  return res;
}

}  // namespace dfree::ad
