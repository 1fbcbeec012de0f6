#pragma once

#include <functional>
#include <string>

#include "dfree/ad/params.hpp"
#include "dfree/ad/tape.hpp"

namespace dfree::ad {

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Relative error used throughout: |a - n| / max(|a|, |n|, floor). The floor
// keeps coordinates with near-zero gradient from dividing noise by noise.
inline constexpr double kGradcheckFloor = 1e-3;

// Compares the tape gradient of a scalar-valued `loss_fn` against central
// differences with step `eps` for every coordinate of every parameter in
// `params` (or only the first `max_coords_per_param` of each, when > 0).
// `loss_fn` must read parameters through tape.param().
GradcheckResult gradcheck(const std::function<Var(Tape&)>& loss_fn, ParamStore& params, double eps = 1e-4,
                          std::size_t max_coords_per_param = 0);

}  // namespace dfree::ad
