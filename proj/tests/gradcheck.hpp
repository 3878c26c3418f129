#ifndef WDA_TESTS_GRADCHECK_HPP_
#define WDA_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wda/layers.hpp"

namespace wda::gradcheck {

struct Result {
  double max_rel_err = 0.0;
  size_t checked = 0;
  std::string worst_param;
};

// Central finite differences over the parameters in `params` against the
// analytic gradients already accumulated in Param::g. `loss` re-runs the
// full forward pass.
//
// Two numerical hazards are handled explicitly:
//  - entries whose gradient is orders of magnitude below the dominant flow
//    are floored to 1e-4 * max|g|, where the FD quotient is pure rounding
//    noise;
//  - an entry whose mismatch vanishes at a different step size is a ReLU /
//    max-pool kink or cancellation artifact, not a wrong gradient, so
//    failures at `h` are retried at h/8 and 8h and the best reading wins.
template <typename T>
Result check_params(const std::vector<nn::Param<T>*>& params,
                    const std::function<double()>& loss, double h = 1e-5,
                    int stride = 1, double retry_below = 1e-4) {
  double gmax = 0.0;
  for (const nn::Param<T>* p : params)
    for (const T& g : p->g) gmax = std::max(gmax, std::abs(double(g)));
  const double floor = std::max(1e-12, 1e-4 * gmax);

  auto fd_at = [&](nn::Param<T>* p, size_t j, double step) {
    const T orig = p->w[j];
    p->w[j] = orig + T(step);
    const double lp = loss();
    p->w[j] = orig - T(step);
    const double lm = loss();
    p->w[j] = orig;
    return (lp - lm) / (2.0 * step);
  };

  Result res;
  for (nn::Param<T>* p : params) {
    for (size_t j = 0; j < p->size(); j += stride) {
      const double an = double(p->g[j]);
      auto rel_of = [&](double fd) {
        return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
      };
      double rel = rel_of(fd_at(p, j, h));
      if (rel > retry_below) {
        rel = std::min(rel, rel_of(fd_at(p, j, h / 8.0)));
        if (rel > retry_below) rel = std::min(rel, rel_of(fd_at(p, j, 8.0 * h)));
      }
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p->name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return res;
}

}  // namespace wda::gradcheck

#endif  // WDA_TESTS_GRADCHECK_HPP_
