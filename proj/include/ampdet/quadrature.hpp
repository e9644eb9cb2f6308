#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ampdet {

// Tolerances and truncation window for the integrals over the large-scale
// fading amplitude g. All g-integrals run in u = ln g over [ln g_lo, ln g_hi];
// the default window spans BS-user distances [0.1 m, R] and +-6 sigma_SF of
// shadowing, which leaves < 1e-8 of the probability mass outside.
struct QuadratureSpec {
  double rel_tol = 1e-9;
  double abs_tol = 1e-300;
  int max_subdivisions = 4000;
  double g_lo = 0.0;
  double g_hi = 0.0;

  bool valid() const {
    return rel_tol > 0 && abs_tol > 0 && g_lo > 0 && g_hi > g_lo;
  }
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : std::runtime_error(what), achieved_error_(achieved_error) {}
  double achieved_error() const { return achieved_error_; }

 private:
  double achieved_error_;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  long evals = 0;
};

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Gauss-Laguerre nodes/weights for the weight exp(-t) on [0, inf).
void gauss_laguerre(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Adaptive bisection with Gauss-Legendre panels. Starts from `initial_panels`
// equal panels so narrow interior features are not missed, then splits any
// panel whose two-half refinement disagrees beyond its width-proportional
// share of the tolerance.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, double abs_tol, int max_subdivisions,
                              int initial_panels = 16, int panel_order = 12);

// Fixed composite Gauss-Legendre rule: `panels` equal panels of the given
// order over [a, b], nodes and weights written in ascending order.
void composite_gauss_legendre(double a, double b, int panels, int order,
                              std::vector<double>& nodes, std::vector<double>& weights);

inline double log_sum_exp(double la, double lb) {
  if (la == -std::numeric_limits<double>::infinity()) return lb;
  if (lb == -std::numeric_limits<double>::infinity()) return la;
  const double m = la > lb ? la : lb;
  return m + std::log(std::exp(la - m) + std::exp(lb - m));
}

}  // namespace ampdet
