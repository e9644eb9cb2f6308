#include "ampdet/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>

namespace ampdet {

namespace {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

const Rule& cached_legendre(int order) {
  static std::map<int, Rule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it == cache.end()) {
    Rule r;
    gauss_legendre(order, r.x, r.w);
    it = cache.emplace(order, std::move(r)).first;
  }
  return it->second;
}

double panel_value(const std::function<double(double)>& f, double a, double b, const Rule& rule) {
  const double c1 = 0.5 * (b - a);
  const double c2 = 0.5 * (b + a);
  double sum = 0.0;
  for (size_t i = 0; i < rule.x.size(); ++i) sum += rule.w[i] * f(c1 * rule.x[i] + c2);
  return c1 * sum;
}

}  // namespace

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess, refined by Newton on P_n.
    double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = order * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[i] = -z;
    nodes[order - 1 - i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    weights[order - 1 - i] = weights[i];
  }
}

void gauss_laguerre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  double z = 0.0;
  for (int i = 0; i < order; ++i) {
    if (i == 0) {
      z = 3.0 / (1.0 + 2.4 * order);
    } else if (i == 1) {
      z += 15.0 / (1.0 + 2.5 * order);
    } else {
      const double ai = i - 1;
      z += ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - nodes[i - 2]);
    }
    double pp = 0.0, p2 = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = 1.0;
      p2 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0 - z) * p2 - j * p3) / (j + 1.0);
      }
      pp = order * (p1 - p2) / z;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-14 * std::max(1.0, z)) break;
    }
    nodes[i] = z;
    weights[i] = -1.0 / (pp * order * p2);
  }
}

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, double abs_tol, int max_subdivisions,
                              int initial_panels, int panel_order) {
  QuadResult res;
  if (!(b > a)) {
    res.converged = true;
    return res;
  }
  const Rule& rule = cached_legendre(panel_order);
  const double width_total = b - a;

  struct Panel {
    double a, b, value;
  };
  std::deque<Panel> open;
  const int k = std::max(1, initial_panels);
  for (int i = 0; i < k; ++i) {
    const double pa = a + width_total * i / k;
    const double pb = a + width_total * (i + 1) / k;
    open.push_back({pa, pb, panel_value(f, pa, pb, rule)});
    res.evals += panel_order;
  }

  double done_sum = 0.0;
  double done_err = 0.0;
  int splits = 0;
  while (!open.empty()) {
    // Current best estimate of the whole integral, for the relative test.
    double total = done_sum;
    for (const Panel& p : open) total += p.value;
    const double tol = std::max(abs_tol, rel_tol * std::abs(total));

    std::deque<Panel> next;
    bool any_split = false;
    for (const Panel& p : open) {
      const double m = 0.5 * (p.a + p.b);
      const double left = panel_value(f, p.a, m, rule);
      const double right = panel_value(f, m, p.b, rule);
      res.evals += 2 * panel_order;
      const double refined = left + right;
      const double err = std::abs(refined - p.value);
      const double share = tol * (p.b - p.a) / width_total;
      if (err <= share || (p.b - p.a) < 1e-14 * width_total) {
        done_sum += refined;
        done_err += err;
      } else if (splits >= max_subdivisions) {
        // Out of budget: keep the refined value and its error estimate.
        done_sum += refined;
        done_err += err;
      } else {
        next.push_back({p.a, m, left});
        next.push_back({m, p.b, right});
        ++splits;
        any_split = true;
      }
    }
    open.swap(next);
    if (!any_split && !open.empty()) break;
  }

  res.value = done_sum;
  res.error = done_err;
  res.converged = done_err <= std::max(abs_tol, 10.0 * rel_tol * std::abs(done_sum)) + 1e-300;
  return res;
}

void composite_gauss_legendre(double a, double b, int panels, int order,
                              std::vector<double>& nodes, std::vector<double>& weights) {
  const Rule& rule = cached_legendre(order);
  nodes.clear();
  weights.clear();
  nodes.reserve(static_cast<size_t>(panels) * order);
  weights.reserve(static_cast<size_t>(panels) * order);
  for (int p = 0; p < panels; ++p) {
    const double pa = a + (b - a) * p / panels;
    const double pb = a + (b - a) * (p + 1) / panels;
    const double c1 = 0.5 * (pb - pa);
    const double c2 = 0.5 * (pb + pa);
    for (int i = 0; i < order; ++i) {
      nodes.push_back(c1 * rule.x[i] + c2);
      weights.push_back(c1 * rule.w[i]);
    }
  }
}

}  // namespace ampdet
