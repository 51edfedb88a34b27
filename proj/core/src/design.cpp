#include "slipuq/design.hpp"

#include "slipuq/error.hpp"
#include "slipuq/pc_basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>

namespace slipuq {

namespace {

void check_bounds(const SlipBounds& b) {
  if (!(b.min < b.max)) {
    throw std::invalid_argument("slip bounds must satisfy min < max");
  }
}

// Legendre expansion sum_j c_j L_j(x).
double legendre_series(std::span<const double> c, double x) {
  std::vector<double> table(c.size());
  legendre_table(std::clamp(x, -1.0, 1.0), table);
  double s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * table[j];
  return s;
}

// Adds n+1 nodes to the n-point rule `base` so that the combined interpolatory
// rule reaches maximal degree (Patterson's construction). The new nodes are
// the roots of the degree n+1 polynomial orthogonal to all lower-degree
// polynomials under the weight prod_i (x - base_i).
QuadratureRule1D patterson_extend(const QuadratureRule1D& base) {
  const int n = static_cast<int>(base.nodes.size());
  const int deg = n + 1;
  const QuadratureRule1D gl = gauss_legendre(2 * n + 8);
  const std::size_t nq = gl.nodes.size();

  std::vector<double> pi_w(nq);
  double scale = 0.0;
  for (std::size_t q = 0; q < nq; ++q) {
    double p = 1.0;
    for (double xb : base.nodes) p *= (gl.nodes[q] - xb);
    pi_w[q] = p * gl.weights[q];
    scale = std::max(scale, std::abs(p));
  }
  for (double& v : pi_w) v /= scale;

  Eigen::MatrixXd leg(static_cast<Eigen::Index>(nq), deg + 1);
  std::vector<double> table(static_cast<std::size_t>(deg) + 1);
  for (std::size_t q = 0; q < nq; ++q) {
    legendre_table(gl.nodes[q], table);
    for (int j = 0; j <= deg; ++j) {
      leg(static_cast<Eigen::Index>(q), j) = table[static_cast<std::size_t>(j)];
    }
  }
  // Unknown Legendre coefficients c_0..c_n with c_{n+1} = 1.
  Eigen::MatrixXd a(deg, deg);
  Eigen::VectorXd rhs(deg);
  for (int k = 0; k < deg; ++k) {
    for (int j = 0; j < deg; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < nq; ++q) {
        const auto qi = static_cast<Eigen::Index>(q);
        s += pi_w[q] * leg(qi, j) * leg(qi, k);
      }
      a(k, j) = s;
    }
    double s = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      const auto qi = static_cast<Eigen::Index>(q);
      s += pi_w[q] * leg(qi, deg) * leg(qi, k);
    }
    rhs[k] = -s;
  }
  const Eigen::VectorXd sol = a.fullPivLu().solve(rhs);
  std::vector<double> coef(static_cast<std::size_t>(deg) + 1);
  for (int j = 0; j < deg; ++j) coef[static_cast<std::size_t>(j)] = sol[j];
  coef[static_cast<std::size_t>(deg)] = 1.0;

  // One root in each gap of [-1, base_0, ..., base_{n-1}, 1].
  std::vector<double> edges;
  edges.push_back(-1.0);
  edges.insert(edges.end(), base.nodes.begin(), base.nodes.end());
  edges.push_back(1.0);
  std::vector<double> roots;
  for (std::size_t g = 0; g + 1 < edges.size(); ++g) {
    double lo = edges[g];
    double hi = edges[g + 1];
    double flo = legendre_series(coef, lo);
    const double fhi = legendre_series(coef, hi);
    if (flo * fhi > 0.0) {
      throw NumericError("Gauss-Patterson extension: no sign change in gap");
    }
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      const double fm = legendre_series(coef, mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  // Enforce exact symmetry of the new nodes.
  const std::size_t nr = roots.size();
  for (std::size_t i = 0; i < nr / 2; ++i) {
    const double v = 0.5 * (roots[nr - 1 - i] - roots[i]);
    roots[i] = -v;
    roots[nr - 1 - i] = v;
  }
  if (nr % 2 == 1) roots[nr / 2] = 0.0;

  QuadratureRule1D out;
  out.nodes = base.nodes;
  out.nodes.insert(out.nodes.end(), roots.begin(), roots.end());
  std::sort(out.nodes.begin(), out.nodes.end());

  // Interpolatory weights from the orthonormal-Legendre moment equations.
  const int np = static_cast<int>(out.nodes.size());
  Eigen::MatrixXd v(np, np);
  std::vector<double> tab(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    legendre_table(out.nodes[static_cast<std::size_t>(i)], tab);
    for (int k = 0; k < np; ++k) {
      v(k, i) = tab[static_cast<std::size_t>(k)] * std::sqrt(2.0 * k + 1.0);
    }
  }
  Eigen::VectorXd moments = Eigen::VectorXd::Zero(np);
  moments[0] = 2.0;
  const Eigen::VectorXd w = v.fullPivLu().solve(moments);
  out.weights.resize(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    out.weights[static_cast<std::size_t>(i)] =
        0.5 * (w[i] + w[np - 1 - i]);
  }
  return out;
}

std::array<QuadratureRule1D, kMaxPattersonLevel + 1> build_patterson_family() {
  std::array<QuadratureRule1D, kMaxPattersonLevel + 1> family;
  family[0].nodes = {0.0};
  family[0].weights = {2.0};
  for (int l = 1; l <= kMaxPattersonLevel; ++l) {
    family[static_cast<std::size_t>(l)] =
        patterson_extend(family[static_cast<std::size_t>(l - 1)]);
  }
  return family;
}

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Visits every multi-index of length `dim` with entries >= 0 and sum in
// [lo, hi].
template <class F>
void for_each_level_index(int dim, int lo, int hi, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  auto rec = [&](auto&& self, int pos, int sum) -> void {
    if (pos == dim) {
      if (sum >= lo) f(idx, sum);
      return;
    }
    for (int v = 0; sum + v <= hi; ++v) {
      idx[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, sum + v);
    }
    idx[static_cast<std::size_t>(pos)] = 0;
  };
  rec(rec, 0, 0);
}

}  // namespace

std::vector<double> slip_to_canonical(std::span<const double> slip,
                                      const SlipBounds& bounds) {
  check_bounds(bounds);
  const double range = bounds.max - bounds.min;
  const double slack = 1e-12 * range;
  std::vector<double> xi(slip.size());
  for (std::size_t i = 0; i < slip.size(); ++i) {
    const double s = slip[i];
    if (!(s >= bounds.min - slack && s <= bounds.max + slack)) {
      throw std::out_of_range("slip value " + std::to_string(s) +
                              " outside bounds");
    }
    xi[i] = std::clamp((2.0 * s - (bounds.min + bounds.max)) / range, -1.0, 1.0);
  }
  return xi;
}

std::vector<double> canonical_to_slip(std::span<const double> xi,
                                      const SlipBounds& bounds) {
  check_bounds(bounds);
  std::vector<double> s(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (!(std::abs(xi[i]) <= 1.0 + 1e-12)) {
      throw std::out_of_range("canonical value outside [-1, 1]");
    }
    const double x = std::clamp(xi[i], -1.0, 1.0);
    s[i] = 0.5 * (bounds.min + bounds.max) + 0.5 * x * (bounds.max - bounds.min);
  }
  return s;
}

QuadratureRule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
  QuadratureRule1D rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

const QuadratureRule1D& gauss_patterson(int level) {
  if (level < 0 || level > kMaxPattersonLevel) {
    throw ConfigError("Gauss-Patterson level " + std::to_string(level) +
                      " unsupported (0.." + std::to_string(kMaxPattersonLevel) +
                      ")");
  }
  static const auto family = build_patterson_family();
  return family[static_cast<std::size_t>(level)];
}

int gauss_patterson_exactness(int level) {
  return level == 0 ? 1 : 3 * (1 << level) - 1;
}

int smolyak_exactness(int level) { return 2 * level + 1; }

SparseQuadrature smolyak_grid(int dim, int level) {
  if (dim < 1) throw std::invalid_argument("smolyak_grid: dim >= 1 required");
  if (level < 0 || level > kMaxPattersonLevel) {
    throw ConfigError("Smolyak level " + std::to_string(level) +
                      " unsupported (0.." + std::to_string(kMaxPattersonLevel) +
                      ")");
  }
  // Every level's nodes are a subset of the finest level; address them by
  // position in the finest rule so duplicates merge exactly.
  const QuadratureRule1D& finest = gauss_patterson(level);
  std::vector<std::vector<int>> node_ids(static_cast<std::size_t>(level) + 1);
  for (int l = 0; l <= level; ++l) {
    const auto& rule = gauss_patterson(l);
    for (double x : rule.nodes) {
      const auto it = std::lower_bound(finest.nodes.begin(), finest.nodes.end(),
                                       x - 1e-12);
      if (it == finest.nodes.end() || std::abs(*it - x) > 1e-12) {
        throw NumericError("Gauss-Patterson family is not nested");
      }
      node_ids[static_cast<std::size_t>(l)].push_back(
          static_cast<int>(it - finest.nodes.begin()));
    }
  }

  std::map<std::vector<int>, double> accum;
  std::vector<int> key(static_cast<std::size_t>(dim));
  for_each_level_index(
      dim, std::max(0, level - dim + 1), level,
      [&](const std::vector<int>& lv, int sum) {
        const int gap = level - sum;
        const double coef = ((gap % 2) ? -1.0 : 1.0) *
                            static_cast<double>(binomial(dim - 1, gap));
        // Odometer over the tensor product of the 1D rules.
        std::vector<std::size_t> pos(static_cast<std::size_t>(dim), 0);
        while (true) {
          double w = coef;
          for (int i = 0; i < dim; ++i) {
            const auto l = static_cast<std::size_t>(lv[static_cast<std::size_t>(i)]);
            const auto p = pos[static_cast<std::size_t>(i)];
            key[static_cast<std::size_t>(i)] = node_ids[l][p];
            w *= 0.5 * gauss_patterson(static_cast<int>(l)).weights[p];
          }
          accum[key] += w;
          int i = 0;
          for (; i < dim; ++i) {
            const auto l = static_cast<std::size_t>(lv[static_cast<std::size_t>(i)]);
            if (++pos[static_cast<std::size_t>(i)] < node_ids[l].size()) break;
            pos[static_cast<std::size_t>(i)] = 0;
          }
          if (i == dim) break;
        }
      });

  SparseQuadrature quad;
  quad.level = level;
  quad.nodes.resize(static_cast<Eigen::Index>(accum.size()), dim);
  quad.weights.resize(static_cast<Eigen::Index>(accum.size()));
  Eigen::Index row = 0;
  for (const auto& [ids, w] : accum) {
    for (int i = 0; i < dim; ++i) {
      quad.nodes(row, i) = finest.nodes[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
    }
    quad.weights[row] = w;
    ++row;
  }
  return quad;
}

std::string to_string(DesignKind kind) {
  return kind == DesignKind::smolyak ? "smolyak" : "lhs";
}

DesignKind design_kind_from_string(const std::string& s) {
  if (s == "smolyak") return DesignKind::smolyak;
  if (s == "lhs") return DesignKind::lhs;
  throw ConfigError("unknown design kind '" + s + "' (expected smolyak|lhs)");
}

DesignMatrix lhs_sample(int dim, int n, std::uint64_t seed) {
  if (dim < 1 || n < 1) throw std::invalid_argument("lhs_sample: dim, n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DesignMatrix d;
  d.kind = DesignKind::lhs;
  d.seed = seed;
  d.points.resize(n, dim);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) {
      const double u = unit(rng);
      const double lo = -1.0 + 2.0 * perm[static_cast<std::size_t>(i)] / n;
      const double hi = -1.0 + 2.0 * (perm[static_cast<std::size_t>(i)] + 1) / n;
      // Keep the point inside its half-open stratum.
      d.points(i, j) = std::min(lo + (hi - lo) * u, std::nextafter(hi, lo));
    }
  }
  return d;
}

DesignMatrix design_from_quadrature(const SparseQuadrature& quad) {
  DesignMatrix d;
  d.kind = DesignKind::smolyak;
  d.points = quad.nodes;
  d.weights = quad.weights;
  d.level = quad.level;
  return d;
}

}  // namespace slipuq
