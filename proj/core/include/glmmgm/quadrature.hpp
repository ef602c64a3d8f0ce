#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace glmmgm {

/// m-point Gauss-Hermite rule for the weight exp(-x^2) (physicists'
/// convention). Weights sum to sqrt(pi); nodes are symmetric about zero and
/// sorted ascending.
struct GHRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

inline constexpr int kDefaultGhNodes = 25;

/// Golub-Welsch eigen-decomposition followed by Newton polishing of each node
/// on the orthonormal Hermite recurrence. Throws std::invalid_argument for
/// m < 1.
GHRule gh_rule(int m);

/// Cached kDefaultGhNodes-point rule.
const GHRule& default_gh_rule();

/// Filled by expect_over_normal when the integrand is non-finite at a node.
struct QuadratureDiagnostic {
  bool finite = true;
  std::optional<double> bad_point;
};

/// E f(b) for b ~ N(0, sigma2) using the non-adaptive rule
/// (1/sqrt(pi)) sum_k w_k f(sqrt(2 sigma2) x_k). sigma2 == 0 returns f(0)
/// exactly. A non-finite integrand value propagates into the result and is
/// recorded in `diag`.
template <class F>
double expect_over_normal(F&& f, double sigma2, const GHRule& rule,
                          QuadratureDiagnostic* diag = nullptr) {
  if (!(sigma2 >= 0.0)) throw std::domain_error("expect_over_normal: sigma2 must be >= 0");
  auto record = [&](double value, double at) {
    if (diag && !std::isfinite(value) && diag->finite) {
      diag->finite = false;
      diag->bad_point = at;
    }
  };
  if (sigma2 == 0.0) {
    const double v = f(0.0);
    record(v, 0.0);
    return v;
  }
  const double scale = std::sqrt(2.0 * sigma2);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double b = scale * rule.nodes[k];
    const double v = f(b);
    record(v, b);
    sum += rule.weights[k] * v;
  }
  return sum / std::sqrt(std::numbers::pi);
}

/// E logistic(eta0 + b), b ~ N(0, sigma2).
double logistic_normal_integral(double eta0, double sigma2,
                                const GHRule& rule = default_gh_rule());

inline constexpr double kZegerFactor = 0.346;

/// c = (1 + 0.346 sigma2)^{-1/2}.
double zeger_constant(double sigma2);

/// Closed-form surrogate logistic(c * eta0) for the logistic-normal integral.
double zeger_mean(double eta0, double sigma2);

/// 8-point Gauss-Legendre rule on [-1, 1].
struct LegendreRule {
  std::array<double, 8> nodes;
  std::array<double, 8> weights;
};
const LegendreRule& legendre8();

/// Above this spread the integrand exp(g) is a wide Gaussian-like envelope
/// times link-scale features of unit width, which a Gauss-Hermite rule with
/// nodes about scale apart cannot resolve. Both canonical links have their
/// nearest complex singularity at distance pi from the real axis, so 8-point
/// panels of width 2 stay accurate to near machine precision.
inline constexpr double kWideScale = 1.0;

/// log of the integral of exp(g(u)) du centred at `center` with spread
/// `scale` (typically the mode and 1/sqrt(-g''(mode))).
///
/// For scale <= kWideScale this is the adaptive Gauss-Hermite rule
///   log( sqrt(2) scale sum_k w_k exp(x_k^2) exp(g(center + sqrt(2) scale x_k)) ).
/// Wider integrands use composite 8-point Gauss-Legendre panels of width at
/// most 2 on center +/- 8 max(scale, spread), where `spread` bounds the
/// width of exp(g) (for a log-concave likelihood times a N(0, sigma2) prior,
/// sigma).
///
/// `points` receives the abscissae and `log_terms` the per-point log
/// contributions less log(sqrt(2) scale), so that exp(log_terms - (result -
/// log(sqrt(2) scale))) are the normalised posterior weights of the points.
template <class G>
double adaptive_log_integral(G&& g, double center, double scale, const GHRule& rule,
                             std::vector<double>& log_terms, std::vector<double>& points,
                             double spread = 0.0) {
  const double log_offset = std::log(std::numbers::sqrt2 * scale);
  double max_term = -std::numeric_limits<double>::infinity();
  if (scale > kWideScale && std::isfinite(scale)) {
    const LegendreRule& gl = legendre8();
    const double half = 8.0 * std::max(scale, std::isfinite(spread) ? spread : 0.0);
    const auto panels = static_cast<std::size_t>(std::ceil(half));
    const double h = 2.0 * half / static_cast<double>(panels);
    log_terms.resize(panels * gl.nodes.size());
    points.resize(log_terms.size());
    std::size_t k = 0;
    for (std::size_t p = 0; p < panels; ++p) {
      const double mid = center - half + (static_cast<double>(p) + 0.5) * h;
      for (std::size_t j = 0; j < gl.nodes.size(); ++j, ++k) {
        const double u = mid + 0.5 * h * gl.nodes[j];
        points[k] = u;
        log_terms[k] = std::log(0.5 * h * gl.weights[j]) - log_offset + g(u);
        if (log_terms[k] > max_term) max_term = log_terms[k];
      }
    }
  } else {
    const std::size_t m = rule.size();
    log_terms.resize(m);
    points.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double x = rule.nodes[k];
      const double u = center + std::numbers::sqrt2 * scale * x;
      points[k] = u;
      log_terms[k] = std::log(rule.weights[k]) + x * x + g(u);
      if (log_terms[k] > max_term) max_term = log_terms[k];
    }
  }
  if (!std::isfinite(max_term)) return max_term;
  double sum = 0.0;
  for (double t : log_terms) sum += std::exp(t - max_term);
  return log_offset + max_term + std::log(sum);
}

}  // namespace glmmgm
