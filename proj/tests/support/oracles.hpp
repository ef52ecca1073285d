#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sensekit::testing {

/// Central difference of f along coordinate x[i].
inline double central_difference(std::vector<double>& x, std::size_t i,
                                 const std::function<double()>& f, double h = 1e-5) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is numerically zero from dominating the maximum.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Rand-index pair counting over all C(n,2) pairs, then the chance
/// correction written out from pair counts.
inline double ari_pairs(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += (sa && sb) ? 1 : 0;
      in_a += sa ? 1 : 0;
      in_b += sb ? 1 : 0;
      pairs += 1;
    }
  }
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

/// Ranks by counting: rank = 1 + #smaller + (#equal - 1)/2.
inline std::vector<double> count_ranks(std::span<const double> xs) {
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double y : xs) {
      if (y < xs[i]) smaller += 1;
      if (y == xs[i]) equal += 1;
    }
    r[i] = 1.0 + smaller + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double num = 0, dx2 = 0, dy2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    dx2 += (x[i] - mx) * (x[i] - mx);
    dy2 += (y[i] - my) * (y[i] - my);
  }
  return num / std::sqrt(dx2 * dy2);
}

inline double spearman_oracle(std::span<const double> x, std::span<const double> y) {
  auto rx = count_ranks(x);
  auto ry = count_ranks(y);
  return pearson(rx, ry);
}

/// Plain softmax with no max subtraction; fine for the small logits tests use.
inline std::vector<double> naive_softmax(std::span<const double> z, double t = 1.0) {
  std::vector<double> p(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] / t);
  for (auto& x : p) x /= s;
  return p;
}

// High-precision constants (30-digit mpmath evaluations, rounded to double).
inline constexpr double kUnigram8 = 0.826293243415818346;       // 8^.75 / (8^.75 + 1)
inline constexpr double kSoftmax10 = 0.731058578630004879;      // e / (e + 1)
inline constexpr double kSoftmax200Top = 0.786986042161598499;  // e^2 / (e^2 + 2)
inline constexpr double kSoftmax200Low = 0.106506978919200751;  // 1 / (e^2 + 2)
inline constexpr double kSixteenLn3 = 17.5777966186897550;
inline constexpr double kThreeLn2 = 2.07944154167983593;

}  // namespace sensekit::testing
