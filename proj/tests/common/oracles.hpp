#pragma once

// Independent reference computations used as test oracles.

#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

// Pearson chi-square statistic of counts against expected proportions.
inline double chi_square(const std::vector<std::size_t>& counts, const std::vector<double>& expected_share) {
  double n = 0;
  for (auto c : counts) n += static_cast<double>(c);
  double stat = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * expected_share[i];
    if (e == 0) continue;
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  return stat;
}

inline bool chi_square_accepts(const std::vector<std::size_t>& counts, const std::vector<double>& expected_share,
                               double alpha = 0.01) {
  std::size_t cells = 0;
  for (double s : expected_share) cells += s > 0;
  boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return chi_square(counts, expected_share) <= boost::math::quantile(boost::math::complement(dist, alpha));
}

inline bool chi_square_uniform(const std::vector<std::size_t>& counts, double alpha = 0.01) {
  return chi_square_accepts(counts, std::vector<double>(counts.size(), 1.0 / counts.size()), alpha);
}

struct SumsOfSquares {
  long double ssb = 0, ssw = 0;
  int df_b = 0, df_w = 0;
  long double f() const { return (ssb / df_b) / (ssw / df_w); }
};

// Textbook two-pass computation from explicit group lists.
inline SumsOfSquares brute_force_anova(const std::vector<std::vector<double>>& groups) {
  long double total = 0;
  std::size_t n = 0;
  for (const auto& g : groups)
    for (double v : g) total += v, ++n;
  const long double grand = total / n;
  SumsOfSquares out;
  int nonempty = 0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    ++nonempty;
    long double s = 0;
    for (double v : g) s += v;
    const long double m = s / g.size();
    out.ssb += g.size() * (m - grand) * (m - grand);
    for (double v : g) out.ssw += (v - m) * (v - m);
  }
  out.df_b = nonempty - 1;
  out.df_w = static_cast<int>(n) - nonempty;
  return out;
}

// Pooled-variance two-sample t statistic.
inline double two_sample_t(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const long double ma = mean(a), mb = mean(b);
  long double sa = 0, sb = 0;
  for (double x : a) sa += (x - ma) * (x - ma);
  for (double x : b) sb += (x - mb) * (x - mb);
  const long double pooled = (sa + sb) / (a.size() + b.size() - 2);
  return static_cast<double>((ma - mb) / std::sqrt(pooled * (1.0L / a.size() + 1.0L / b.size())));
}

}  // namespace oracle
