#include "doelens/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace doelens {
namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int max_iter = 10000;
  constexpr double eps = 1e-16;
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

void check_f_args(double x, int d1, int d2) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("F distribution needs positive degrees of freedom");
  if (!std::isfinite(x)) throw std::invalid_argument("F distribution argument must be finite");
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void LossTable::add(double loss, FactorSetting setting) {
  losses.push_back(loss);
  settings.push_back(std::move(setting));
}

LossTable per_sample_losses(const nnet::ModelParams& params, const Dataset& data) {
  const auto ev = nnet::evaluate(params, data);
  LossTable table;
  table.space = data.space;
  table.losses = ev.loss;
  table.settings.reserve(data.size());
  for (const auto& s : data.samples) table.settings.push_back(s.setting);
  return table;
}

AnovaResult anova_groups(std::span<const double> values, std::span<const int> groups, int group_count) {
  if (values.size() != groups.size()) throw std::invalid_argument("values/groups size mismatch");
  // Shifting by one observation keeps constant groups exactly constant.
  const double shift = values.empty() ? 0.0 : values[0];
  double scale = 0.0;
  std::vector<double> sum(group_count, 0.0);
  std::vector<std::size_t> count(group_count, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("ANOVA values must be finite");
    const int g = groups[i];
    if (g < 0 || g >= group_count) throw std::invalid_argument("group label out of range");
    sum[g] += values[i] - shift;
    scale = std::max(scale, std::abs(values[i]));
    ++count[g];
  }
  const int nonempty = static_cast<int>(std::count_if(count.begin(), count.end(), [](auto c) { return c > 0; }));
  if (nonempty < 2) throw std::invalid_argument("ANOVA needs at least two nonempty groups");
  const auto n = static_cast<long>(values.size());
  if (n - nonempty < 1) throw std::invalid_argument("ANOVA needs within-group degrees of freedom");

  std::vector<double> mean(group_count, 0.0);
  double grand = 0.0;
  for (int g = 0; g < group_count; ++g) {
    grand += sum[g];
    if (count[g]) mean[g] = sum[g] / static_cast<double>(count[g]);
  }
  grand /= static_cast<double>(n);

  AnovaResult r;
  for (int g = 0; g < group_count; ++g)
    if (count[g]) r.ss_between += static_cast<double>(count[g]) * (mean[g] - grand) * (mean[g] - grand);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - shift - mean[groups[i]];
    r.ss_within += d * d;
  }
  // Sums of squares below accumulated rounding error are zero.
  const double ulp = 16.0 * std::numeric_limits<double>::epsilon() * scale;
  const double floor = static_cast<double>(n) * ulp * ulp;
  if (r.ss_within <= floor) r.ss_within = 0.0;
  if (r.ss_between <= floor) r.ss_between = 0.0;
  r.df_between = nonempty - 1;
  r.df_within = static_cast<int>(n - nonempty);
  if (r.ss_within == 0.0) {
    if (r.ss_between == 0.0) {
      r.f = 0.0;
      r.p_raw = 1.0;
    } else {
      r.f = std::numeric_limits<double>::infinity();
      r.p_raw = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.f = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
  r.p_raw = f_sf(r.f, r.df_between, r.df_within);
  return r;
}

AnovaResult anova_one_way(const LossTable& table, std::size_t factor_index) {
  if (factor_index >= table.space.size()) throw std::out_of_range("factor index out of range");
  std::vector<int> groups;
  groups.reserve(table.size());
  for (const auto& s : table.settings) groups.push_back(s[factor_index]);
  return anova_groups(table.losses, groups, table.space[factor_index].level_count);
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x > (a + 1.0) / (a + b + 2.0))
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
  return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
}

double f_cdf(double x, int d1, int d2) {
  check_f_args(x, d1, d2);
  if (x <= 0.0) return 0.0;
  const double t = d1 * x / (d1 * x + d2);
  return regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, t);
}

double f_sf(double x, int d1, int d2) {
  check_f_args(x, d1, d2);
  if (x <= 0.0) return 1.0;
  const double t = d2 / (d2 + d1 * x);
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, t);
}

std::vector<double> holm_thresholds(std::size_t k, double alpha) {
  std::vector<double> t(k);
  for (std::size_t i = 0; i < k; ++i) t[i] = alpha / static_cast<double>(k - i);
  return t;
}

std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha) {
  const std::size_t k = p_values.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p_values[a] < p_values[b]; });
  const auto thresholds = holm_thresholds(k, alpha);
  std::vector<bool> reject(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(p_values[order[i]] <= thresholds[i])) break;
    reject[order[i]] = true;
  }
  return reject;
}

const FactorSensitivity& SensitivityProfile::at(std::string_view name) const {
  for (const auto& f : factors)
    if (f.factor == name) return f;
  throw std::out_of_range("profile has no factor '" + std::string(name) + "'");
}

SensitivityProfile audit_losses(const LossTable& table, double alpha) {
  if (table.size() == 0) throw std::invalid_argument("cannot audit an empty loss table");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0, 1)");
  SensitivityProfile profile;
  profile.alpha = alpha;
  std::vector<double> family;
  std::vector<std::size_t> family_index;
  for (std::size_t f = 0; f < table.space.size(); ++f) {
    FactorSensitivity fs;
    fs.factor = table.space[f].name;
    fs.role = table.space[f].role;
    try {
      const auto r = anova_one_way(table, f);
      fs.f = r.f;
      fs.df_between = r.df_between;
      fs.df_within = r.df_within;
      fs.p_raw = r.p_raw;
      fs.degenerate = r.degenerate;
      family.push_back(r.p_raw);
      family_index.push_back(f);
    } catch (const std::invalid_argument&) {
      fs.testable = false;
      fs.f = std::numeric_limits<double>::quiet_NaN();
      fs.p_raw = std::numeric_limits<double>::quiet_NaN();
    }
    profile.factors.push_back(std::move(fs));
  }
  const auto flags = holm_bonferroni(family, alpha);
  for (std::size_t i = 0; i < flags.size(); ++i) profile.factors[family_index[i]].significant = flags[i];
  return profile;
}

SensitivityProfile run_audit(const nnet::ModelParams& params, const Dataset& data, double alpha) {
  if (data.empty()) throw std::invalid_argument("cannot audit an empty dataset");
  return audit_losses(per_sample_losses(params, data), alpha);
}

std::string significance_stars(double p_raw, bool significant) {
  if (!significant) return "n.s.";
  if (p_raw <= 0.001) return "***";
  if (p_raw <= 0.01) return "**";
  if (p_raw <= 0.05) return "*";
  return "sig";
}

std::string format_4g(double v) {
  if (std::isnan(v)) return "-";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

nlohmann::json to_json(const SensitivityProfile& profile) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : profile.factors) {
    factors.push_back({{"factor", f.factor},
                       {"role", to_string(f.role)},
                       {"F", number_or_null(f.f)},
                       {"df_between", f.df_between},
                       {"df_within", f.df_within},
                       {"p_raw", number_or_null(f.p_raw)},
                       {"significant", f.significant},
                       {"degenerate", f.degenerate},
                       {"testable", f.testable}});
  }
  return {{"alpha", profile.alpha}, {"correction", "holm"}, {"factors", std::move(factors)}};
}

SensitivityProfile profile_from_json(const nlohmann::json& j) {
  SensitivityProfile p;
  p.alpha = j.at("alpha").get<double>();
  for (const auto& f : j.at("factors")) {
    FactorSensitivity fs;
    fs.factor = f.at("factor").get<std::string>();
    fs.role = parse_factor_role(f.at("role").get<std::string>());
    fs.degenerate = f.at("degenerate").get<bool>();
    fs.testable = f.at("testable").get<bool>();
    const double missing = fs.degenerate ? std::numeric_limits<double>::infinity()
                                         : std::numeric_limits<double>::quiet_NaN();
    fs.f = f.at("F").is_null() ? missing : f.at("F").get<double>();
    fs.p_raw = f.at("p_raw").is_null() ? std::numeric_limits<double>::quiet_NaN() : f.at("p_raw").get<double>();
    fs.df_between = f.at("df_between").get<int>();
    fs.df_within = f.at("df_within").get<int>();
    fs.significant = f.at("significant").get<bool>();
    p.factors.push_back(std::move(fs));
  }
  return p;
}

std::string format_profile_table(const SensitivityProfile& profile) {
  std::size_t width = 6;
  for (const auto& f : profile.factors) width = std::max(width, f.factor.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %-8s  %10s  %9s  %10s  %-5s\n", static_cast<int>(width), "Factor", "Role", "F",
                "df", "p_raw", "Sig.");
  os << line;
  for (const auto& f : profile.factors) {
    const std::string df = std::to_string(f.df_between) + "," + std::to_string(f.df_within);
    std::snprintf(line, sizeof line, "%-*s  %-8s  %10s  %9s  %10s  %-5s\n", static_cast<int>(width), f.factor.c_str(),
                  std::string(to_string(f.role)).c_str(), format_4g(f.f).c_str(), f.testable ? df.c_str() : "-",
                  format_4g(f.p_raw).c_str(), f.testable ? significance_stars(f.p_raw, f.significant).c_str() : "untestable");
    os << line;
  }
  return os.str();
}

}  // namespace doelens
