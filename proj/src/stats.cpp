#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "error.hpp"

namespace tracklens::stats {

namespace {

template <typename T>
T lower_middle(std::span<const T> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "median of an empty sample");
  std::vector<T> v(values.begin(), values.end());
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// Sorted copies; D by merging the two step functions.
double ks_statistic_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace

double median_lower(std::span<const double> values) { return lower_middle(values); }
std::size_t median_lower(std::span<const std::size_t> values) { return lower_middle(values); }

std::vector<CdfPoint> cdf_series(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "CDF of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  out.back().f = 1.0;
  return out;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (x < 1.18) {
    // Jacobi-theta form converges quickly for small x.
    const double w = std::sqrt(2.0 * pi) / x;
    const double q = std::exp(-pi * pi / (8.0 * x * x));
    double sum = 0.0;
    for (int k = 1; k <= 40; k += 2) {
      const double term = std::pow(q, k * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::clamp(1.0 - w * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kInvalidArgument, "KS test needs two non-empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double d = ks_statistic_sorted(sa, sb);
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  const double en = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(en) * d), en};
}

double ks_permutation_p_value(std::span<const double> a, std::span<const double> b,
                              std::size_t rounds, std::uint64_t seed) {
  const double observed = ks_test(a, b).statistic;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::mt19937_64 rng(seed);
  std::size_t hits = 0;
  std::vector<double> x, y;
  for (std::size_t r = 0; r < rounds; ++r) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    x.assign(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(a.size()));
    y.assign(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (ks_statistic_sorted(x, y) >= observed - 1e-12) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(rounds + 1);
}

double cohens_kappa(std::span<const std::string> labels_a, std::span<const std::string> labels_b) {
  if (labels_a.size() != labels_b.size())
    throw Error(ErrorCode::kInvalidArgument, "kappa needs equal-length label lists");
  if (labels_a.empty()) throw Error(ErrorCode::kInvalidArgument, "kappa of empty label lists");
  const double n = static_cast<double>(labels_a.size());
  std::map<std::string, std::pair<double, double>> marginals;
  double agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) ++agree;
    marginals[labels_a[i]].first += 1;
    marginals[labels_b[i]].second += 1;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, counts] : marginals) p_e += (counts.first / n) * (counts.second / n);
  // Both raters used one identical category throughout: agreement is perfect
  // but chance agreement is too, so the ratio is 0/0.
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

double median_ratio(std::span<const double> a, std::span<const double> b) {
  const double denom = median_lower(b);
  if (denom == 0.0) throw Error(ErrorCode::kInvalidArgument, "median ratio with zero denominator");
  return median_lower(a) / denom;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

}  // namespace tracklens::stats
