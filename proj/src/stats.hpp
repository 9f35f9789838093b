#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tracklens::stats {

// Lower of the two middle values for even-length input, so the result is
// always an observed value. Throws on empty input.
double median_lower(std::span<const double> values);
std::size_t median_lower(std::span<const std::size_t> values);

struct CdfPoint {
  double x;
  double f;
};

// Right-continuous empirical CDF evaluated at each distinct value.
std::vector<CdfPoint> cdf_series(std::span<const double> values);

struct KsResult {
  double statistic;  // D in [0, 1]
  double p_value;
  double effective_n;  // nA*nB/(nA+nB)
};

// Two-sample KS: D = sup |F_A - F_B|, p from the limiting Kolmogorov
// distribution at sqrt(effective_n) * D.
KsResult ks_test(std::span<const double> a, std::span<const double> b);

// P(K > x) for the Kolmogorov limiting distribution.
double kolmogorov_survival(double x);

// Permutation p-value for D: fraction of `rounds` random relabelings whose
// statistic reaches the observed one (with the +1 correction).
double ks_permutation_p_value(std::span<const double> a, std::span<const double> b,
                              std::size_t rounds, std::uint64_t seed);

double cohens_kappa(std::span<const std::string> labels_a, std::span<const std::string> labels_b);

// median_lower(a) / median_lower(b). Throws when the denominator median is 0.
double median_ratio(std::span<const double> a, std::span<const double> b);

// Ratio rounded to one decimal for presentation tables.
double round_to(double value, int decimals);

}  // namespace tracklens::stats
