#pragma once

#include <vector>

namespace aqis {

/// Discrete probability distribution over a strictly increasing support.
struct Distribution {
  std::vector<double> support;
  std::vector<double> probabilities;

  double total() const;
  double mean() const;
  /// Probability mass on support values strictly below (above) `threshold`.
  double mass_below(double threshold) const;
  double mass_above(double threshold) const;

  /// Builds a distribution from unsorted (value, weight) pairs, merging values
  /// closer than `merge_tolerance`.
  static Distribution from_pairs(std::vector<std::pair<double, double>> pairs,
                                 double merge_tolerance);
};

/// 0.5 * sum |p - q| over the union of supports (values matched within tolerance).
double total_variation(const Distribution& a, const Distribution& b, double tolerance);

}  // namespace aqis
