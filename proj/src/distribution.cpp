#include "aqis/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace aqis {

double Distribution::total() const {
  double s = 0.0;
  for (double p : probabilities) s += p;
  return s;
}

double Distribution::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += support[i] * probabilities[i];
  return s;
}

double Distribution::mass_below(double threshold) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] < threshold) s += probabilities[i];
  return s;
}

double Distribution::mass_above(double threshold) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] > threshold) s += probabilities[i];
  return s;
}

Distribution Distribution::from_pairs(std::vector<std::pair<double, double>> pairs,
                                      double merge_tolerance) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  Distribution out;
  for (const auto& [value, weight] : pairs) {
    if (!out.support.empty() && value - out.support.back() <= merge_tolerance) {
      out.probabilities.back() += weight;
    } else {
      out.support.push_back(value);
      out.probabilities.push_back(weight);
    }
  }
  return out;
}

double total_variation(const Distribution& a, const Distribution& b, double tolerance) {
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < a.support.size() || j < b.support.size()) {
    if (j == b.support.size() ||
        (i < a.support.size() && a.support[i] < b.support[j] - tolerance)) {
      s += std::abs(a.probabilities[i++]);
    } else if (i == a.support.size() || b.support[j] < a.support[i] - tolerance) {
      s += std::abs(b.probabilities[j++]);
    } else {
      s += std::abs(a.probabilities[i++] - b.probabilities[j++]);
    }
  }
  return 0.5 * s;
}

}  // namespace aqis
