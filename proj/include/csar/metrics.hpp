#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "csar/csar_trainer.hpp"

namespace csar {

// Percentage of successful picks.
inline double success_rate(int successes, int iterations) {
  if (iterations < 1) throw std::invalid_argument("success_rate: iterations must be >= 1");
  if (successes < 0 || successes > iterations)
    throw std::invalid_argument("success_rate: successes must be in [0, iterations]");
  return 100.0 * static_cast<double>(successes) / static_cast<double>(iterations);
}

// Rolling success rate (fraction) over the trailing `window` entries ending at
// index i inclusive.
inline double rolling_fraction(const std::vector<bool>& successes, std::size_t i, int window) {
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
  int hits = 0;
  for (std::size_t k = lo; k <= i; ++k) hits += successes[k] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(i + 1 - lo);
}

// First step whose full rolling window reaches `threshold` percent. Steps
// before the window has filled are ignored, so threshold 0 gives the step at
// which the first window completes.
inline std::optional<int> steps_to_threshold(const std::vector<int>& steps,
                                             const std::vector<bool>& successes, int window,
                                             double threshold) {
  if (steps.size() != successes.size())
    throw std::invalid_argument("steps_to_threshold: column lengths differ");
  if (window < 1) throw std::invalid_argument("steps_to_threshold: window must be >= 1");
  int hits = 0;
  for (std::size_t i = 0; i < successes.size(); ++i) {
    hits += successes[i] ? 1 : 0;
    if (i >= static_cast<std::size_t>(window)) hits -= successes[i - static_cast<std::size_t>(window)] ? 1 : 0;
    if (i + 1 < static_cast<std::size_t>(window)) continue;
    if (success_rate(hits, window) >= threshold) return steps[i];
  }
  return std::nullopt;
}

inline std::optional<int> steps_to_threshold(const TrainLog& log, int agent, double threshold) {
  std::vector<int> steps;
  std::vector<bool> successes;
  for (const auto& r : log.records) {
    if (r.agent != agent) continue;
    steps.push_back(r.step);
    successes.push_back(r.success);
  }
  return steps_to_threshold(steps, successes, log.window, threshold);
}

// Linear-interpolated quantile (type 7), q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

struct SignTest {
  int wins = 0;    // pairs where the first sample is strictly smaller
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;  // one-sided, ties dropped
};

// One-sided exact sign test of "a tends to be smaller than b" over pairs.
inline SignTest sign_test_less(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sign_test_less: samples differ in size");
  SignTest s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) ++s.wins;
    else if (a[i] > b[i]) ++s.losses;
    else ++s.ties;
  }
  const int n = s.wins + s.losses;
  if (n == 0) return s;
  // P(X >= wins), X ~ Binomial(n, 1/2).
  double p = 0.0;
  for (int k = s.wins; k <= n; ++k)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                  n * std::log(2.0));
  s.p_value = std::min(1.0, p);
  return s;
}

}  // namespace csar
