#pragma once

// Hand-built envelopes with the exact peak sets and S1/S2 labels the
// detection rules must produce. Shared by the unit tests and the acceptance
// runner.

#include "phonotrack/segmentation.hpp"

#include <string>
#include <vector>

namespace fixtures {

struct PeakFixture {
  std::string name;
  std::vector<double> envelope;
  double rate_hz = 100.0;
  std::vector<std::size_t> expected_indices;
  /// Empty when fewer than three peaks survive (labeling not applicable).
  std::vector<phonotrack::PeakLabel> expected_labels;
};

/// Zero envelope with unit-slope triangles of the given half-width (samples)
/// and heights at the given sample indices.
inline std::vector<double> triangles(std::size_t n, const std::vector<std::size_t>& centres,
                                     const std::vector<double>& heights, std::size_t half_width = 3) {
  std::vector<double> e(n, 0.0);
  for (std::size_t k = 0; k < centres.size(); ++k) {
    for (std::size_t d = 0; d < half_width; ++d) {
      const double v = heights[k] * static_cast<double>(half_width - d) / static_cast<double>(half_width);
      if (centres[k] >= d) e[centres[k] - d] = std::max(e[centres[k] - d], v);
      if (centres[k] + d < n) e[centres[k] + d] = std::max(e[centres[k] + d], v);
    }
  }
  return e;
}

inline std::vector<PeakFixture> peak_fixtures() {
  using phonotrack::PeakLabel;
  const auto S1 = PeakLabel::S1, S2 = PeakLabel::S2;
  std::vector<PeakFixture> f;
  f.push_back({"height threshold drops a 0.1 bump", {0, 1, 0, 0.1, 0, 0.9, 0}, 10.0, {1, 5}, {}});
  f.push_back({"two unit peaks 50 ms apart keep one", triangles(60, {20, 25}, {1.0, 1.0}, 2), 100.0, {20}, {}});
  f.push_back({"taller neighbour wins inside 125 ms", triangles(100, {20, 30, 60}, {0.6, 1.0, 0.8}, 2), 100.0,
               {30, 60}, {}});
  f.push_back({"peaks exactly 125 ms apart both survive", triangles(800, {100, 225, 500}, {1.0, 0.9, 0.8}, 20),
               1000.0, {100, 225, 500}, {S1, S2, S1}});
  f.push_back({"plateau reports its centre", {0, 0.2, 1, 1, 1, 0.2, 0, 0, 0, 0, 0, 0.5, 0.5, 0}, 10.0, {3, 11}, {}});
  f.push_back({"systole first: S1,S2,S1,S2", triangles(140, {0 + 5, 35, 85, 115}, {1.0, 0.7, 0.95, 0.65}), 100.0,
               {5, 35, 85, 115}, {S1, S2, S1, S2}});
  f.push_back({"diastole first: S2,S1,S2,S1", triangles(140, {5, 55, 85, 135}, {0.7, 1.0, 0.6, 0.9}), 100.0,
               {5, 55, 85, 135}, {S2, S1, S2, S1}});
  f.push_back({"equal gaps label S1 first", triangles(100, {5, 45, 85}, {1.0, 1.0, 1.0}), 100.0, {5, 45, 85},
               {S1, S2, S1}});
  f.push_back({"labels alternate strictly after the first gap",
               triangles(300, {10, 40, 90, 125, 170, 200, 250}, {1, 0.6, 0.9, 0.5, 1, 0.7, 0.8}), 100.0,
               {10, 40, 90, 125, 170, 200, 250}, {S1, S2, S1, S2, S1, S2, S1}});
  return f;
}

}  // namespace fixtures
