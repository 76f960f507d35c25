#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "tasign/features.hpp"
#include "tasign/parallel.hpp"

namespace tasign {

struct WarpingPath {
  std::vector<std::pair<int, int>> pairs;
  int length_a = 0;
  int length_b = 0;

  std::size_t size() const { return pairs.size(); }
};

/// Both sequences resampled along a warping path to a common length L.
struct AlignedPair {
  Eigen::MatrixXd a;  // kNumChannels x L
  Eigen::MatrixXd b;
  WarpingPath path;

  Eigen::Index length() const { return a.cols(); }
};

struct DtwResult {
  double distance = 0.0;
  WarpingPath path;
};

/// The channels driving alignment and the baseline score unless configured otherwise.
std::vector<Channel> default_cost_channels();

/// Local Euclidean costs on the selected channels, Ta x Tb. The Parallel variant
/// splits rows across OpenMP threads and returns the same bits as Serial.
Eigen::MatrixXd local_cost_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const std::vector<Channel>& channels,
                                  Exec exec = Exec::Parallel);

/// Cumulative DP over steps (1,0), (0,1), (1,1) with unit weights.
Eigen::MatrixXd accumulate_costs(const Eigen::MatrixXd& cost);

/// Backtracks one arg-min path from the far corner; ties prefer the diagonal step, then
/// the step that advanced i.
WarpingPath backtrack(const Eigen::MatrixXd& accumulated);

DtwResult dtw_path(const TimeFunctionSet& a, const TimeFunctionSet& b,
                   const std::vector<Channel>& cost_channels, Exec exec = Exec::Parallel);

/// Throws PathMismatch unless the path is a valid warping path for (Ta, Tb).
void validate_path(const WarpingPath& path, int length_a, int length_b);

AlignedPair apply_path(const TimeFunctionSet& a, const TimeFunctionSet& b,
                       const WarpingPath& path);

/// Cumulative cost divided by path length; higher is more dissimilar.
double dtw_score(const TimeFunctionSet& a, const TimeFunctionSet& b,
                 const std::vector<Channel>& cost_channels);

}  // namespace tasign
