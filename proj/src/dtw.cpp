#include "tasign/dtw.hpp"

#include <algorithm>
#include <cmath>

#include "tasign/error.hpp"

namespace tasign {

namespace {

void check_channels(const std::vector<Channel>& channels) {
  if (channels.empty()) fail(ErrorKind::Configuration, "DTW needs at least one cost channel");
}

double cell_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                 const std::vector<Channel>& channels, Eigen::Index i, Eigen::Index j) {
  double acc = 0.0;
  for (auto c : channels) {
    const double d = a(index(c), i) - b(index(c), j);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

std::vector<Channel> default_cost_channels() { return {Channel::dX, Channel::dY}; }

Eigen::MatrixXd local_cost_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const std::vector<Channel>& channels, Exec exec) {
  check_channels(channels);
  const Eigen::Index ta = a.cols(), tb = b.cols();
  // Row-major so each thread writes a contiguous stripe.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cost(ta, tb);
  if (exec == Exec::Serial) {
    for (Eigen::Index i = 0; i < ta; ++i)
      for (Eigen::Index j = 0; j < tb; ++j) cost(i, j) = cell_cost(a, b, channels, i, j);
  } else {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < ta; ++i)
      for (Eigen::Index j = 0; j < tb; ++j) cost(i, j) = cell_cost(a, b, channels, i, j);
  }
  return cost;
}

Eigen::MatrixXd accumulate_costs(const Eigen::MatrixXd& cost) {
  const Eigen::Index ta = cost.rows(), tb = cost.cols();
  Eigen::MatrixXd acc(ta, tb);
  acc(0, 0) = cost(0, 0);
  for (Eigen::Index j = 1; j < tb; ++j) acc(0, j) = acc(0, j - 1) + cost(0, j);
  for (Eigen::Index i = 1; i < ta; ++i) {
    acc(i, 0) = acc(i - 1, 0) + cost(i, 0);
    for (Eigen::Index j = 1; j < tb; ++j) {
      acc(i, j) = cost(i, j) + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
    }
  }
  return acc;
}

WarpingPath backtrack(const Eigen::MatrixXd& accumulated) {
  WarpingPath path;
  path.length_a = static_cast<int>(accumulated.rows());
  path.length_b = static_cast<int>(accumulated.cols());
  int i = path.length_a - 1, j = path.length_b - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = accumulated(i - 1, j - 1);
      const double up = accumulated(i - 1, j);
      const double left = accumulated(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

DtwResult dtw_path(const TimeFunctionSet& a, const TimeFunctionSet& b,
                   const std::vector<Channel>& cost_channels, Exec exec) {
  check_channels(cost_channels);
  if (a.length() < 1 || b.length() < 1) fail(ErrorKind::Degenerate, "DTW on an empty sequence");
  const auto acc = accumulate_costs(local_cost_matrix(a.channels, b.channels, cost_channels, exec));
  DtwResult result;
  result.distance = acc(acc.rows() - 1, acc.cols() - 1);
  result.path = backtrack(acc);
  return result;
}

void validate_path(const WarpingPath& path, int length_a, int length_b) {
  auto bad = [](const std::string& why) { fail(ErrorKind::PathMismatch, "invalid warping path: " + why); };
  if (path.length_a != length_a || path.length_b != length_b) bad("lengths differ from inputs");
  if (path.pairs.empty()) bad("empty");
  if (path.pairs.front() != std::pair{0, 0}) bad("does not start at (0,0)");
  if (path.pairs.back() != std::pair{length_a - 1, length_b - 1}) bad("does not end at the corner");
  for (std::size_t k = 1; k < path.pairs.size(); ++k) {
    const int di = path.pairs[k].first - path.pairs[k - 1].first;
    const int dj = path.pairs[k].second - path.pairs[k - 1].second;
    if (di < 0 || dj < 0 || di > 1 || dj > 1 || di + dj == 0) {
      bad("step " + std::to_string(k) + " is not (1,0), (0,1) or (1,1)");
    }
  }
}

AlignedPair apply_path(const TimeFunctionSet& a, const TimeFunctionSet& b,
                       const WarpingPath& path) {
  validate_path(path, static_cast<int>(a.length()), static_cast<int>(b.length()));
  const auto n = static_cast<Eigen::Index>(path.size());
  AlignedPair out;
  out.a.resize(a.channels.rows(), n);
  out.b.resize(b.channels.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.a.col(k) = a.channels.col(path.pairs[k].first);
    out.b.col(k) = b.channels.col(path.pairs[k].second);
  }
  out.path = path;
  return out;
}

double dtw_score(const TimeFunctionSet& a, const TimeFunctionSet& b,
                 const std::vector<Channel>& cost_channels) {
  const auto r = dtw_path(a, b, cost_channels, Exec::Serial);
  return r.distance / static_cast<double>(r.path.size());
}

}  // namespace tasign
