#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tasign/ingest.hpp"

namespace tasign {

/// The 23 time functions, in row order of the channel matrix.
enum class Channel : int {
  X = 0,
  Y,
  P,
  THETA,
  V,
  RHO,
  A,
  dX,
  dY,
  dP,
  dTHETA,
  dV,
  dRHO,
  dA,
  ddX,
  ddY,
  VRATIO5,
  ALPHA,
  dALPHA,
  SIN,
  COS,
  RATIO5,
  RATIO7,
};

inline constexpr int kNumChannels = 23;

constexpr int index(Channel c) { return static_cast<int>(c); }
std::string_view channel_name(Channel c);
std::optional<Channel> parse_channel(std::string_view name);
/// Comma-separated channel names, e.g. "dX,dY". "all" selects every channel.
std::vector<Channel> parse_channel_list(std::string_view list);

/// Clamp for the curvature-radius singularity (straight segments, stalls).
inline constexpr double kCurvatureEps = 1e-6;
/// Clamp for window ratios whose bounding box has zero width.
inline constexpr double kWindowEps = 1e-6;
inline constexpr double kConstantChannelStd = 1e-12;

struct SignatureMeta {
  std::string user_id;
  int session = 1;
  std::string device;
  InputKind input_kind = InputKind::Stylus;
  Label label = Label::Genuine;
};

struct TimeFunctionSet {
  Eigen::MatrixXd channels;  // kNumChannels x T, one column per sample
  bool normalized = false;
  SignatureMeta meta;

  Eigen::Index length() const { return channels.cols(); }
  auto row(Channel c) const { return channels.row(index(c)); }
  auto row(Channel c) { return channels.row(index(c)); }
};

/// Five-point regression derivative; the two samples at each end copy the nearest
/// interior value. Requires at least 5 samples.
std::vector<double> derivative(std::span<const double> series);

/// Same regression with each pairwise difference wrapped into (-pi, pi], for angles.
std::vector<double> angle_derivative(std::span<const double> series);

double wrap_angle(double a);

/// The 23 channels (rows) of real-valued x, y, p series. Requires at least 7 samples.
Eigen::MatrixXd compute_time_functions(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> p);

TimeFunctionSet extract_time_functions(const RawSignature& sig);

/// Per-channel z-score with population std; channels with std < 1e-12 become all-zero.
TimeFunctionSet normalize(const TimeFunctionSet& tf);

/// Zeroes P and dP, the channels unavailable for finger input.
TimeFunctionSet zero_pressure_channels(const TimeFunctionSet& tf);

/// Tab-separated dump: a header row of channel names, then one row per sample.
std::string format_channels(const Eigen::MatrixXd& channels);

}  // namespace tasign
