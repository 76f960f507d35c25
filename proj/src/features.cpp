#include "tasign/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tasign/error.hpp"

namespace tasign {

namespace {

constexpr std::array<std::string_view, kNumChannels> kNames = {
    "X",  "Y",  "P",   "THETA", "V",       "RHO",   "A",      "dX",
    "dY", "dP", "dTHETA", "dV", "dRHO",    "dA",    "ddX",    "ddY",
    "VRATIO5", "ALPHA", "dALPHA", "SIN", "COS", "RATIO5", "RATIO7"};

template <class Diff>
std::vector<double> regression(std::span<const double> f, Diff diff) {
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  if (n < 5) {
    fail(ErrorKind::Degenerate,
         "derivative needs at least 5 samples, got " + std::to_string(f.size()));
  }
  std::vector<double> d(f.size());
  for (std::ptrdiff_t i = 2; i < n - 2; ++i) {
    d[i] = (diff(f[i + 1], f[i - 1]) + 2.0 * diff(f[i + 2], f[i - 2])) / 10.0;
  }
  d[0] = d[1] = d[2];
  d[n - 1] = d[n - 2] = d[n - 3];
  return d;
}

void set_row(Eigen::MatrixXd& m, Channel c, const std::vector<double>& v) {
  for (Eigen::Index i = 0; i < m.cols(); ++i) m(index(c), i) = v[i];
}

/// Path length over width of the x-extent, for the centered window of `w` samples.
double length_width_ratio(std::span<const double> x, std::span<const double> y,
                          std::ptrdiff_t center, int w) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = w / 2;
  const auto lo = std::max<std::ptrdiff_t>(0, center - half);
  const auto hi = std::min<std::ptrdiff_t>(n - 1, center + half);
  double length = 0.0;
  double xmin = x[lo], xmax = x[lo];
  for (auto k = lo + 1; k <= hi; ++k) {
    length += std::hypot(x[k] - x[k - 1], y[k] - y[k - 1]);
    xmin = std::min(xmin, x[k]);
    xmax = std::max(xmax, x[k]);
  }
  return length / std::max(xmax - xmin, kWindowEps);
}

}  // namespace

std::string_view channel_name(Channel c) { return kNames[index(c)]; }

std::optional<Channel> parse_channel(std::string_view name) {
  for (int i = 0; i < kNumChannels; ++i) {
    if (kNames[i] == name) return static_cast<Channel>(i);
  }
  return std::nullopt;
}

std::vector<Channel> parse_channel_list(std::string_view list) {
  std::vector<Channel> out;
  if (list == "all") {
    for (int i = 0; i < kNumChannels; ++i) out.push_back(static_cast<Channel>(i));
    return out;
  }
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    auto name = list.substr(start, end - start);
    auto c = parse_channel(name);
    if (!c) fail(ErrorKind::Configuration, "unknown channel '" + std::string(name) + "'");
    if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
    start = end + 1;
  }
  return out;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);  // [-pi, pi]
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

std::vector<double> derivative(std::span<const double> series) {
  return regression(series, [](double a, double b) { return a - b; });
}

std::vector<double> angle_derivative(std::span<const double> series) {
  return regression(series, [](double a, double b) { return wrap_angle(a - b); });
}

Eigen::MatrixXd compute_time_functions(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> p) {
  const auto n = x.size();
  if (y.size() != n || p.size() != n) {
    fail(ErrorKind::Configuration, "x, y and p series differ in length");
  }
  if (n < 7) {
    fail(ErrorKind::Degenerate,
         "time functions need at least 7 samples, got " + std::to_string(n));
  }

  const auto dx = derivative(x);
  const auto dy = derivative(y);
  std::vector<double> theta(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = std::atan2(dy[i], dx[i]);
    v[i] = std::sqrt(dx[i] * dx[i] + dy[i] * dy[i]);
  }
  const auto dtheta = angle_derivative(theta);
  const auto dv = derivative(v);

  std::vector<double> rho(n), acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = std::log(std::max(v[i], kCurvatureEps) / std::max(std::abs(dtheta[i]), kCurvatureEps));
    const double normal = v[i] * dtheta[i];
    acc[i] = std::sqrt(dv[i] * dv[i] + normal * normal);
  }

  std::vector<double> vratio(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = i >= 2 ? i - 2 : 0;
    const auto hi = std::min(n - 1, i + 2);
    const auto [mn, mx] = std::minmax_element(v.begin() + lo, v.begin() + hi + 1);
    vratio[i] = *mx > 0.0 ? *mn / *mx : 1.0;
  }

  std::vector<double> alpha(n);
  for (std::size_t i = 0; i + 1 < n; ++i) alpha[i] = std::atan2(y[i + 1] - y[i], x[i + 1] - x[i]);
  alpha[n - 1] = alpha[n - 2];

  std::vector<double> sn(n), cs(n), r5(n), r7(n);
  for (std::size_t i = 0; i < n; ++i) {
    sn[i] = std::sin(alpha[i]);
    cs[i] = std::cos(alpha[i]);
    r5[i] = length_width_ratio(x, y, static_cast<std::ptrdiff_t>(i), 5);
    r7[i] = length_width_ratio(x, y, static_cast<std::ptrdiff_t>(i), 7);
  }

  Eigen::MatrixXd m(kNumChannels, static_cast<Eigen::Index>(n));
  set_row(m, Channel::X, {x.begin(), x.end()});
  set_row(m, Channel::Y, {y.begin(), y.end()});
  set_row(m, Channel::P, {p.begin(), p.end()});
  set_row(m, Channel::THETA, theta);
  set_row(m, Channel::V, v);
  set_row(m, Channel::RHO, rho);
  set_row(m, Channel::A, acc);
  set_row(m, Channel::dX, dx);
  set_row(m, Channel::dY, dy);
  set_row(m, Channel::dP, derivative(p));
  set_row(m, Channel::dTHETA, dtheta);
  set_row(m, Channel::dV, dv);
  set_row(m, Channel::dRHO, derivative(rho));
  set_row(m, Channel::dA, derivative(acc));
  set_row(m, Channel::ddX, derivative(dx));
  set_row(m, Channel::ddY, derivative(dy));
  set_row(m, Channel::VRATIO5, vratio);
  set_row(m, Channel::ALPHA, alpha);
  set_row(m, Channel::dALPHA, angle_derivative(alpha));
  set_row(m, Channel::SIN, sn);
  set_row(m, Channel::COS, cs);
  set_row(m, Channel::RATIO5, r5);
  set_row(m, Channel::RATIO7, r7);

  if (!m.allFinite()) fail(ErrorKind::Numeric, "non-finite time function value");
  return m;
}

TimeFunctionSet extract_time_functions(const RawSignature& sig) {
  const auto n = sig.samples.size();
  std::vector<double> x(n), y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(sig.samples[i].x);
    y[i] = static_cast<double>(sig.samples[i].y);
    p[i] = static_cast<double>(sig.samples[i].p);
  }
  TimeFunctionSet tf;
  tf.meta = {sig.user_id, sig.session, sig.device, sig.input_kind, sig.label};
  tf.channels = compute_time_functions(x, y, p);
  return tf;
}

TimeFunctionSet normalize(const TimeFunctionSet& tf) {
  if (tf.normalized) fail(ErrorKind::Configuration, "time functions already normalized");
  TimeFunctionSet out = tf;
  const auto n = static_cast<double>(tf.length());
  for (Eigen::Index c = 0; c < kNumChannels; ++c) {
    auto row = out.channels.row(c);
    const double mean = row.sum() / n;
    const double var = (row.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd < kConstantChannelStd) {
      row.setZero();
    } else {
      row = (row.array() - mean) / sd;
    }
  }
  out.normalized = true;
  return out;
}

TimeFunctionSet zero_pressure_channels(const TimeFunctionSet& tf) {
  TimeFunctionSet out = tf;
  out.row(Channel::P).setZero();
  out.row(Channel::dP).setZero();
  return out;
}

std::string format_channels(const Eigen::MatrixXd& channels) {
  std::string out;
  for (int c = 0; c < kNumChannels; ++c) {
    if (c) out += '\t';
    out += kNames[c];
  }
  out += '\n';
  char buf[32];
  for (Eigen::Index t = 0; t < channels.cols(); ++t) {
    for (Eigen::Index c = 0; c < channels.rows(); ++c) {
      if (c) out += '\t';
      std::snprintf(buf, sizeof buf, "%.17g", channels(c, t));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace tasign
