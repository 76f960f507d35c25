#include <cmath>

#include "tasign/error.hpp"
#include "tasign/network.hpp"

namespace tasign::net {

namespace {

Vector sigmoid(const Vector& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

}  // namespace

GruWeights gru_weights(const double* base, int input, int hidden) {
  const Eigen::Index g = 3 * hidden;
  const double* u = base + g * input;
  const double* b = u + g * hidden;
  return {ConstMatrixMap(base, g, input), ConstMatrixMap(u, g, hidden), ConstVectorMap(b, g),
          input, hidden};
}

GruGrads gru_grads(double* base, int input, int hidden) {
  const Eigen::Index g = 3 * hidden;
  double* u = base + g * input;
  double* b = u + g * hidden;
  return {MatrixMap(base, g, input), MatrixMap(u, g, hidden), VectorMap(b, g), input, hidden};
}

GruTrace gru_forward(const GruWeights& w, const Matrix& inputs, bool reverse) {
  if (inputs.rows() != w.input) {
    fail(ErrorKind::Configuration, "GRU expects " + std::to_string(w.input) + " input rows, got " +
                                       std::to_string(inputs.rows()));
  }
  if (!inputs.allFinite()) fail(ErrorKind::Numeric, "non-finite GRU input");

  const Eigen::Index hidden = w.hidden, len = inputs.cols();
  Matrix pre = w.W * inputs;
  pre.colwise() += w.b;

  GruTrace tr;
  tr.reverse = reverse;
  tr.z.resize(hidden, len);
  tr.r.resize(hidden, len);
  tr.cand.resize(hidden, len);
  tr.h.resize(hidden, len);
  tr.h_prev.resize(hidden, len);

  const auto u_zr = w.U.topRows(2 * hidden);
  const auto u_h = w.U.bottomRows(hidden);
  Vector h = Vector::Zero(hidden);
  Vector rec(2 * hidden), rh(hidden), cand_in(hidden);
  for (Eigen::Index step = 0; step < len; ++step) {
    const Eigen::Index t = reverse ? len - 1 - step : step;
    tr.h_prev.col(t) = h;
    rec.noalias() = u_zr * h;
    const Vector z = sigmoid(pre.col(t).head(hidden) + rec.head(hidden));
    const Vector r = sigmoid(pre.col(t).segment(hidden, hidden) + rec.tail(hidden));
    rh = r.cwiseProduct(h);
    cand_in.noalias() = u_h * rh;
    cand_in += pre.col(t).tail(hidden);
    const Vector cand = cand_in.array().tanh().matrix();
    h = (1.0 - z.array()) * h.array() + z.array() * cand.array();
    tr.z.col(t) = z;
    tr.r.col(t) = r;
    tr.cand.col(t) = cand;
    tr.h.col(t) = h;
  }
  return tr;
}

Matrix gru_backward(const GruWeights& w, const GruTrace& tr, const Matrix& inputs,
                    const Matrix& d_h, GruGrads& grads) {
  const Eigen::Index hidden = w.hidden, len = inputs.cols();
  const auto u_zr = w.U.topRows(2 * hidden);
  const auto u_h = w.U.bottomRows(hidden);

  Matrix d_pre(3 * hidden, len);
  Vector carry = Vector::Zero(hidden);
  Vector d_rh(hidden), d_zr(2 * hidden);
  for (Eigen::Index step = len - 1; step >= 0; --step) {
    const Eigen::Index t = tr.reverse ? len - 1 - step : step;
    const auto z = tr.z.col(t).array();
    const auto r = tr.r.col(t).array();
    const auto c = tr.cand.col(t).array();
    const auto hp = tr.h_prev.col(t).array();

    const Vector dh = d_h.col(t) + carry;
    const auto dha = dh.array();
    const Vector d_cand_pre = (dha * z * (1.0 - c.square())).matrix();
    d_rh.noalias() = u_h.transpose() * d_cand_pre;
    d_zr.head(hidden) = (dha * (c - hp) * z * (1.0 - z)).matrix();
    d_zr.tail(hidden) = (d_rh.array() * hp * r * (1.0 - r)).matrix();

    carry = (dha * (1.0 - z) + d_rh.array() * r).matrix();
    carry.noalias() += u_zr.transpose() * d_zr;

    d_pre.col(t).head(2 * hidden) = d_zr;
    d_pre.col(t).tail(hidden) = d_cand_pre;
  }

  grads.W.noalias() += d_pre * inputs.transpose();
  grads.b += d_pre.rowwise().sum();
  grads.U.topRows(2 * hidden).noalias() += d_pre.topRows(2 * hidden) * tr.h_prev.transpose();
  const Matrix rh = tr.r.cwiseProduct(tr.h_prev);
  grads.U.bottomRows(hidden).noalias() += d_pre.bottomRows(hidden) * rh.transpose();
  return w.W.transpose() * d_pre;
}

}  // namespace tasign::net
