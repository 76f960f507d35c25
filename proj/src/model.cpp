#include <algorithm>
#include <cmath>
#include <set>

#include "tasign/error.hpp"
#include "tasign/network.hpp"
#include "tasign/rng.hpp"

namespace tasign::net {

namespace {

struct BlockLayout {
  std::size_t offset;
  int input;
  int hidden;
};

BlockLayout layout(Block block) {
  switch (block) {
    case Block::BranchFwd: return {kBranchFwdOffset, kBranchInput, kBranchHidden};
    case Block::BranchBwd: return {kBranchBwdOffset, kBranchInput, kBranchHidden};
    case Block::MergeFwd: return {kMergeFwdOffset, kMergeInput, kMergeHidden};
    case Block::MergeBwd: return {kMergeBwdOffset, kMergeInput, kMergeHidden};
  }
  return {0, 0, 0};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

BgruTrace bgru_forward(const GruWeights& fwd, const GruWeights& bwd, const Matrix& x) {
  BgruTrace t;
  t.fwd = gru_forward(fwd, x, false);
  t.bwd = gru_forward(bwd, x, true);
  t.output.resize(2 * fwd.hidden, x.cols());
  t.output.topRows(fwd.hidden) = t.fwd.h;
  t.output.bottomRows(bwd.hidden) = t.bwd.h;
  return t;
}

/// Backprop of one bidirectional layer; returns the input gradient.
Matrix bgru_backward(const GruWeights& fwd, const GruWeights& bwd, const BgruTrace& t,
                     const Matrix& x, const Matrix& d_out, GruGrads& g_fwd, GruGrads& g_bwd) {
  Matrix dx = gru_backward(fwd, t.fwd, x, d_out.topRows(fwd.hidden), g_fwd);
  dx += gru_backward(bwd, t.bwd, x, d_out.bottomRows(bwd.hidden), g_bwd);
  return dx;
}

}  // namespace

GruWeights ModelParams::gru(Block block) const {
  const auto l = layout(block);
  return gru_weights(values.data() + l.offset, l.input, l.hidden);
}

GruGrads ModelParams::gru(Block block) {
  const auto l = layout(block);
  return gru_grads(values.data() + l.offset, l.input, l.hidden);
}

ModelParams init_params(std::uint64_t seed, double stddev) {
  Rng rng(seed);
  ModelParams p;
  for (auto& v : p.values) v = rng.normal(0.0, stddev);
  return p;
}

ForwardTrace forward_trace(const ModelParams& params, const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || b.cols() == 0) fail(ErrorKind::Degenerate, "empty aligned pair");
  if (a.cols() != b.cols()) fail(ErrorKind::PathMismatch, "aligned pair lengths differ");
  const Eigen::Index len = a.cols();

  ForwardTrace tr;
  const auto bf = params.gru(Block::BranchFwd);
  const auto bb = params.gru(Block::BranchBwd);
  tr.branch_a = bgru_forward(bf, bb, a);
  tr.branch_b = bgru_forward(bf, bb, b);

  tr.merge_input.resize(kMergeInput, len);
  tr.merge_input.topRows(2 * kBranchHidden) = tr.branch_a.output;
  tr.merge_input.bottomRows(2 * kBranchHidden) = tr.branch_b.output;
  tr.merge = bgru_forward(params.gru(Block::MergeFwd), params.gru(Block::MergeBwd), tr.merge_input);

  tr.last.resize(kHeadInput);
  tr.last.head(kMergeHidden) = tr.merge.fwd.h.col(len - 1);
  tr.last.tail(kMergeHidden) = tr.merge.bwd.h.col(0);
  tr.logit = params.head_weights().dot(tr.last) + params.head_bias();
  tr.score = sigmoid(tr.logit);
  return tr;
}

double forward(const ModelParams& params, const Matrix& a, const Matrix& b) {
  return forward_trace(params, a, b).score;
}

double forward(const ModelParams& params, const AlignedPair& pair) {
  return forward(params, pair.a, pair.b);
}

double loss(double score, int label) {
  const double s = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
  return label == 1 ? -std::log(s) : -std::log(1.0 - s);
}

Gradients backward_parts(const ModelParams& params, const Matrix& a, const Matrix& b, int label) {
  const auto tr = forward_trace(params, a, b);
  const Eigen::Index len = a.cols();

  Gradients out;
  out.score = tr.score;
  out.loss = loss(tr.score, label);
  auto& g = out.total;

  // sigmoid + cross-entropy
  const double d_logit = tr.score - static_cast<double>(label);
  g.head_weights() = d_logit * tr.last;
  g.head_bias() = d_logit;
  const Vector d_last = d_logit * params.head_weights();

  Matrix d_merge_out = Matrix::Zero(2 * kMergeHidden, len);
  d_merge_out.col(len - 1).head(kMergeHidden) = d_last.head(kMergeHidden);
  d_merge_out.col(0).tail(kMergeHidden) = d_last.tail(kMergeHidden);

  auto gmf = g.gru(Block::MergeFwd);
  auto gmb = g.gru(Block::MergeBwd);
  const Matrix d_merge_in = bgru_backward(params.gru(Block::MergeFwd), params.gru(Block::MergeBwd),
                                          tr.merge, tr.merge_input, d_merge_out, gmf, gmb);

  const auto bf = params.gru(Block::BranchFwd);
  const auto bb = params.gru(Block::BranchBwd);
  auto branch_pass = [&](const BgruTrace& t, const Matrix& x, const Matrix& d_out) {
    ParamVector buf(kBranchSize, 0.0);
    auto gf = gru_grads(buf.data() + kBranchFwdOffset, kBranchInput, kBranchHidden);
    auto gb = gru_grads(buf.data() + kBranchBwdOffset, kBranchInput, kBranchHidden);
    bgru_backward(bf, bb, t, x, d_out, gf, gb);
    return buf;
  };
  out.branch_from_a = branch_pass(tr.branch_a, a, d_merge_in.topRows(2 * kBranchHidden));
  out.branch_from_b = branch_pass(tr.branch_b, b, d_merge_in.bottomRows(2 * kBranchHidden));
  for (std::size_t i = 0; i < kBranchSize; ++i) {
    g.values[i] = out.branch_from_a[i] + out.branch_from_b[i];
  }
  return out;
}

ModelParams backward(const ModelParams& params, const Matrix& a, const Matrix& b, int label) {
  return std::move(backward_parts(params, a, b, label).total);
}

ModelParams backward(const ModelParams& params, const AlignedPair& pair, int label) {
  return backward(params, pair.a, pair.b, label);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    fail(ErrorKind::Configuration, "Adam shapes do not match");
  }
  const auto& hp = state.hyper;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult gradient_check(const ModelParams& params, const Matrix& a, const Matrix& b,
                               int label, std::size_t samples, double eps, std::uint64_t seed) {
  const auto analytic = backward(params, a, b, label);
  Rng rng(seed);
  std::set<std::size_t> picked;
  samples = std::min(samples, kParamCount);
  while (picked.size() < samples) picked.insert(rng.next() % kParamCount);

  GradCheckResult res;
  ModelParams probe = params;
  for (auto k : picked) {
    const double orig = probe.values[k];
    probe.values[k] = orig + eps;
    const double up = loss(forward(probe, a, b), label);
    probe.values[k] = orig - eps;
    const double down = loss(forward(probe, a, b), label);
    probe.values[k] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(analytic.values[k], numeric);
    if (err > res.max_rel_error || res.checked == 0) {
      res.max_rel_error = err;
      res.worst_index = k;
      res.worst_analytic = analytic.values[k];
      res.worst_numeric = numeric;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace tasign::net
