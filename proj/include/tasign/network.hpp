#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "tasign/dtw.hpp"

namespace tasign::net {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

/// Flat parameter storage. The aligned allocator pins the base address so Eigen picks
/// the same vectorized code path (and summation order) on every run.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

inline constexpr int kBranchInput = kNumChannels;   // 23
inline constexpr int kBranchHidden = 46;            // per direction
inline constexpr int kMergeInput = 4 * kBranchHidden;  // two branches x two directions
inline constexpr int kMergeHidden = 23;             // per direction
inline constexpr int kHeadInput = 2 * kMergeHidden;

/// Parameter count of one GRU direction: stacked W (3H x D), U (3H x H), b (3H).
constexpr std::size_t gru_size(int input, int hidden) {
  return static_cast<std::size_t>(3 * hidden) * static_cast<std::size_t>(input + hidden + 1);
}

inline constexpr std::size_t kBranchFwdOffset = 0;
inline constexpr std::size_t kBranchBwdOffset = gru_size(kBranchInput, kBranchHidden);
inline constexpr std::size_t kMergeFwdOffset = 2 * gru_size(kBranchInput, kBranchHidden);
inline constexpr std::size_t kMergeBwdOffset = kMergeFwdOffset + gru_size(kMergeInput, kMergeHidden);
inline constexpr std::size_t kHeadOffset = kMergeBwdOffset + gru_size(kMergeInput, kMergeHidden);
inline constexpr std::size_t kBranchSize = kMergeFwdOffset;
/// 2 x 9660 + 2 x 14352 + 46 + 1.
inline constexpr std::size_t kParamCount = kHeadOffset + kHeadInput + 1;
static_assert(kParamCount == 48071);

/// One GRU direction viewed in place. Gate rows of W, U and b are stacked in the order
/// update (z), reset (r), candidate (h).
template <class M, class V>
struct GruView {
  M W;
  M U;
  V b;
  int input;
  int hidden;
};

using GruWeights = GruView<ConstMatrixMap, ConstVectorMap>;
using GruGrads = GruView<MatrixMap, VectorMap>;

GruWeights gru_weights(const double* base, int input, int hidden);
GruGrads gru_grads(double* base, int input, int hidden);

enum class Block { BranchFwd, BranchBwd, MergeFwd, MergeBwd };

/// Every trainable value of the Siamese scorer in one flat buffer. The branch GRU is
/// stored once and used by both inputs. Gradients share this layout.
struct ModelParams {
  ParamVector values = ParamVector(kParamCount, 0.0);

  GruWeights gru(Block block) const;
  GruGrads gru(Block block);
  ConstVectorMap head_weights() const { return {values.data() + kHeadOffset, kHeadInput}; }
  VectorMap head_weights() { return {values.data() + kHeadOffset, kHeadInput}; }
  double head_bias() const { return values[kHeadOffset + kHeadInput]; }
  double& head_bias() { return values[kHeadOffset + kHeadInput]; }

  std::size_t size() const { return values.size(); }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline constexpr double kInitStd = 0.05;

/// i.i.d. N(0, std^2) for every weight and bias.
ModelParams init_params(std::uint64_t seed, double stddev = kInitStd);

/// States and gate activations of one direction over a sequence, indexed by time
/// position (not processing order). `h_prev.col(t)` is the state fed into step t.
struct GruTrace {
  Matrix z, r, cand, h, h_prev;
  bool reverse = false;
};

/// Runs one direction over inputs (D x L). With `reverse` the sequence is consumed
/// right to left, so the final state sits at column 0.
GruTrace gru_forward(const GruWeights& w, const Matrix& inputs, bool reverse);

/// BPTT for one direction. `d_h` is the loss gradient w.r.t. every output state
/// (H x L). Accumulates into `grads` and returns the gradient w.r.t. the inputs.
Matrix gru_backward(const GruWeights& w, const GruTrace& trace, const Matrix& inputs,
                    const Matrix& d_h, GruGrads& grads);

struct BgruTrace {
  GruTrace fwd, bwd;
  Matrix output;  // 2H x L, forward states on top
};

struct ForwardTrace {
  BgruTrace branch_a, branch_b, merge;
  Matrix merge_input;  // kMergeInput x L
  Vector last;         // forward final state over backward final state
  double logit = 0.0;
  double score = 0.0;
};

ForwardTrace forward_trace(const ModelParams& params, const Matrix& a, const Matrix& b);

/// Dissimilarity in (0, 1); 1 means forgery.
double forward(const ModelParams& params, const AlignedPair& pair);
double forward(const ModelParams& params, const Matrix& a, const Matrix& b);

inline constexpr double kScoreClamp = 1e-12;

/// Binary cross-entropy with the score clamped to [1e-12, 1 - 1e-12].
double loss(double score, int label);

struct Gradients {
  ModelParams total;
  // Branch gradients contributed through each input before summation (kBranchSize each).
  ParamVector branch_from_a, branch_from_b;
  double score = 0.0;
  double loss = 0.0;
};

Gradients backward_parts(const ModelParams& params, const Matrix& a, const Matrix& b, int label);

/// Gradient of loss(forward(params, pair), label) with the layout of ModelParams.
ModelParams backward(const ModelParams& params, const AlignedPair& pair, int label);
ModelParams backward(const ModelParams& params, const Matrix& a, const Matrix& b, int label);

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  explicit AdamState(std::size_t n = kParamCount, AdamHyper h = {})
      : m(n, 0.0), v(n, 0.0), hyper(h) {}
};

/// In-place Adam update with bias correction.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  adam_step(params.values, grads.values, state);
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// |ga - gn| / max(1e-8, |ga| + |gn|)
double relative_error(double analytic, double numeric);

/// Central differences of the loss on `samples` parameter indices drawn with `seed`.
GradCheckResult gradient_check(const ModelParams& params, const Matrix& a, const Matrix& b,
                               int label, std::size_t samples, double eps, std::uint64_t seed);

}  // namespace tasign::net
