#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tasign/error.hpp"
#include "tasign/train.hpp"

using namespace tasign;
using namespace tasign::net;

namespace {

Matrix random_input(Rng& rng, int rows, int len, double scale = 1.0) {
  Matrix m(rows, len);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using Seq = std::vector<std::vector<double>>;  // [t][unit]

/// Scalar-loop GRU over the flat parameter layout: W (3H x D), U (3H x H), b (3H),
/// column-major, gate rows z, r, candidate.
Seq naive_gru(const ParamVector& v, std::size_t off, int D, int H, const Seq& x, bool reverse) {
  const int G = 3 * H;
  auto W = [&](int r, int c) { return v[off + static_cast<std::size_t>(c) * G + r]; };
  auto U = [&](int r, int c) { return v[off + static_cast<std::size_t>(G) * D + static_cast<std::size_t>(c) * G + r]; };
  auto B = [&](int r) { return v[off + static_cast<std::size_t>(G) * (D + H) + r]; };
  const int L = static_cast<int>(x.size());
  Seq out(L, std::vector<double>(H));
  std::vector<double> h(H, 0.0);
  for (int s = 0; s < L; ++s) {
    const int t = reverse ? L - 1 - s : s;
    std::vector<double> z(H), r(H), next(H);
    for (int k = 0; k < H; ++k) {
      double az = B(k), ar = B(H + k);
      for (int d = 0; d < D; ++d) {
        az += W(k, d) * x[t][d];
        ar += W(H + k, d) * x[t][d];
      }
      for (int j = 0; j < H; ++j) {
        az += U(k, j) * h[j];
        ar += U(H + k, j) * h[j];
      }
      z[k] = sig(az);
      r[k] = sig(ar);
    }
    for (int k = 0; k < H; ++k) {
      double ac = B(2 * H + k);
      for (int d = 0; d < D; ++d) ac += W(2 * H + k, d) * x[t][d];
      for (int j = 0; j < H; ++j) ac += U(2 * H + k, j) * (r[j] * h[j]);
      next[k] = (1.0 - z[k]) * h[k] + z[k] * std::tanh(ac);
    }
    h = next;
    out[t] = h;
  }
  return out;
}

Seq columns(const Matrix& m) {
  Seq s(m.cols(), std::vector<double>(m.rows()));
  for (Eigen::Index t = 0; t < m.cols(); ++t) {
    for (Eigen::Index d = 0; d < m.rows(); ++d) s[t][d] = m(d, t);
  }
  return s;
}

double naive_forward(const ModelParams& p, const Matrix& a, const Matrix& b) {
  const auto& v = p.values;
  const auto xa = columns(a), xb = columns(b);
  const auto af = naive_gru(v, kBranchFwdOffset, kBranchInput, kBranchHidden, xa, false);
  const auto ab = naive_gru(v, kBranchBwdOffset, kBranchInput, kBranchHidden, xa, true);
  const auto bf = naive_gru(v, kBranchFwdOffset, kBranchInput, kBranchHidden, xb, false);
  const auto bb = naive_gru(v, kBranchBwdOffset, kBranchInput, kBranchHidden, xb, true);
  const int L = static_cast<int>(xa.size());
  Seq merged(L);
  for (int t = 0; t < L; ++t) {
    for (const auto* part : {&af, &ab, &bf, &bb}) merged[t].insert(merged[t].end(), (*part)[t].begin(), (*part)[t].end());
  }
  const auto mf = naive_gru(v, kMergeFwdOffset, kMergeInput, kMergeHidden, merged, false);
  const auto mb = naive_gru(v, kMergeBwdOffset, kMergeInput, kMergeHidden, merged, true);
  double logit = v[kHeadOffset + kHeadInput];
  for (int k = 0; k < kMergeHidden; ++k) {
    logit += v[kHeadOffset + k] * mf[L - 1][k];
    logit += v[kHeadOffset + kMergeHidden + k] * mb[0][k];
  }
  return sig(logit);
}

TrainingCorpus small_corpus(int users = 3) {
  SynthConfig cfg;
  cfg.n_users = users;
  cfg.genuine_per_session = 2;
  cfg.forgeries_per_user = 2;
  cfg.seed = 42;
  std::vector<ManifestEntry> entries;
  const auto sigs = synth_signatures(cfg, &entries);
  return TrainingCorpus::from_signatures(entries, sigs);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.max_len = 48;
  c.pairs_per_epoch = 12;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("parameter layout") {
  CHECK(gru_size(kBranchInput, kBranchHidden) == 9660);
  CHECK(gru_size(kMergeInput, kMergeHidden) == 14352);
  CHECK(kParamCount == 48071);
  CHECK(kHeadOffset + kHeadInput == 48070);
}

TEST_CASE("initialization is seeded with the configured moments") {
  const auto a = init_params(17), b = init_params(17), c = init_params(18);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  double mean = 0.0, sq = 0.0;
  for (double v : a.values) mean += v;
  mean /= static_cast<double>(kParamCount);
  for (double v : a.values) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(kParamCount));
  CHECK(std::abs(mean) < 1.5e-3);
  CHECK(std::abs(sd - kInitStd) < 1e-3);
}

TEST_CASE("all-zero parameters score one half") {
  ModelParams zero;
  Rng rng(1);
  const auto a = random_input(rng, kNumChannels, 9), b = random_input(rng, kNumChannels, 9);
  const auto tr = forward_trace(zero, a, b);
  CHECK(tr.score == 0.5);
  CHECK(tr.merge.output.isZero(0.0));
  CHECK(loss(tr.score, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("scalar GRU matches a hand evaluation") {
  // W, U, b for gates z, r, candidate.
  const std::vector<double> buf = {0.5, -0.3, 0.8, 0.2, 0.7, -0.4, 0.1, 0.05, -0.2};
  const auto w = gru_weights(buf.data(), 1, 1);
  Matrix x(1, 2);
  x << 1.0, -2.0;
  const auto tr = gru_forward(w, x, false);

  double h = 0.0;
  for (double xt : {1.0, -2.0}) {
    const double z = sig(0.5 * xt + 0.2 * h + 0.1);
    const double r = sig(-0.3 * xt + 0.7 * h + 0.05);
    const double c = std::tanh(0.8 * xt - 0.4 * (r * h) - 0.2);
    h = (1.0 - z) * h + z * c;
  }
  CHECK(tr.h(0, 1) == doctest::Approx(h).epsilon(1e-15));
  // t = 0 from h = 0: z = sig(0.6), c = tanh(0.6).
  CHECK(tr.h(0, 0) == doctest::Approx(sig(0.6) * std::tanh(0.6)).epsilon(1e-15));

  const auto rev = gru_forward(w, x, true);
  CHECK(rev.h_prev(0, 1) == 0.0);
  CHECK(rev.h_prev(0, 0) == rev.h(0, 1));
}

TEST_CASE("forward agrees with a scalar-loop reference") {
  Rng rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const auto p = init_params(100 + trial, 0.3);
    const int L = rng.uniform_int(1, 12);
    const auto a = random_input(rng, kNumChannels, L), b = random_input(rng, kNumChannels, L);
    const double expected = naive_forward(p, a, b);
    CHECK(forward(p, a, b) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("forward is pure and hidden states stay inside (-1, 1)") {
  Rng rng(4);
  const auto p = init_params(9, 0.3);
  const auto copy = p;
  const auto a = random_input(rng, kNumChannels, 40, 3.0), b = random_input(rng, kNumChannels, 40, 3.0);
  const auto tr = forward_trace(p, a, b);
  CHECK(forward(copy, a, b) == tr.score);
  CHECK(forward(p, a, b) == tr.score);
  for (const auto* layer : {&tr.branch_a, &tr.branch_b, &tr.merge}) {
    CHECK(layer->output.cwiseAbs().maxCoeff() < 1.0);
  }
  CHECK(tr.score > 0.0);
  CHECK(tr.score < 1.0);
}

TEST_CASE("forward rejects malformed pairs") {
  const ModelParams p;
  Rng rng(5);
  CHECK_THROWS_AS(forward(p, random_input(rng, kNumChannels, 4), random_input(rng, kNumChannels, 5)), Error);
  CHECK_THROWS_AS(forward(p, random_input(rng, 5, 4), random_input(rng, 5, 4)), Error);
  auto bad = random_input(rng, kNumChannels, 4);
  bad(0, 0) = std::nan("");
  try {
    forward(p, bad, bad);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("binary cross-entropy") {
  CHECK(loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss(0.9, 0) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(loss(0.9, 1) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(loss(0.0, 1) == doctest::Approx(-std::log(kScoreClamp)));
  CHECK(std::isfinite(loss(1.0, 0)));
  for (double s = 0.0; s <= 1.0; s += 0.01) {
    CHECK(loss(s, 0) >= 0.0);
    CHECK(loss(s, 1) >= 0.0);
  }
}

TEST_CASE("head bias gradient is score minus label") {
  Rng rng(6);
  const auto p = init_params(2);
  const auto a = random_input(rng, kNumChannels, 7), b = random_input(rng, kNumChannels, 7);
  for (int label : {0, 1}) {
    const auto g = backward_parts(p, a, b, label);
    CHECK(g.total.head_bias() == g.score - label);
    CHECK(g.loss == loss(g.score, label));
  }
}

TEST_CASE("backward matches central finite differences") {
  // Parameters drawn wider than the training init so sampled gradients sit well above
  // the finite-difference round-off floor.
  double worst = 0.0;
  for (std::uint64_t draw = 0; draw < 5; ++draw) {
    const auto p = init_params(mix_seed(77, draw), 0.3);
    Rng rng(mix_seed(78, draw));
    const auto a = random_input(rng, kNumChannels, 20), b = random_input(rng, kNumChannels, 20);
    const auto r = gradient_check(p, a, b, static_cast<int>(draw % 2), 200, 1e-5, draw);
    CHECK(r.checked == 200);
    worst = std::max(worst, r.max_rel_error);
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 3.0) == 0.5);
}

TEST_CASE("shared branch receives the sum of both input paths") {
  Rng rng(7);
  auto p = init_params(12, 0.3);
  const auto a = random_input(rng, kNumChannels, 10), b = random_input(rng, kNumChannels, 10);
  const auto g = backward_parts(p, a, b, 1);
  for (std::size_t i = 0; i < kBranchSize; ++i) {
    REQUIRE(g.total.values[i] == g.branch_from_a[i] + g.branch_from_b[i]);
  }

  // With a = b the two paths see the same branch activations; once the merge layer
  // weighs both halves of its input alike, their gradients coincide exactly.
  for (auto block : {Block::MergeFwd, Block::MergeBwd}) {
    auto w = p.gru(block);
    w.W.rightCols(2 * kBranchHidden) = w.W.leftCols(2 * kBranchHidden);
  }
  const auto same = backward_parts(p, a, a, 0);
  CHECK(same.branch_from_a == same.branch_from_b);
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = init_params(1);
    const auto before = p;
    AdamState st;
    adam_step(p, ModelParams{}, st);
    CHECK(p == before);
    CHECK(st.step_count == 1);
  }
  SUBCASE("first step on a unit gradient moves by the learning rate") {
    std::vector<double> x{2.0}, g{1.0};
    AdamState st(1);
    adam_step(x, g, st);
    CHECK(std::abs((2.0 - x[0]) - 0.001) < 1e-6);
    const auto m1 = st.m, v1 = st.v;
    adam_step(x, g, st);
    CHECK(st.step_count == 2);
    CHECK(st.m != m1);
    CHECK(st.v != v1);
  }
  SUBCASE("shape mismatch") {
    std::vector<double> x{1.0, 2.0}, g{1.0};
    AdamState st(2);
    CHECK_THROWS_AS(adam_step(x, g, st), Error);
  }
}

TEST_CASE("training pairs are balanced by label") {
  const auto corpus = small_corpus(4);
  auto cfg = small_config();
  const auto split = build_training_pairs(corpus, cfg);
  long genuine = 0, impostor = 0, skilled = 0, random = 0;
  for (const auto& pr : split.train) {
    (pr.label == 0 ? genuine : impostor) += 1;
    if (pr.kind == ComparisonKind::Skilled) ++skilled;
    if (pr.kind == ComparisonKind::Random) ++random;
    CHECK(corpus.entries[pr.enrolled].label == Label::Genuine);
    if (pr.label == 0) CHECK(corpus.entries[pr.enrolled].user_id == corpus.entries[pr.test].user_id);
    if (pr.kind == ComparisonKind::Random) CHECK(corpus.entries[pr.enrolled].user_id != corpus.entries[pr.test].user_id);
  }
  // 4 genuine per user -> 6 genuine pairs each.
  CHECK(genuine == 4 * 6);
  CHECK(std::abs(genuine - impostor) <= 1);
  CHECK(skilled > 0);
  CHECK(random > 0);

  cfg.validation_fraction = 0.25;
  const auto held = build_training_pairs(corpus, cfg);
  CHECK(held.validation_users.size() == 1);
  for (const auto& pr : held.train) {
    CHECK(corpus.entries[pr.enrolled].user_id != held.validation_users[0]);
    CHECK(corpus.entries[pr.test].user_id != held.validation_users[0]);
  }
  CHECK_FALSE(held.validation.empty());
}

TEST_CASE("insufficient data and bad configs are rejected") {
  auto cfg = small_config();
  const auto two = small_corpus(2);
  TrainingCorpus one_user;
  for (std::size_t i = 0; i < two.entries.size(); ++i) {
    if (two.entries[i].user_id != two.entries[0].user_id) continue;
    one_user.entries.push_back(two.entries[i]);
    one_user.time_functions.push_back(two.time_functions[i]);
  }
  CHECK_THROWS_AS(build_training_pairs(one_user, cfg), Error);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("aligned pairs are truncated only past max_len") {
  const auto corpus = small_corpus(2);
  const auto& e = corpus.time_functions[0];
  const auto& t = corpus.time_functions[1];
  const auto full = align_pair(e, t, default_cost_channels(), 100000);
  const auto path = dtw_path(e, t, default_cost_channels()).path;
  CHECK(full.length() == static_cast<Eigen::Index>(path.size()));
  CHECK(full.a == apply_path(e, t, path).a);
  const auto cut = align_pair(e, t, default_cost_channels(), 50);
  CHECK(cut.length() == 50);
  CHECK(cut.a == full.a.leftCols(50));
  CHECK(cut.b == full.b.leftCols(50));
}

TEST_CASE("batch gradient: parallel equals serial bit for bit") {
  const auto corpus = small_corpus(3);
  const auto cfg = small_config();
  const auto split = build_training_pairs(corpus, cfg);
  const auto params = init_params(3);
  const std::span<const TrainingPair> batch(split.train.data(), 6);
  const auto s = batch_gradient(params, corpus, batch, cfg, Exec::Serial);
  const auto p = batch_gradient(params, corpus, batch, cfg, Exec::Parallel);
  CHECK(s.gradient == p.gradient);
  CHECK(s.loss_sum == p.loss_sum);
  CHECK(pairs_loss(params, corpus, batch, cfg, Exec::Serial) == s.loss_sum);

  // The batch gradient is the mean of the per-pair gradients.
  ModelParams mean;
  for (const auto& pr : batch) {
    const auto g = backward(params, align_pair(corpus.time_functions[pr.enrolled],
                                               corpus.time_functions[pr.test], cfg.cost_channels,
                                               cfg.max_len),
                            pr.label);
    for (std::size_t i = 0; i < kParamCount; ++i) mean.values[i] += g.values[i];
  }
  for (auto& v : mean.values) v /= static_cast<double>(batch.size());
  for (std::size_t i = 0; i < kParamCount; i += 97) {
    CHECK(s.gradient.values[i] == doctest::Approx(mean.values[i]).epsilon(1e-12).scale(1e-15));
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto corpus = small_corpus(3);
  auto cfg = small_config();
  cfg.epochs = 3;
  std::vector<int> seen;
  const auto a = train(corpus, cfg, Exec::Parallel, [&](const EpochStats& s) { seen.push_back(s.epoch); });
  const auto b = train(corpus, cfg, Exec::Serial);
  CHECK(seen == std::vector<int>{1, 2, 3});
  REQUIRE(a.history.size() == 3);
  CHECK(a.params == b.params);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(std::isnan(a.history[i].validation_loss));
    CHECK(a.history[i].train_pairs == 12);
  }
  CHECK(serialize_checkpoint({a.params, describe(cfg)}) == serialize_checkpoint({b.params, describe(cfg)}));
  CHECK(a.genuine_pairs > 0);
  CHECK(a.impostor_pairs > 0);

  cfg.seed = 6;
  const auto c = train(corpus, cfg, Exec::Parallel);
  CHECK_FALSE(c.params == a.params);
}

TEST_CASE("checkpoint round trip and validation") {
  const auto p = init_params(31);
  TrainConfig cfg;
  cfg.max_len = 321;
  cfg.cost_channels = {Channel::dX, Channel::V};
  const Checkpoint ck{p, describe(cfg)};
  const auto bytes = serialize_checkpoint(ck);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back.params == p);
  CHECK(back.config == ck.config);
  CHECK(back.max_len() == 321);
  CHECK(back.cost_channels() == cfg.cost_channels);
  CHECK(bytes.size() > kParamCount * sizeof(double));

  testing::TempDir dir("ckpt");
  save_checkpoint(ck, dir / "m.ck");
  CHECK(load_checkpoint(dir / "m.ck").params == p);

  auto kind = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind(bytes.substr(0, bytes.size() - 8)) == ErrorKind::Parse);
  CHECK(kind(bytes + "x") == ErrorKind::Parse);
  CHECK(kind("NOTACKPT" + bytes.substr(8)) == ErrorKind::Parse);

  // Change the row count of the first array header (branch.fwd.W: 138 x 23).
  auto reshaped = bytes;
  const auto pos = reshaped.find("branch.fwd.W") + std::string("branch.fwd.W").size();
  reshaped[pos] = static_cast<char>(137);
  CHECK(kind(reshaped) == ErrorKind::Parse);

  auto poisoned = p;
  poisoned.values[5] = std::nan("");
  CHECK(kind(serialize_checkpoint({poisoned, ck.config})) == ErrorKind::Numeric);
}

