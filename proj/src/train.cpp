#include "tasign/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tasign/error.hpp"
#include "tasign/rng.hpp"

namespace tasign {

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

TimeFunctionSet prepare_time_functions(const RawSignature& sig) {
  auto tf = normalize(extract_time_functions(sig));
  if (sig.input_kind == InputKind::Finger) tf = zero_pressure_channels(tf);
  return tf;
}

AlignedPair align_pair(const TimeFunctionSet& enrolled, const TimeFunctionSet& test,
                       const std::vector<Channel>& cost_channels, int max_len) {
  const auto r = dtw_path(enrolled, test, cost_channels, Exec::Serial);
  auto pair = apply_path(enrolled, test, r.path);
  if (max_len > 0 && pair.length() > max_len) {
    pair.a.conservativeResize(Eigen::NoChange, max_len);
    pair.b.conservativeResize(Eigen::NoChange, max_len);
    pair.path.pairs.resize(static_cast<std::size_t>(max_len));
  }
  return pair;
}

TrainingCorpus TrainingCorpus::from_manifest(const DatasetManifest& manifest, Exec exec) {
  TrainingCorpus c;
  c.entries = manifest.entries;
  c.time_functions.resize(c.entries.size());
  for_each_index(c.entries.size(), exec, [&](std::size_t i) {
    c.time_functions[i] = prepare_time_functions(load_signature(manifest, c.entries[i]));
  });
  return c;
}

TrainingCorpus TrainingCorpus::from_signatures(const std::vector<ManifestEntry>& entries,
                                               const std::vector<RawSignature>& sigs) {
  if (entries.size() != sigs.size()) fail(ErrorKind::Configuration, "entries/signatures size mismatch");
  TrainingCorpus c;
  c.entries = entries;
  for (const auto& s : sigs) c.time_functions.push_back(prepare_time_functions(s));
  return c;
}

}  // namespace tasign

namespace tasign::net {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Configuration, what); };
  if (epochs < 1) bad("epochs must be >= 1");
  if (batch_size < 1) bad("batch size must be >= 1");
  if (max_len < 16) bad("max_len must be >= 16");
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) {
    bad("validation fraction must be in [0, 0.5]");
  }
  if (pairs_per_epoch < 0) bad("pairs per epoch must be >= 0");
  if (cost_channels.empty()) bad("at least one DTW cost channel is required");
}

PairSplit build_training_pairs(const TrainingCorpus& corpus, const TrainConfig& config) {
  struct UserSigs {
    std::string id;
    std::vector<int> genuine, forgeries;
  };
  std::vector<UserSigs> users;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const auto& e = corpus.entries[i];
    auto it = std::find_if(users.begin(), users.end(), [&](const UserSigs& u) { return u.id == e.user_id; });
    if (it == users.end()) {
      users.push_back({e.user_id, {}, {}});
      it = users.end() - 1;
    }
    (e.label == Label::Genuine ? it->genuine : it->forgeries).push_back(static_cast<int>(i));
  }
  std::erase_if(users, [](const UserSigs& u) { return u.genuine.size() < 2; });
  if (users.size() < 2) {
    fail(ErrorKind::Configuration, "training needs at least 2 users with 2 genuine signatures each");
  }

  Rng rng(mix_seed(config.seed, 0x5041495253ULL));
  std::vector<std::size_t> order(users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * users.size()));
  n_val = std::min(n_val, users.size() - 2);
  std::set<std::size_t> val_users(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));

  PairSplit split;
  for (std::size_t u = 0; u < users.size(); ++u) {
    const bool is_val = val_users.count(u) > 0;
    auto& out = is_val ? split.validation : split.train;
    if (is_val) split.validation_users.push_back(users[u].id);
    const auto& g = users[u].genuine;
    const auto& f = users[u].forgeries;

    std::size_t n_genuine = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        out.push_back({g[i], g[j], 0, ComparisonKind::Genuine});
        ++n_genuine;
      }
    }

    // Impostors stay within the same split so validation users are never seen.
    std::vector<std::size_t> others;
    for (std::size_t v = 0; v < users.size(); ++v) {
      if (v != u && (val_users.count(v) > 0) == is_val) others.push_back(v);
    }
    if (others.empty()) {
      for (std::size_t v = 0; v < users.size(); ++v) if (v != u) others.push_back(v);
    }

    std::vector<TrainingPair> skilled;
    for (int ge : g)
      for (int fe : f) skilled.push_back({ge, fe, 1, ComparisonKind::Skilled});
    shuffle(skilled, rng);

    std::size_t n_skilled, n_random;
    if (config.balance) {
      n_skilled = std::min(skilled.size(), (n_genuine + 1) / 2);
      n_random = n_genuine - n_skilled;
    } else {
      n_skilled = skilled.size();
      n_random = skilled.size();
    }
    out.insert(out.end(), skilled.begin(), skilled.begin() + static_cast<std::ptrdiff_t>(n_skilled));
    for (std::size_t k = 0; k < n_random; ++k) {
      const auto& other = users[others[rng.next() % others.size()]];
      const int enrolled = g[rng.next() % g.size()];
      const int test = other.genuine[rng.next() % other.genuine.size()];
      out.push_back({enrolled, test, 1, ComparisonKind::Random});
    }
  }
  if (split.train.empty()) fail(ErrorKind::Configuration, "no training pairs");
  return split;
}

BatchResult batch_gradient(const ModelParams& params, const TrainingCorpus& corpus,
                           std::span<const TrainingPair> batch, const TrainConfig& config,
                           Exec exec) {
  std::vector<ModelParams> grads(batch.size());
  std::vector<double> losses(batch.size());
  for_each_index(batch.size(), exec, [&](std::size_t i) {
    const auto& p = batch[i];
    const auto pair = align_pair(corpus.time_functions[p.enrolled], corpus.time_functions[p.test],
                                 config.cost_channels, config.max_len);
    auto g = backward_parts(params, pair.a, pair.b, p.label);
    grads[i] = std::move(g.total);
    losses[i] = g.loss;
  });

  BatchResult out;
  if (batch.empty()) return out;
  auto& sum = out.gradient.values;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& gi = grads[i].values;
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += gi[k];
    out.loss_sum += losses[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : sum) v *= inv;
  return out;
}

double pairs_loss(const ModelParams& params, const TrainingCorpus& corpus,
                  std::span<const TrainingPair> pairs, const TrainConfig& config, Exec exec) {
  std::vector<double> losses(pairs.size());
  for_each_index(pairs.size(), exec, [&](std::size_t i) {
    const auto& p = pairs[i];
    const auto pair = align_pair(corpus.time_functions[p.enrolled], corpus.time_functions[p.test],
                                 config.cost_channels, config.max_len);
    losses[i] = loss(forward(params, pair), p.label);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

TrainResult train(const TrainingCorpus& corpus, const TrainConfig& config, Exec exec,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto split = build_training_pairs(corpus, config);

  TrainResult result;
  for (const auto& p : split.train) (p.label == 0 ? result.genuine_pairs : result.impostor_pairs)++;
  result.params = init_params(config.seed);
  AdamState adam(kParamCount, config.adam);

  std::vector<TrainingPair> val = split.validation;
  if (config.pairs_per_epoch > 0) {
    Rng vrng(mix_seed(config.seed, 0x56414cULL));
    shuffle(val, vrng);
    val.resize(std::min(val.size(), static_cast<std::size_t>(config.pairs_per_epoch)));
  }

  std::vector<TrainingPair> order = split.train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    std::size_t n = order.size();
    if (config.pairs_per_epoch > 0) n = std::min(n, static_cast<std::size_t>(config.pairs_per_epoch));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const auto len = std::min(static_cast<std::size_t>(config.batch_size), n - start);
      auto batch = batch_gradient(result.params, corpus,
                                  std::span<const TrainingPair>(order.data() + start, len), config, exec);
      loss_sum += batch.loss_sum;
      adam_step(result.params, batch.gradient, adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_pairs = n;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.validation_loss = val.empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : pairs_loss(result.params, corpus, val, config, exec) /
                                      static_cast<double>(val.size());
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, Exec exec,
                  const EpochCallback& on_epoch) {
  config.validate();
  return train(TrainingCorpus::from_manifest(manifest, exec), config, exec, on_epoch);
}

}  // namespace tasign::net
