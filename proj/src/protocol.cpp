#include "tasign/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tasign/error.hpp"
#include "tasign/train.hpp"

namespace tasign {

void ProtocolConfig::validate() const {
  if (train_signatures != 1 && train_signatures != 4) {
    fail(ErrorKind::Configuration, "train signatures must be 1 or 4");
  }
  if (!skilled && !random) fail(ErrorKind::Configuration, "select at least one impostor kind");
}

ComparisonPlan build_comparisons(const DatasetManifest& manifest, const ProtocolConfig& config) {
  config.validate();
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (config.input_kind && e.input_kind != *config.input_kind) continue;
    if (config.device && e.device != *config.device) continue;
    entries.push_back(&e);
  }

  std::vector<std::string> users;
  for (const auto* e : entries) {
    if (std::find(users.begin(), users.end(), e->user_id) == users.end()) users.push_back(e->user_id);
  }
  if (users.size() < 2) fail(ErrorKind::Configuration, "protocol needs at least 2 users");

  auto genuine_of = [&](const std::string& user) {
    std::vector<const ManifestEntry*> g;
    for (const auto* e : entries) {
      if (e->user_id == user && e->label == Label::Genuine) g.push_back(e);
    }
    std::stable_sort(g.begin(), g.end(), [](auto* a, auto* b) { return a->session < b->session; });
    return g;
  };

  // Random-forgery sample for each user: its first session-1 genuine signature.
  std::vector<const ManifestEntry*> random_pick(users.size(), nullptr);
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (const auto* e : genuine_of(users[u])) {
      if (e->session == 1) {
        random_pick[u] = e;
        break;
      }
    }
  }

  ComparisonPlan plan;
  const auto n_enrol = static_cast<std::size_t>(config.train_signatures);
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto& user = users[u];
    const auto genuine = genuine_of(user);
    std::vector<std::string> enrol;
    std::vector<const ManifestEntry*> tests;
    for (const auto* e : genuine) {
      if (e->session == 1 && enrol.size() < n_enrol) enrol.push_back(e->path);
      if (e->session >= 2) tests.push_back(e);
    }
    if (enrol.size() < n_enrol) {
      plan.warnings.push_back({user, "fewer than " + std::to_string(n_enrol) +
                                         " session-1 genuine signatures; user skipped"});
      continue;
    }
    if (tests.empty()) {
      plan.warnings.push_back({user, "no genuine signatures from session 2 or later; user skipped"});
      continue;
    }
    for (const auto* t : tests) plan.specs.push_back({enrol, t->path, ComparisonKind::Genuine});
    if (config.skilled) {
      for (const auto* e : entries) {
        if (e->user_id == user && e->label == Label::SkilledForgery) {
          plan.specs.push_back({enrol, e->path, ComparisonKind::Skilled});
        }
      }
    }
    if (config.random) {
      for (std::size_t v = 0; v < users.size(); ++v) {
        if (v != u && random_pick[v]) {
          plan.specs.push_back({enrol, random_pick[v]->path, ComparisonKind::Random});
        }
      }
    }
  }
  return plan;
}

double DtwScorer::score(const TimeFunctionSet& enrolled, const TimeFunctionSet& test) const {
  return dtw_score(enrolled, test, channels_);
}

double TarnnScorer::score(const TimeFunctionSet& enrolled, const TimeFunctionSet& test) const {
  return net::forward(params_, align_pair(enrolled, test, channels_, max_len_));
}

SignatureStore::SignatureStore(const DatasetManifest& manifest,
                               const std::vector<ComparisonSpec>& specs, Exec exec) {
  for (const auto& s : specs) {
    paths_.insert(paths_.end(), s.enrolment_paths.begin(), s.enrolment_paths.end());
    paths_.push_back(s.test_path);
  }
  std::sort(paths_.begin(), paths_.end());
  paths_.erase(std::unique(paths_.begin(), paths_.end()), paths_.end());
  for (const auto& p : paths_) {
    if (!manifest.find(p)) fail(ErrorKind::Reference, "unknown path " + p);
  }
  tfs_.resize(paths_.size());
  for_each_index(paths_.size(), exec, [&](std::size_t i) {
    try {
      tfs_[i] = prepare_time_functions(load_signature(manifest, *manifest.find(paths_[i])));
    } catch (const Error& e) {
      const std::string what = e.what();
      fail(e.kind(), what.find(paths_[i]) == std::string::npos ? paths_[i] + ": " + what : what);
    }
  });
}

const TimeFunctionSet& SignatureStore::get(const std::string& path) const {
  auto it = std::lower_bound(paths_.begin(), paths_.end(), path);
  if (it == paths_.end() || *it != path) fail(ErrorKind::Reference, "signature not loaded: " + path);
  return tfs_[static_cast<std::size_t>(it - paths_.begin())];
}

double mean_score(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double s : sorted) sum += s;
  return sum / static_cast<double>(sorted.size());
}

double score_comparison(const ComparisonSpec& spec, const Scorer& scorer,
                        const SignatureStore& store) {
  const auto& test = store.get(spec.test_path);
  std::vector<double> scores;
  for (const auto& p : spec.enrolment_paths) {
    double s = 0.0;
    try {
      s = scorer.score(store.get(p), test);
    } catch (const Error& e) {
      fail(e.kind(), "scoring " + p + " vs " + spec.test_path + ": " + e.what());
    }
    scores.push_back(s);
  }
  return scores.size() == 1 ? scores.front() : mean_score(scores);
}

std::vector<double> score_comparisons(const std::vector<ComparisonSpec>& specs, const Scorer& scorer,
                                      const SignatureStore& store, Exec exec) {
  std::vector<double> out(specs.size());
  for_each_index(specs.size(), exec,
                 [&](std::size_t i) { out[i] = score_comparison(specs[i], scorer, store); });
  return out;
}

namespace {

void check_scores(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    fail(ErrorKind::Configuration, "EER needs non-empty genuine and impostor score lists");
  }
}

/// Rates at every distinct threshold of the sorted score union, ascending.
template <class Visit>
void sweep(std::span<const double> genuine, std::span<const double> impostor, Visit visit) {
  std::vector<double> g(genuine.begin(), genuine.end()), im(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<double> all(g);
  all.insert(all.end(), im.begin(), im.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const double ng = static_cast<double>(g.size()), ni = static_cast<double>(im.size());
  std::size_t g_below = 0, i_below = 0;
  for (double t : all) {
    while (g_below < g.size() && g[g_below] < t) ++g_below;
    while (i_below < im.size() && im[i_below] < t) ++i_below;
    const double fnmr = static_cast<double>(g.size() - g_below) / ng;
    const double fmr = static_cast<double>(i_below) / ni;
    visit(t, fmr, fnmr);
  }
}

}  // namespace

EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  check_scores(genuine, impostor);
  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  sweep(genuine, impostor, [&](double t, double fmr, double fnmr) {
    const double gap = std::abs(fnmr - fmr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {(fnmr + fmr) / 2.0, t};
    }
  });
  return best;
}

std::vector<DetPoint> det_points(std::span<const double> genuine, std::span<const double> impostor) {
  check_scores(genuine, impostor);
  std::vector<DetPoint> out;
  sweep(genuine, impostor, [&](double t, double fmr, double fnmr) { out.push_back({t, fmr, fnmr}); });
  out.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return out;
}

std::vector<ReportSection> summarize(const std::vector<ComparisonSpec>& specs,
                                     const std::vector<double>& scores) {
  if (specs.size() != scores.size()) fail(ErrorKind::Configuration, "specs/scores size mismatch");
  std::vector<double> genuine, skilled, random, all;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    switch (specs[i].kind) {
      case ComparisonKind::Genuine: genuine.push_back(scores[i]); break;
      case ComparisonKind::Skilled: skilled.push_back(scores[i]); all.push_back(scores[i]); break;
      case ComparisonKind::Random: random.push_back(scores[i]); all.push_back(scores[i]); break;
    }
  }
  if (genuine.empty()) fail(ErrorKind::Configuration, "no genuine comparisons to evaluate");
  if (all.empty()) fail(ErrorKind::Configuration, "no impostor comparisons to evaluate");

  std::vector<ReportSection> out;
  auto add = [&](const char* name, const std::vector<double>& impostor) {
    if (impostor.empty()) return;
    out.push_back({name, compute_eer(genuine, impostor), genuine.size(), impostor.size(),
                   det_points(genuine, impostor)});
  };
  add("skilled", skilled);
  add("random", random);
  add("all", all);
  return out;
}

EvaluationReport evaluate(const DatasetManifest& manifest, const ProtocolConfig& config,
                          const Scorer& scorer,
                          const std::optional<std::vector<ComparisonSpec>>& comparisons, Exec exec) {
  config.validate();
  EvaluationReport report;
  if (comparisons) {
    report.specs = *comparisons;
  } else {
    auto plan = build_comparisons(manifest, config);
    report.specs = std::move(plan.specs);
    report.warnings = std::move(plan.warnings);
  }
  report.config = {
      {"scorer", scorer.name()},
      {"protocol", std::to_string(config.train_signatures) + "vs1"},
      {"impostors", config.skilled && config.random ? "skilled,random"
                    : config.skilled                ? "skilled"
                                                    : "random"},
      {"input_kind", config.input_kind ? to_string(*config.input_kind) : "any"},
      {"device", config.device.value_or("any")},
      {"comparisons", comparisons ? "file" : "built"},
  };
  const SignatureStore store(manifest, report.specs, exec);
  report.scores = score_comparisons(report.specs, scorer, store, exec);
  report.sections = summarize(report.specs, report.scores);
  return report;
}

}  // namespace tasign
