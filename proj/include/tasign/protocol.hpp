#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tasign/network.hpp"
#include "tasign/parallel.hpp"

namespace tasign {

struct ProtocolConfig {
  int train_signatures = 1;  // 1vs1 or 4vs1
  bool skilled = true;
  bool random = true;
  std::optional<InputKind> input_kind;
  std::optional<std::string> device;

  void validate() const;
};

struct ProtocolWarning {
  std::string user_id;
  std::string message;
};

struct ComparisonPlan {
  std::vector<ComparisonSpec> specs;
  std::vector<ProtocolWarning> warnings;
};

/// Enrolment: first 1 or 4 session-1 genuine signatures. Genuine tests: every genuine
/// signature from session 2 on. Skilled tests: all forgeries of the user. Random tests:
/// the first session-1 genuine signature of every other user.
ComparisonPlan build_comparisons(const DatasetManifest& manifest, const ProtocolConfig& config);

/// One-to-one dissimilarity between an enrolled and a test signature; higher means
/// more impostor-like.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const TimeFunctionSet& enrolled, const TimeFunctionSet& test) const = 0;
  virtual std::string name() const = 0;
};

class DtwScorer : public Scorer {
 public:
  explicit DtwScorer(std::vector<Channel> cost_channels = default_cost_channels())
      : channels_(std::move(cost_channels)) {}
  double score(const TimeFunctionSet& enrolled, const TimeFunctionSet& test) const override;
  std::string name() const override { return "dtw"; }

 private:
  std::vector<Channel> channels_;
};

class TarnnScorer : public Scorer {
 public:
  TarnnScorer(net::ModelParams params, std::vector<Channel> cost_channels, int max_len)
      : params_(std::move(params)), channels_(std::move(cost_channels)), max_len_(max_len) {}
  double score(const TimeFunctionSet& enrolled, const TimeFunctionSet& test) const override;
  std::string name() const override { return "tarnn"; }

 private:
  net::ModelParams params_;
  std::vector<Channel> channels_;
  int max_len_;
};

/// Normalized time functions of every signature a comparison list touches.
class SignatureStore {
 public:
  SignatureStore(const DatasetManifest& manifest, const std::vector<ComparisonSpec>& specs,
                 Exec exec = Exec::Parallel);

  const TimeFunctionSet& get(const std::string& path) const;

 private:
  std::vector<std::string> paths_;  // sorted
  std::vector<TimeFunctionSet> tfs_;
};

/// Mean of one-to-one scores, summed in ascending order so the result does not depend
/// on the order of the enrolment list.
double mean_score(std::span<const double> scores);

/// 1vs1: the single one-to-one score. 4vs1: mean_score of the four.
double score_comparison(const ComparisonSpec& spec, const Scorer& scorer,
                        const SignatureStore& store);

std::vector<double> score_comparisons(const std::vector<ComparisonSpec>& specs, const Scorer& scorer,
                                      const SignatureStore& store, Exec exec = Exec::Parallel);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Threshold sweep over the sorted union of scores with FNMR(t) = P(genuine >= t) and
/// FMR(t) = P(impostor < t). Picks the t minimizing |FNMR - FMR| (smallest t on ties)
/// and reports the mean of the two rates there.
EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);

struct DetPoint {
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
};

/// One point per distinct score, ascending, plus a final point above every score
/// (FMR = 1, FNMR = 0).
std::vector<DetPoint> det_points(std::span<const double> genuine, std::span<const double> impostor);

struct ReportSection {
  std::string name;  // skilled, random or all
  EerResult eer;
  std::size_t genuine = 0;
  std::size_t impostor = 0;
  std::vector<DetPoint> det;
};

struct EvaluationReport {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<ComparisonSpec> specs;
  std::vector<double> scores;
  std::vector<ReportSection> sections;
  std::vector<ProtocolWarning> warnings;
};

/// Pools one genuine score list against each impostor kind present, plus all impostors.
std::vector<ReportSection> summarize(const std::vector<ComparisonSpec>& specs,
                                     const std::vector<double>& scores);

EvaluationReport evaluate(const DatasetManifest& manifest, const ProtocolConfig& config,
                          const Scorer& scorer,
                          const std::optional<std::vector<ComparisonSpec>>& comparisons = std::nullopt,
                          Exec exec = Exec::Parallel);

std::string format_report(const EvaluationReport& report);

/// enrolment<TAB>test<TAB>kind<TAB>score, one line per comparison.
std::string format_scores(const EvaluationReport& report);

struct ScoredComparison {
  ComparisonSpec spec;
  double score = 0.0;
};
std::vector<ScoredComparison> parse_scores(std::string_view content);

/// threshold<TAB>fmr<TAB>fnmr table with a header row.
std::string format_det(const std::vector<DetPoint>& points);

}  // namespace tasign
