// tasign: on-line signature verification with DTW-aligned Siamese BGRU scoring.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "tasign/error.hpp"
#include "tasign/protocol.hpp"
#include "tasign/rng.hpp"
#include "tasign/train.hpp"

namespace {

using namespace tasign;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kParse = 3,
  kNumeric = 4,
  kIo = 5,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return kUsage;
    case ErrorKind::Parse:
    case ErrorKind::Degenerate:
    case ErrorKind::Ordering:
    case ErrorKind::Reference:
    case ErrorKind::Consistency: return kParse;
    case ErrorKind::Numeric:
    case ErrorKind::PathMismatch: return kNumeric;
    case ErrorKind::Io: return kIo;
  }
  return kFailure;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_file(path, content);
  }
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ManifestEntry entry_for(const std::string& path, const std::string& input_kind) {
  ManifestEntry e;
  e.path = path;
  e.input_kind = parse_input_kind(input_kind);
  return e;
}

struct Options {
  std::uint64_t synth_seed = 7, train_seed = 1, gradcheck_seed = 1;
  int jobs = 0;

  // synth
  SynthConfig synth;
  std::string out;
  int eval_users = 0;

  // extract / align
  std::string input, enrol, test, input_kind = "stylus";
  bool raw = false;
  std::string cost_channels = "dX,dY";

  // train
  std::string manifest, history;
  net::TrainConfig train;
  bool no_balance = false;

  // gradcheck
  int len = 20;
  std::size_t samples = 200;
  double eps = 1e-5;
  int label = 1;
  int draws = 1;
  double param_std = 0.3;

  // evaluate / det
  std::string scorer = "dtw", checkpoint, protocol = "1vs1", comparisons, impostors = "skilled,random";
  std::string filter_input_kind, device, report, scores, kind = "all";
};

void apply_seed_env(std::uint64_t& seed) {
  if (const char* env = std::getenv("TASIGN_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') fail(ErrorKind::Configuration, "TASIGN_SEED must be an unsigned integer");
    seed = v;
  }
}

int run_synth(Options& o) {
  o.synth.seed = o.synth_seed;
  auto manifest = synth_dataset(o.synth, o.out);
  if (o.eval_users > 0) {
    auto users = manifest.users();
    if (o.eval_users >= static_cast<int>(users.size()) - 1) {
      fail(ErrorKind::Configuration, "--eval-users must leave at least 2 development users");
    }
    const auto split = users.end() - o.eval_users;
    save_manifest(manifest.subset({users.begin(), split}), std::filesystem::path(o.out) / "manifest_train.tsv");
    save_manifest(manifest.subset({split, users.end()}), std::filesystem::path(o.out) / "manifest_eval.tsv");
  }
  std::cerr << "wrote " << manifest.entries.size() << " signatures to "
            << (std::filesystem::path(o.out) / "manifest.tsv").string() << '\n';
  return kOk;
}

int run_extract(const Options& o) {
  const auto sig = parse_signature(read_file(o.input), entry_for(o.input, o.input_kind));
  auto tf = extract_time_functions(sig);
  if (!o.raw) tf = normalize(tf);
  if (sig.input_kind == InputKind::Finger) tf = zero_pressure_channels(tf);
  emit(o.out, format_channels(tf.channels));
  return kOk;
}

int run_align(const Options& o) {
  const auto channels = parse_channel_list(o.cost_channels);
  const auto a = prepare_time_functions(parse_signature(read_file(o.enrol), entry_for(o.enrol, o.input_kind)));
  const auto b = prepare_time_functions(parse_signature(read_file(o.test), entry_for(o.test, o.input_kind)));
  const auto r = dtw_path(a, b, channels);
  const auto pair = apply_path(a, b, r.path);

  std::string out = "# distance\t" + format_g(r.distance) + '\n';
  out += "# score\t" + format_g(r.distance / static_cast<double>(r.path.size())) + '\n';
  out += "# length\t" + std::to_string(r.path.size()) + '\n';
  out += "k\ti\tj";
  for (const char* side : {"a.", "b."}) {
    for (int c = 0; c < kNumChannels; ++c) {
      out += '\t';
      out += side;
      out += channel_name(static_cast<Channel>(c));
    }
  }
  out += '\n';
  for (std::size_t k = 0; k < r.path.size(); ++k) {
    out += std::to_string(k) + '\t' + std::to_string(r.path.pairs[k].first) + '\t' +
           std::to_string(r.path.pairs[k].second);
    for (const auto* m : {&pair.a, &pair.b}) {
      for (int c = 0; c < kNumChannels; ++c) out += '\t' + format_g((*m)(c, static_cast<Eigen::Index>(k)));
    }
    out += '\n';
  }
  emit(o.out, out);
  return kOk;
}

int run_train(Options& o) {
  auto cfg = o.train;
  cfg.seed = o.train_seed;
  cfg.balance = !o.no_balance;
  cfg.cost_channels = parse_channel_list(o.cost_channels);
  cfg.validate();
  const auto manifest = load_manifest(o.manifest);

  std::string history = "epoch\ttrain_loss\tvalidation_loss\n";
  const auto result = net::train(manifest, cfg, Exec::Parallel, [&](const net::EpochStats& s) {
    std::cerr << "epoch " << s.epoch << "  train_loss " << s.train_loss;
    if (!std::isnan(s.validation_loss)) std::cerr << "  validation_loss " << s.validation_loss;
    std::cerr << '\n';
    history += std::to_string(s.epoch) + '\t' + format_g(s.train_loss) + '\t' +
               format_g(s.validation_loss) + '\n';
  });
  net::save_checkpoint({result.params, net::describe(cfg)}, o.out);
  if (!o.history.empty()) write_file(o.history, history);
  return kOk;
}

int run_gradcheck(const Options& o) {
  if (o.len < 1) fail(ErrorKind::Configuration, "--len must be >= 1");
  if (o.label != 0 && o.label != 1) fail(ErrorKind::Configuration, "--label must be 0 or 1");
  double worst = 0.0;
  for (int d = 0; d < o.draws; ++d) {
    const auto draw_seed = mix_seed(o.gradcheck_seed, static_cast<std::uint64_t>(d));
    const auto params = net::init_params(draw_seed, o.param_std);
    Rng rng(mix_seed(draw_seed, 1));
    net::Matrix a(kNumChannels, o.len), b(kNumChannels, o.len);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    const auto r = net::gradient_check(params, a, b, o.label, o.samples, o.eps, mix_seed(draw_seed, 2));
    std::cout << "draw " << d << ": checked " << r.checked << " parameters, max relative error "
              << format_g(r.max_rel_error) << " (index " << r.worst_index << ", analytic "
              << format_g(r.worst_analytic) << ", numeric " << format_g(r.worst_numeric) << ")\n";
    worst = std::max(worst, r.max_rel_error);
  }
  std::cout << "max relative error " << format_g(worst) << '\n';
  return worst < 1e-4 ? kOk : kNumeric;
}

int run_evaluate(const Options& o) {
  ProtocolConfig pc;
  if (o.protocol == "1vs1") {
    pc.train_signatures = 1;
  } else if (o.protocol == "4vs1") {
    pc.train_signatures = 4;
  } else {
    fail(ErrorKind::Configuration, "--protocol must be 1vs1 or 4vs1");
  }
  pc.skilled = o.impostors.find("skilled") != std::string::npos;
  pc.random = o.impostors.find("random") != std::string::npos;
  if (!o.filter_input_kind.empty()) pc.input_kind = parse_input_kind(o.filter_input_kind);
  if (!o.device.empty()) pc.device = o.device;

  std::unique_ptr<Scorer> scorer;
  if (o.scorer == "dtw") {
    scorer = std::make_unique<DtwScorer>(parse_channel_list(o.cost_channels));
  } else if (o.scorer == "tarnn") {
    if (o.checkpoint.empty()) fail(ErrorKind::Configuration, "--scorer tarnn needs --checkpoint");
    auto ckpt = net::load_checkpoint(o.checkpoint);
    scorer = std::make_unique<TarnnScorer>(std::move(ckpt.params), ckpt.cost_channels(), ckpt.max_len());
  } else {
    fail(ErrorKind::Configuration, "--scorer must be dtw or tarnn");
  }

  const auto manifest = load_manifest(o.manifest);
  std::optional<std::vector<ComparisonSpec>> specs;
  if (!o.comparisons.empty()) specs = load_comparisons(o.comparisons, manifest);
  const auto report = evaluate(manifest, pc, *scorer, specs);
  emit(o.report, format_report(report));
  if (!o.scores.empty()) write_file(o.scores, format_scores(report));
  return kOk;
}

int run_det(const Options& o) {
  const auto scored = parse_scores(read_file(o.scores));
  std::vector<double> genuine, impostor;
  for (const auto& s : scored) {
    if (s.spec.kind == ComparisonKind::Genuine) {
      genuine.push_back(s.score);
    } else if (o.kind == "all" || o.kind == to_string(s.spec.kind)) {
      impostor.push_back(s.score);
    }
  }
  const auto eer = compute_eer(genuine, impostor);
  std::string out = "# eer\t" + format_g(eer.eer) + "\n# threshold\t" + format_g(eer.threshold) + '\n';
  out += format_det(det_points(genuine, impostor));
  emit(o.out, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"On-line signature verification: time functions, DTW, Siamese BGRU, EER/DET"};
  app.set_config("--config", "", "TOML/INI file with flag defaults");
  app.require_subcommand(1);

  auto seed_flag = [&](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "Random seed (TASIGN_SEED overrides)")->capture_default_str();
  };
  auto jobs_flag = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  };

  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic dataset and manifest");
  synth->add_option("--users", o.synth.n_users, "Number of users")->capture_default_str();
  synth->add_option("--genuine-per-session", o.synth.genuine_per_session, "Genuine signatures per session")
      ->capture_default_str();
  synth->add_option("--sessions", o.synth.sessions, "Sessions per user")->capture_default_str();
  synth->add_option("--forgeries", o.synth.forgeries_per_user, "Skilled forgeries per user")
      ->capture_default_str();
  synth->add_option("--eval-users", o.eval_users,
                    "Also write manifest_train.tsv / manifest_eval.tsv with the last N users held out")
      ->capture_default_str();
  synth->add_option("--out", o.out, "Output directory")->required();
  seed_flag(synth, o.synth_seed);

  auto* extract = app.add_subcommand("extract", "Dump the 23 time functions of one signature file");
  extract->add_option("--input", o.input, "Signature file")->required();
  extract->add_option("--input-kind", o.input_kind, "stylus or finger")->capture_default_str();
  extract->add_flag("--raw", o.raw, "Skip z-normalization");
  extract->add_option("--out", o.out, "Output file (default: standard output)");

  auto* align = app.add_subcommand("align", "DTW-align two signatures and dump the aligned channels");
  align->add_option("--enrol", o.enrol, "Enrolled signature file")->required();
  align->add_option("--test", o.test, "Test signature file")->required();
  align->add_option("--input-kind", o.input_kind, "stylus or finger")->capture_default_str();
  align->add_option("--cost-channels", o.cost_channels, "Channels driving the DTW cost")->capture_default_str();
  align->add_option("--out", o.out, "Output file (default: standard output)");

  auto* train = app.add_subcommand("train", "Train the Siamese scorer from scratch");
  train->add_option("--manifest", o.manifest, "Development manifest")->required();
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--epochs", o.train.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch-size", o.train.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--max-len", o.train.max_len, "Aligned sequence cap (tail truncation)")->capture_default_str();
  train->add_option("--validation-fraction", o.train.validation_fraction, "Fraction of users held out")
      ->capture_default_str();
  train->add_option("--pairs-per-epoch", o.train.pairs_per_epoch, "Pairs drawn per epoch (0 = all)")
      ->capture_default_str();
  train->add_option("--learning-rate", o.train.adam.lr, "Adam learning rate")->capture_default_str();
  train->add_flag("--no-balance", o.no_balance, "Do not balance genuine and impostor pairs");
  train->add_option("--cost-channels", o.cost_channels, "Channels driving the DTW alignment")
      ->capture_default_str();
  train->add_option("--history", o.history, "Write per-epoch losses as TSV");
  seed_flag(train, o.train_seed);
  jobs_flag(train);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare backprop against central finite differences");
  gradcheck->add_option("--len", o.len, "Sequence length of the toy pair")->capture_default_str();
  gradcheck->add_option("--samples", o.samples, "Parameters checked per draw")->capture_default_str();
  gradcheck->add_option("--eps", o.eps, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--label", o.label, "Pair label (0 genuine, 1 impostor)")->capture_default_str();
  gradcheck->add_option("--draws", o.draws, "Independent (params, pair) draws")->capture_default_str();
  gradcheck->add_option("--param-std", o.param_std, "Std of the Gaussian parameter draw")
      ->capture_default_str();
  seed_flag(gradcheck, o.gradcheck_seed);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score the benchmark comparisons and report EER/DET");
  evaluate_cmd->add_option("--manifest", o.manifest, "Evaluation manifest")->required();
  evaluate_cmd->add_option("--scorer", o.scorer, "dtw or tarnn")->capture_default_str();
  evaluate_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint for --scorer tarnn");
  evaluate_cmd->add_option("--protocol", o.protocol, "1vs1 or 4vs1")->capture_default_str();
  evaluate_cmd->add_option("--comparisons", o.comparisons, "Comparison file (default: built from the manifest)");
  evaluate_cmd->add_option("--impostors", o.impostors, "skilled, random or skilled,random")->capture_default_str();
  evaluate_cmd->add_option("--input-kind", o.filter_input_kind, "Only use stylus or finger signatures");
  evaluate_cmd->add_option("--device", o.device, "Only use signatures from this device");
  evaluate_cmd->add_option("--cost-channels", o.cost_channels, "DTW baseline channels")->capture_default_str();
  evaluate_cmd->add_option("--report", o.report, "Report path (default: standard output)");
  evaluate_cmd->add_option("--scores", o.scores, "Write per-comparison scores as TSV");
  jobs_flag(evaluate_cmd);

  auto* det = app.add_subcommand("det", "DET points and EER from a score dump");
  det->add_option("--scores", o.scores, "Score TSV written by evaluate")->required();
  det->add_option("--kind", o.kind, "skilled, random or all")->capture_default_str();
  det->add_option("--out", o.out, "Output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    for (auto* seed : {&o.synth_seed, &o.train_seed, &o.gradcheck_seed}) apply_seed_env(*seed);
    set_threads(o.jobs);
    if (*synth) return run_synth(o);
    if (*extract) return run_extract(o);
    if (*align) return run_align(o);
    if (*train) return run_train(o);
    if (*gradcheck) return run_gradcheck(o);
    if (*evaluate_cmd) return run_evaluate(o);
    if (*det) return run_det(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
