#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "tasign/dtw.hpp"
#include "tasign/error.hpp"
#include "tasign/train.hpp"

using namespace tasign;
using tasign::testing::TempDir;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

const char* kManifest =
    "u1_s1_g1.txt\tu1\t1\tdev\tstylus\tgenuine\n"
    "u1_s1_g2.txt\tu1\t1\tdev\tstylus\tgenuine\n"
    "u1_s1_g3.txt\tu1\t1\tdev\tstylus\tgenuine\n"
    "u1_s1_g4.txt\tu1\t1\tdev\tstylus\tgenuine\n"
    "u1_s2_g5.txt\tu1\t2\tdev\tstylus\tgenuine\n"
    "u1_f1.txt\tu1\t1\tdev\tstylus\tskilled_forgery\n"
    "u2_s1_g1.txt\tu2\t1\tdev\tstylus\tgenuine\n"
    "u2_f1.txt\tu2\t1\tdev\tstylus\tskilled_forgery\n";

}  // namespace

TEST_CASE("three-line body maps fields directly") {
  const auto sig = parse_signature("3\n0 100 200 512 1\n10 105 203 520 1\n20 110 210 500 1\n", {});
  REQUIRE(sig.size() == 3);
  CHECK(sig.samples[0] == PenSample{0, 100, 200, 512, true});
  CHECK(sig.samples[1] == PenSample{10, 105, 203, 520, true});
  CHECK(sig.samples[2].t == 20);
  CHECK(sig.samples[2].p == 500);
}

TEST_CASE("timestamps are re-based to zero and comments skipped") {
  const auto sig = parse_signature("# device A\n\n2\n1000 0 0 7 1\n1010 1 1 8 1\n", {});
  CHECK(sig.samples[0].t == 0);
  CHECK(sig.samples[1].t == 10);
}

TEST_CASE("malformed signatures raise typed errors") {
  CHECK(kind_of([] { parse_signature("1\n0 0 0 5 1\n", {}); }) == ErrorKind::Degenerate);
  CHECK(kind_of([] { parse_signature("2\n0 0 0 5 1\n10 0 0 0 0\n", {}); }) == ErrorKind::Degenerate);
  CHECK(kind_of([] { parse_signature("2\n10 0 0 5 1\n0 1 1 5 1\n", {}); }) == ErrorKind::Ordering);
  CHECK(kind_of([] { parse_signature("3\n0 0 0 5 1\n10 1 1 5 1\n", {}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_signature("2\n0 0 0 5\n10 1 1 5 1\n", {}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_signature("2\n0 0 0 5 2\n10 1 1 5 1\n", {}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_signature("2\n0 a 0 5 1\n10 1 1 5 1\n", {}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_signature("3\n0 0 0 5 1\n10 1 1 5 1\n20 2 2 3 0\n", {}); }) ==
        ErrorKind::Consistency);
  CHECK(kind_of([] { parse_signature("2\n0 0 0 -1 1\n10 1 1 5 1\n", {}); }) == ErrorKind::Consistency);

  ManifestEntry finger;
  finger.input_kind = InputKind::Finger;
  CHECK(kind_of([&] { parse_signature("2\n0 0 0 5 1\n10 1 1 0 1\n", finger); }) ==
        ErrorKind::Consistency);
  CHECK_NOTHROW(parse_signature("2\n0 0 0 0 1\n10 1 1 0 1\n", finger));
}

TEST_CASE("error messages carry the offending path") {
  ManifestEntry meta;
  meta.path = "u9_bad.txt";
  try {
    parse_signature("2\n10 0 0 5 1\n0 1 1 5 1\n", meta);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("u9_bad.txt") != std::string::npos);
  }
}

TEST_CASE("write_signature emits the canonical form") {
  const auto sig = testing::signature_from({{0, 0, 0, 0, true}, {10, 1, 1, 1, true}});
  CHECK(write_signature(sig) == "2\n0 0 0 0 1\n10 1 1 1 1\n");

  const auto up = testing::signature_from({{0, 0, 0, 9, true}, {5, 2, 2, 0, false}, {10, 1, 1, 1, true}});
  CHECK(write_signature(up) == "3\n0 0 0 9 1\n5 2 2 0 0\n10 1 1 1 1\n");
}

TEST_CASE("parse inverts write on generated signatures") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    auto sig = testing::random_signature(rng, rng.uniform_int(2, 60));
    // Sprinkle pen-up samples and repeated timestamps.
    for (auto& s : sig.samples) {
      if (rng.uniform() < 0.2) {
        s.pen_down = false;
        s.p = 0;
      }
    }
    sig.samples[0].pen_down = sig.samples[1].pen_down = true;
    sig.samples[0].p = sig.samples[1].p = 3;
    const auto text = write_signature(sig);
    const auto back = parse_signature(text, {});
    REQUIRE(back.samples == sig.samples);
    CHECK(write_signature(back) == text);
  }
}

TEST_CASE("manifest parsing, duplicates and round trip") {
  const auto m = parse_manifest(kManifest, "/data");
  REQUIRE(m.entries.size() == 8);
  CHECK(m.entries[5].label == Label::SkilledForgery);
  CHECK(m.entries[4].session == 2);
  CHECK(m.users() == std::vector<std::string>{"u1", "u2"});
  CHECK(m.resolve(m.entries[0]) == std::filesystem::path("/data/u1_s1_g1.txt"));
  CHECK(parse_manifest(write_manifest(m), "/data").entries == m.entries);
  CHECK(parse_manifest(kManifest, "/data").entries == m.entries);
  CHECK(m.subset({"u2"}).entries.size() == 2);

  CHECK(kind_of([] { parse_manifest("a.txt\tu1\t1\tdev\tstylus\n", "."); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_manifest("a.txt\tu1\t0\tdev\tstylus\tgenuine\n", "."); }) == ErrorKind::Parse);
  CHECK(kind_of([] { parse_manifest("a.txt\tu1\t1\tdev\tpen\tgenuine\n", "."); }) == ErrorKind::Parse);
  CHECK(kind_of([] {
          parse_manifest("a.txt\tu1\t1\tdev\tstylus\tgenuine\na.txt\tu1\t1\tdev\tstylus\tgenuine\n", ".");
        }) == ErrorKind::Consistency);
}

TEST_CASE("comparison files") {
  const auto m = parse_manifest(kManifest, ".");

  const auto one = parse_comparisons("u1_s1_g1.txt u1_s2_g5.txt genuine\n", m);
  REQUIRE(one.size() == 1);
  CHECK(one[0].enrolment_paths == std::vector<std::string>{"u1_s1_g1.txt"});
  CHECK(one[0].test_path == "u1_s2_g5.txt");
  CHECK(one[0].kind == ComparisonKind::Genuine);

  const auto four = parse_comparisons(
      "# 4vs1\nu1_s1_g1.txt,u1_s1_g2.txt,u1_s1_g3.txt,u1_s1_g4.txt u1_f1.txt skilled\n"
      "u1_s1_g1.txt u2_s1_g1.txt random\n",
      m);
  REQUIRE(four.size() == 2);
  CHECK(four[0].enrolment_paths.size() == 4);
  CHECK(four[1].kind == ComparisonKind::Random);
  CHECK(parse_comparisons(write_comparisons(four), m) == four);

  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt missing.txt genuine\n", m); }) == ErrorKind::Reference);
  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt u1_s2_g5.txt forged\n", m); }) == ErrorKind::Parse);
  CHECK(kind_of([&] {
          parse_comparisons("u1_s1_g1.txt,u2_s1_g1.txt,u1_s1_g3.txt,u1_s1_g4.txt u1_f1.txt skilled\n", m);
        }) == ErrorKind::Consistency);
  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt,u1_s1_g2.txt u1_f1.txt skilled\n", m); }) ==
        ErrorKind::Parse);
  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt u2_s1_g1.txt genuine\n", m); }) ==
        ErrorKind::Consistency);
  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt u2_f1.txt skilled\n", m); }) == ErrorKind::Consistency);
  CHECK(kind_of([&] { parse_comparisons("u1_s1_g1.txt u1_s2_g5.txt random\n", m); }) ==
        ErrorKind::Consistency);
  CHECK(kind_of([&] { parse_comparisons("u1_f1.txt u1_s2_g5.txt genuine\n", m); }) == ErrorKind::Consistency);
}

TEST_CASE("missing files raise I/O errors") {
  CHECK(kind_of([] { read_file("/nonexistent/dir/file.txt"); }) == ErrorKind::Io);
  CHECK(kind_of([] { load_manifest("/nonexistent/dir/manifest.tsv"); }) == ErrorKind::Io);
  CHECK(kind_of([] { write_file("/nonexistent/dir/out.txt", "x"); }) == ErrorKind::Io);
}

TEST_CASE("synth counts") {
  SynthConfig cfg;
  cfg.n_users = 2;
  cfg.sessions = 1;
  cfg.genuine_per_session = 1;
  cfg.forgeries_per_user = 1;
  TempDir dir("synth_counts");
  const auto m = synth_dataset(cfg, dir.path());
  CHECK(m.entries.size() == 4);
  CHECK(load_manifest(dir / "manifest.tsv", true).entries == m.entries);

  SynthConfig big;
  big.n_users = 3;
  std::vector<ManifestEntry> entries;
  const auto sigs = synth_signatures(big, &entries);
  CHECK(sigs.size() == 3u * (2 * 4 + 4));
  for (const auto& s : sigs) {
    CHECK_NOTHROW(validate_signature(s));
    // 100 Hz sampling, 2-6 s.
    CHECK(s.samples[1].t - s.samples[0].t == 10);
    CHECK(s.size() >= 200);
    CHECK(s.size() <= 600 * 135 / 100 + 1);
  }
}

TEST_CASE("synth is byte-deterministic") {
  SynthConfig cfg;
  cfg.n_users = 3;
  cfg.seed = 1234;
  TempDir a("synth_a"), b("synth_b");
  synth_dataset(cfg, a.path());
  synth_dataset(cfg, b.path());
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  REQUIRE(names.size() == 3u * 12 + 1);
  for (const auto& n : names) {
    REQUIRE(std::filesystem::exists(b / n));
    CHECK(read_file(a / n) == read_file(b / n));
  }

  cfg.seed = 1235;
  TempDir c("synth_c");
  synth_dataset(cfg, c.path());
  CHECK(read_file(a / names.back()) != read_file(c / names.back()));
}

TEST_CASE("synthetic forgeries sit farther from genuine signatures under DTW") {
  SynthConfig cfg;
  cfg.n_users = 20;
  std::vector<ManifestEntry> entries;
  const auto sigs = synth_signatures(cfg, &entries);
  const auto corpus = TrainingCorpus::from_signatures(entries, sigs);

  double genuine_sum = 0.0, forgery_sum = 0.0;
  int genuine_n = 0, forgery_n = 0;
  for (const auto& user : parse_manifest(write_manifest({entries, "."}), ".").users()) {
    int reference = -1;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].user_id != user) continue;
      if (entries[i].label == Label::Genuine && entries[i].session == 1 && reference < 0) {
        reference = static_cast<int>(i);
        continue;
      }
      if (reference < 0) continue;
      const double d = dtw_path(corpus.time_functions[reference], corpus.time_functions[i],
                                default_cost_channels())
                           .distance;
      if (entries[i].label == Label::Genuine) {
        genuine_sum += d;
        ++genuine_n;
      } else {
        forgery_sum += d;
        ++forgery_n;
      }
    }
  }
  REQUIRE(genuine_n > 0);
  REQUIRE(forgery_n > 0);
  CHECK(genuine_sum / genuine_n < forgery_sum / forgery_n);
}
