#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tasign {

enum class InputKind { Stylus, Finger };
enum class Label { Genuine, SkilledForgery };
enum class ComparisonKind { Genuine, Skilled, Random };

const char* to_string(InputKind kind);
const char* to_string(Label label);
const char* to_string(ComparisonKind kind);
InputKind parse_input_kind(std::string_view text);
Label parse_label(std::string_view text);
ComparisonKind parse_comparison_kind(std::string_view text);

struct PenSample {
  std::int64_t t = 0;  // ms since the first sample
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t p = 0;  // 0 when pen-up or finger input
  bool pen_down = true;

  friend bool operator==(const PenSample&, const PenSample&) = default;
};

/// One row of a dataset manifest. `path` is the key used by comparison files.
struct ManifestEntry {
  std::string path;
  std::string user_id;
  int session = 1;
  std::string device;
  InputKind input_kind = InputKind::Stylus;
  Label label = Label::Genuine;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct RawSignature {
  std::vector<PenSample> samples;
  std::string user_id;
  int session = 1;
  std::string device;
  InputKind input_kind = InputKind::Stylus;
  Label label = Label::Genuine;

  std::size_t size() const { return samples.size(); }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Directory that relative entry paths resolve against.
  std::filesystem::path base_dir;

  const ManifestEntry* find(std::string_view path) const;
  std::filesystem::path resolve(const ManifestEntry& entry) const;
  /// Ordered list of distinct user ids in first-appearance order.
  std::vector<std::string> users() const;
  /// Entries whose user is in `users`, order preserved.
  DatasetManifest subset(const std::vector<std::string>& users) const;
};

struct ComparisonSpec {
  std::vector<std::string> enrolment_paths;  // 1 or 4
  std::string test_path;
  ComparisonKind kind = ComparisonKind::Genuine;

  friend bool operator==(const ComparisonSpec&, const ComparisonSpec&) = default;
};

// Signature text format:
//   # optional comment lines
//   T
//   t x y p pen_down      (T lines)

/// Parses a signature file body. Timestamps are re-based so the first sample is t = 0.
/// Metadata is copied from `meta`; its path is used in error messages.
RawSignature parse_signature(std::string_view content, const ManifestEntry& meta);

/// Canonical text form; parse_signature inverts it exactly.
std::string write_signature(const RawSignature& sig);

/// Throws Degenerate/Consistency errors for signatures violating the type invariants.
void validate_signature(const RawSignature& sig);

RawSignature load_signature(const DatasetManifest& manifest, const ManifestEntry& entry);

/// Tab-separated: path user session device input label. Lines starting '#' are skipped.
/// With `check_files`, every referenced signature is parsed once.
DatasetManifest parse_manifest(std::string_view content, std::filesystem::path base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = false);
std::string write_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// One comparison per line: "<enrol>[,<enrol>x3] <test> <kind>".
std::vector<ComparisonSpec> parse_comparisons(std::string_view content,
                                              const DatasetManifest& manifest);
std::vector<ComparisonSpec> load_comparisons(const std::filesystem::path& path,
                                             const DatasetManifest& manifest);
std::string write_comparisons(const std::vector<ComparisonSpec>& specs);

struct SynthConfig {
  int n_users = 40;
  int genuine_per_session = 4;
  int sessions = 2;
  int forgeries_per_user = 4;
  std::uint64_t seed = 7;
  std::string device = "synthetic";
};

/// Writes one signature file per sample plus `manifest.tsv` under out_dir and returns
/// the manifest. Output depends only on the config.
DatasetManifest synth_dataset(const SynthConfig& config, const std::filesystem::path& out_dir);

/// In-memory variant of synth_dataset; signature i belongs to manifest entry i.
std::vector<RawSignature> synth_signatures(const SynthConfig& config,
                                           std::vector<ManifestEntry>* entries);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tasign
