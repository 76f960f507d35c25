#include "tasign/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tasign/error.hpp"

namespace tasign {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::PathMismatch: return "path-mismatch";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

const char* to_string(InputKind kind) {
  return kind == InputKind::Stylus ? "stylus" : "finger";
}

const char* to_string(Label label) {
  return label == Label::Genuine ? "genuine" : "skilled_forgery";
}

const char* to_string(ComparisonKind kind) {
  switch (kind) {
    case ComparisonKind::Genuine: return "genuine";
    case ComparisonKind::Skilled: return "skilled";
    case ComparisonKind::Random: return "random";
  }
  return "unknown";
}

InputKind parse_input_kind(std::string_view text) {
  if (text == "stylus") return InputKind::Stylus;
  if (text == "finger") return InputKind::Finger;
  fail(ErrorKind::Parse, "unknown input kind '" + std::string(text) + "'");
}

Label parse_label(std::string_view text) {
  if (text == "genuine") return Label::Genuine;
  if (text == "skilled_forgery") return Label::SkilledForgery;
  fail(ErrorKind::Parse, "unknown label '" + std::string(text) + "'");
}

ComparisonKind parse_comparison_kind(std::string_view text) {
  if (text == "genuine") return ComparisonKind::Genuine;
  if (text == "skilled") return ComparisonKind::Skilled;
  if (text == "random") return ComparisonKind::Random;
  fail(ErrorKind::Parse, "unknown comparison kind '" + std::string(text) + "'");
}

namespace {

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto end = line.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::optional<std::int64_t> to_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string where(const ManifestEntry& meta, std::size_t line_no) {
  std::string file = meta.path.empty() ? "<signature>" : meta.path;
  return file + ":" + std::to_string(line_no);
}

}  // namespace

void validate_signature(const RawSignature& sig) {
  const auto down = std::count_if(sig.samples.begin(), sig.samples.end(),
                                  [](const PenSample& s) { return s.pen_down; });
  if (down < 2) {
    fail(ErrorKind::Degenerate, "signature has " + std::to_string(down) +
                                    " pen-down samples, at least 2 required");
  }
  for (std::size_t i = 0; i < sig.samples.size(); ++i) {
    const auto& s = sig.samples[i];
    if (i > 0 && s.t < sig.samples[i - 1].t) {
      fail(ErrorKind::Ordering, "timestamp decreases at sample " + std::to_string(i));
    }
    if (s.p < 0) fail(ErrorKind::Consistency, "negative pressure at sample " + std::to_string(i));
    if (!s.pen_down && s.p != 0) {
      fail(ErrorKind::Consistency, "pen-up sample with pressure at sample " + std::to_string(i));
    }
    if (sig.input_kind == InputKind::Finger && s.p != 0) {
      fail(ErrorKind::Consistency, "finger input with pressure at sample " + std::to_string(i));
    }
  }
}

RawSignature parse_signature(std::string_view content, const ManifestEntry& meta) {
  RawSignature sig;
  sig.user_id = meta.user_id;
  sig.session = meta.session;
  sig.device = meta.device;
  sig.input_kind = meta.input_kind;
  sig.label = meta.label;

  const auto lines = split_lines(content);
  std::size_t i = 0;
  while (i < lines.size() && (lines[i].starts_with('#') || is_blank(lines[i]))) ++i;
  if (i == lines.size()) fail(ErrorKind::Degenerate, where(meta, i + 1) + ": no samples");

  const auto header = split_ws(lines[i]);
  std::optional<std::int64_t> count;
  if (header.size() == 1) count = to_int(header[0]);
  if (!count || *count < 0) {
    fail(ErrorKind::Parse, where(meta, i + 1) + ": expected sample count header");
  }
  ++i;

  sig.samples.reserve(static_cast<std::size_t>(*count));
  for (; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto fields = split_ws(lines[i]);
    if (fields.size() != 5) {
      fail(ErrorKind::Parse, where(meta, i + 1) + ": expected 5 fields, got " +
                                 std::to_string(fields.size()));
    }
    std::int64_t v[5];
    for (int k = 0; k < 5; ++k) {
      auto parsed = to_int(fields[k]);
      if (!parsed) {
        fail(ErrorKind::Parse, where(meta, i + 1) + ": non-numeric field '" +
                                   std::string(fields[k]) + "'");
      }
      v[k] = *parsed;
    }
    if (v[4] != 0 && v[4] != 1) {
      fail(ErrorKind::Parse, where(meta, i + 1) + ": pen_down must be 0 or 1");
    }
    if (!sig.samples.empty() && v[0] < sig.samples.back().t) {
      fail(ErrorKind::Ordering, where(meta, i + 1) + ": decreasing timestamp");
    }
    sig.samples.push_back({v[0], v[1], v[2], v[3], v[4] == 1});
  }
  if (static_cast<std::int64_t>(sig.samples.size()) != *count) {
    fail(ErrorKind::Parse, where(meta, lines.size()) + ": header announces " +
                               std::to_string(*count) + " samples, body has " +
                               std::to_string(sig.samples.size()));
  }

  if (!sig.samples.empty()) {
    const auto t0 = sig.samples.front().t;
    for (auto& s : sig.samples) s.t -= t0;
  }
  try {
    validate_signature(sig);
  } catch (const Error& e) {
    fail(e.kind(), (meta.path.empty() ? std::string("<signature>") : meta.path) + ": " + e.what());
  }
  return sig;
}

std::string write_signature(const RawSignature& sig) {
  std::string out = std::to_string(sig.samples.size());
  out += '\n';
  for (const auto& s : sig.samples) {
    out += std::to_string(s.t);
    out += ' ';
    out += std::to_string(s.x);
    out += ' ';
    out += std::to_string(s.y);
    out += ' ';
    out += std::to_string(s.pen_down ? s.p : 0);
    out += ' ';
    out += s.pen_down ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

const ManifestEntry* DatasetManifest::find(std::string_view path) const {
  for (const auto& e : entries) {
    if (e.path == path) return &e;
  }
  return nullptr;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> DatasetManifest::users() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.user_id).second) out.push_back(e.user_id);
  }
  return out;
}

DatasetManifest DatasetManifest::subset(const std::vector<std::string>& users) const {
  std::set<std::string> keep(users.begin(), users.end());
  DatasetManifest out;
  out.base_dir = base_dir;
  for (const auto& e : entries) {
    if (keep.count(e.user_id)) out.entries.push_back(e);
  }
  return out;
}

RawSignature load_signature(const DatasetManifest& manifest, const ManifestEntry& entry) {
  return parse_signature(read_file(manifest.resolve(entry)), entry);
}

DatasetManifest parse_manifest(std::string_view content, std::filesystem::path base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = std::move(base_dir);
  std::set<std::string> paths;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].starts_with('#') || is_blank(lines[i])) continue;
    const auto f = split(lines[i], '\t');
    const std::string at = "manifest line " + std::to_string(i + 1);
    if (f.size() != 6) fail(ErrorKind::Parse, at + ": expected 6 tab-separated fields");
    ManifestEntry e;
    e.path = std::string(f[0]);
    e.user_id = std::string(f[1]);
    auto session = to_int(f[2]);
    if (!session || *session < 1) fail(ErrorKind::Parse, at + ": session must be a positive integer");
    e.session = static_cast<int>(*session);
    e.device = std::string(f[3]);
    try {
      e.input_kind = parse_input_kind(f[4]);
      e.label = parse_label(f[5]);
    } catch (const Error& err) {
      fail(ErrorKind::Parse, at + ": " + err.what());
    }
    if (e.path.empty() || e.user_id.empty()) fail(ErrorKind::Parse, at + ": empty path or user");
    if (!paths.insert(e.path).second) fail(ErrorKind::Consistency, at + ": duplicate path " + e.path);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  auto manifest = parse_manifest(read_file(path), path.parent_path());
  if (check_files) {
    for (const auto& e : manifest.entries) load_signature(manifest, e);
  }
  return manifest;
}

std::string write_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    out += e.path + '\t' + e.user_id + '\t' + std::to_string(e.session) + '\t' + e.device + '\t' +
           to_string(e.input_kind) + '\t' + to_string(e.label) + '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file(path, write_manifest(manifest));
}

std::vector<ComparisonSpec> parse_comparisons(std::string_view content,
                                              const DatasetManifest& manifest) {
  std::vector<ComparisonSpec> specs;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].starts_with('#') || is_blank(lines[i])) continue;
    const std::string at = "comparison line " + std::to_string(i + 1);
    const auto fields = split_ws(lines[i]);
    if (fields.size() != 3) fail(ErrorKind::Parse, at + ": expected '<enrol> <test> <kind>'");

    ComparisonSpec spec;
    try {
      spec.kind = parse_comparison_kind(fields[2]);
    } catch (const Error& err) {
      fail(ErrorKind::Parse, at + ": " + err.what());
    }
    for (auto p : split(fields[0], ',')) spec.enrolment_paths.emplace_back(p);
    spec.test_path = std::string(fields[1]);
    if (spec.enrolment_paths.size() != 1 && spec.enrolment_paths.size() != 4) {
      fail(ErrorKind::Parse, at + ": expected 1 or 4 enrolment paths");
    }

    const ManifestEntry* first = nullptr;
    for (const auto& p : spec.enrolment_paths) {
      const auto* e = manifest.find(p);
      if (!e) fail(ErrorKind::Reference, at + ": unknown path " + p);
      if (e->label != Label::Genuine) {
        fail(ErrorKind::Consistency, at + ": enrolment signature " + p + " is not genuine");
      }
      if (first && e->user_id != first->user_id) {
        fail(ErrorKind::Consistency, at + ": enrolment signatures from different users");
      }
      if (!first) first = e;
    }
    const auto* test = manifest.find(spec.test_path);
    if (!test) fail(ErrorKind::Reference, at + ": unknown path " + spec.test_path);

    const bool same_user = test->user_id == first->user_id;
    switch (spec.kind) {
      case ComparisonKind::Genuine:
        if (!same_user || test->label != Label::Genuine) {
          fail(ErrorKind::Consistency, at + ": genuine comparison needs a genuine test of the same user");
        }
        break;
      case ComparisonKind::Skilled:
        if (!same_user || test->label != Label::SkilledForgery) {
          fail(ErrorKind::Consistency, at + ": skilled comparison needs a forgery of the enrolled user");
        }
        break;
      case ComparisonKind::Random:
        if (same_user || test->label != Label::Genuine) {
          fail(ErrorKind::Consistency, at + ": random comparison needs another user's genuine signature");
        }
        break;
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<ComparisonSpec> load_comparisons(const std::filesystem::path& path,
                                             const DatasetManifest& manifest) {
  return parse_comparisons(read_file(path), manifest);
}

std::string write_comparisons(const std::vector<ComparisonSpec>& specs) {
  std::string out;
  for (const auto& s : specs) {
    for (std::size_t k = 0; k < s.enrolment_paths.size(); ++k) {
      if (k) out += ',';
      out += s.enrolment_paths[k];
    }
    out += ' ' + s.test_path + ' ' + to_string(s.kind) + '\n';
  }
  return out;
}

}  // namespace tasign
