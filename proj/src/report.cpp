#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "tasign/error.hpp"
#include "tasign/protocol.hpp"

namespace tasign {

namespace {

std::string fmt(const char* pattern, double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string join_paths(const std::vector<std::string>& paths) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i) out += ',';
    out += paths[i];
  }
  return out;
}

}  // namespace

std::string format_det(const std::vector<DetPoint>& points) {
  std::string out = "threshold\tfmr\tfnmr\n";
  for (const auto& p : points) {
    out += fmt("%.9g", p.threshold) + '\t' + fmt("%.6f", p.fmr) + '\t' + fmt("%.6f", p.fnmr) + '\n';
  }
  return out;
}

std::string format_report(const EvaluationReport& report) {
  std::string out = "# tasign evaluation report\n\n[config]\n";
  for (const auto& [k, v] : report.config) out += k + " = " + v + '\n';

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& s : report.specs) ++counts[static_cast<int>(s.kind)];
  out += "\n[counts]\n";
  out += "genuine = " + std::to_string(counts[0]) + '\n';
  out += "skilled = " + std::to_string(counts[1]) + '\n';
  out += "random = " + std::to_string(counts[2]) + '\n';

  for (const auto& s : report.sections) {
    out += "\n[" + s.name + "]\n";
    out += "eer = " + fmt("%.6f", s.eer.eer) + '\n';
    out += "threshold = " + fmt("%.9g", s.eer.threshold) + '\n';
    out += "genuine = " + std::to_string(s.genuine) + '\n';
    out += "impostor = " + std::to_string(s.impostor) + '\n';
  }

  if (!report.warnings.empty()) {
    out += "\n[warnings]\n";
    for (const auto& w : report.warnings) out += w.user_id + ": " + w.message + '\n';
  }

  for (const auto& s : report.sections) {
    out += "\n[det." + s.name + "]\n";
    out += format_det(s.det);
  }
  return out;
}

std::string format_scores(const EvaluationReport& report) {
  std::string out = "enrolment\ttest\tkind\tscore\n";
  for (std::size_t i = 0; i < report.specs.size(); ++i) {
    const auto& s = report.specs[i];
    out += join_paths(s.enrolment_paths) + '\t' + s.test_path + '\t' + to_string(s.kind) + '\t' +
           fmt("%.17g", report.scores[i]) + '\n';
  }
  return out;
}

std::vector<ScoredComparison> parse_scores(std::string_view content) {
  std::vector<ScoredComparison> out;
  std::size_t start = 0, line_no = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = std::string(content.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.starts_with("enrolment\t") || line.starts_with('#')) continue;

    std::vector<std::string> f;
    std::size_t p = 0;
    for (;;) {
      auto tab = line.find('\t', p);
      f.push_back(line.substr(p, tab == std::string::npos ? std::string::npos : tab - p));
      if (tab == std::string::npos) break;
      p = tab + 1;
    }
    const std::string at = "score line " + std::to_string(line_no);
    if (f.size() != 4) fail(ErrorKind::Parse, at + ": expected 4 tab-separated fields");

    ScoredComparison sc;
    std::size_t q = 0;
    for (;;) {
      auto comma = f[0].find(',', q);
      sc.spec.enrolment_paths.push_back(f[0].substr(q, comma == std::string::npos ? std::string::npos : comma - q));
      if (comma == std::string::npos) break;
      q = comma + 1;
    }
    sc.spec.test_path = f[1];
    sc.spec.kind = parse_comparison_kind(f[2]);
    char* endp = nullptr;
    sc.score = std::strtod(f[3].c_str(), &endp);
    if (endp == f[3].c_str() || *endp != '\0') fail(ErrorKind::Parse, at + ": bad score '" + f[3] + "'");
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace tasign
