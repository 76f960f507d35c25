#include <bit>
#include <cstdint>
#include <cstdio>
#include <cmath>
#include <cstring>

#include "tasign/error.hpp"
#include "tasign/train.hpp"

namespace tasign::net {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'A', 'S', 'I', 'G', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct ArraySpec {
  std::string name;
  std::size_t offset;
  std::uint32_t rows, cols;
};

std::vector<ArraySpec> array_specs() {
  std::vector<ArraySpec> out;
  auto gru = [&](const std::string& prefix, std::size_t offset, int input, int hidden) {
    const auto g = static_cast<std::uint32_t>(3 * hidden);
    out.push_back({prefix + ".W", offset, g, static_cast<std::uint32_t>(input)});
    offset += static_cast<std::size_t>(g) * input;
    out.push_back({prefix + ".U", offset, g, static_cast<std::uint32_t>(hidden)});
    offset += static_cast<std::size_t>(g) * hidden;
    out.push_back({prefix + ".b", offset, g, 1});
  };
  gru("branch.fwd", kBranchFwdOffset, kBranchInput, kBranchHidden);
  gru("branch.bwd", kBranchBwdOffset, kBranchInput, kBranchHidden);
  gru("merge.fwd", kMergeFwdOffset, kMergeInput, kMergeHidden);
  gru("merge.bwd", kMergeBwdOffset, kMergeInput, kMergeHidden);
  out.push_back({"head.w", kHeadOffset, kHeadInput, 1});
  out.push_back({"head.b", kHeadOffset + kHeadInput, 1, 1});
  return out;
}

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail(ErrorKind::Parse, "checkpoint truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::string str() { return std::string(take(u32())); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::map<std::string, std::string> describe(const TrainConfig& c) {
  std::string channels;
  for (auto ch : c.cost_channels) {
    if (!channels.empty()) channels += ',';
    channels += channel_name(ch);
  }
  char lr[32];
  std::snprintf(lr, sizeof lr, "%.17g", c.adam.lr);
  return {
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"max_len", std::to_string(c.max_len)},
      {"seed", std::to_string(c.seed)},
      {"balance", c.balance ? "1" : "0"},
      {"validation_fraction", std::to_string(c.validation_fraction)},
      {"pairs_per_epoch", std::to_string(c.pairs_per_epoch)},
      {"cost_channels", channels},
      {"learning_rate", lr},
  };
}

int Checkpoint::max_len() const {
  auto it = config.find("max_len");
  return it == config.end() ? TrainConfig{}.max_len : std::stoi(it->second);
}

std::vector<Channel> Checkpoint::cost_channels() const {
  auto it = config.find("cost_channels");
  return it == config.end() ? default_cost_channels() : parse_channel_list(it->second);
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  std::string cfg;
  for (const auto& [k, v] : ckpt.config) cfg += k + '=' + v + '\n';
  put_str(out, cfg);
  const auto specs = array_specs();
  put_u32(out, static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    put_str(out, s.name);
    put_u32(out, s.rows);
    put_u32(out, s.cols);
    const auto n = static_cast<std::size_t>(s.rows) * s.cols;
    out.append(reinterpret_cast<const char*>(ckpt.params.values.data() + s.offset), n * sizeof(double));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    fail(ErrorKind::Parse, "not a checkpoint file");
  }
  if (const auto v = in.u32(); v != kVersion) {
    fail(ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ckpt;
  const auto cfg = in.str();
  std::size_t start = 0;
  while (start < cfg.size()) {
    auto end = cfg.find('\n', start);
    if (end == std::string::npos) end = cfg.size();
    const auto line = cfg.substr(start, end - start);
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Parse, "bad checkpoint config line '" + line + "'");
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
    start = end + 1;
  }

  const auto specs = array_specs();
  if (in.u32() != specs.size()) fail(ErrorKind::Parse, "checkpoint array count mismatch");
  for (const auto& s : specs) {
    const auto name = in.str();
    const auto rows = in.u32(), cols = in.u32();
    if (name != s.name || rows != s.rows || cols != s.cols) {
      fail(ErrorKind::Parse, "checkpoint array '" + name + "' (" + std::to_string(rows) + "x" +
                                 std::to_string(cols) + ") does not match expected '" + s.name +
                                 "' (" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")");
    }
    const auto n = static_cast<std::size_t>(rows) * cols;
    const auto data = in.take(n * sizeof(double));
    std::memcpy(ckpt.params.values.data() + s.offset, data.data(), data.size());
  }
  if (!in.done()) fail(ErrorKind::Parse, "trailing bytes after checkpoint");
  for (double v : ckpt.params.values) {
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "checkpoint holds non-finite parameters");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace tasign::net
