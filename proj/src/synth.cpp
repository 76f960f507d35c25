#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tasign/error.hpp"
#include "tasign/ingest.hpp"
#include "tasign/rng.hpp"

namespace tasign {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSampleRateHz = 100.0;

struct Component {
  double amplitude;
  double freq;  // cycles per signature
  double phase;
};

struct PenUp {
  double start;  // normalized time
  double width;
};

/// The writer's "template": everything a genuine sample is a perturbation of.
struct UserModel {
  std::vector<Component> x, y;
  double drift_x = 0.0;
  double duration_s = 0.0;
  double pressure_level = 0.0;
  double pressure_freq = 0.0;
  double pressure_phase = 0.0;
  double pressure_depth = 0.0;
  std::vector<PenUp> pen_ups;
  std::vector<double> session_dx, session_dy;
};

std::vector<Component> draw_components(Rng& rng) {
  const int n = rng.uniform_int(3, 6);
  std::vector<Component> out;
  for (int k = 0; k < n; ++k) {
    const double freq = rng.uniform(0.5, 6.0);
    const double amp = rng.uniform(300.0, 1400.0) / (1.0 + 0.25 * freq);
    out.push_back({amp, freq, rng.uniform(0.0, kTwoPi)});
  }
  return out;
}

UserModel draw_user(Rng& rng, int sessions) {
  UserModel u;
  u.x = draw_components(rng);
  u.y = draw_components(rng);
  u.drift_x = rng.uniform(1000.0, 4000.0);
  // Keeps the +-10% forger time-warp and the slowdown factor inside the 2-6 s range.
  u.duration_s = rng.uniform(2.2, 4.0);
  u.pressure_level = rng.uniform(300.0, 700.0);
  u.pressure_freq = rng.uniform(1.0, 4.0);
  u.pressure_phase = rng.uniform(0.0, kTwoPi);
  u.pressure_depth = rng.uniform(0.1, 0.4);
  const int ups = rng.uniform_int(0, 2);
  for (int k = 0; k < ups; ++k) {
    u.pen_ups.push_back({rng.uniform(0.15, 0.8), rng.uniform(0.02, 0.05)});
  }
  for (int s = 0; s < sessions; ++s) {
    u.session_dx.push_back(rng.uniform(-300.0, 300.0));
    u.session_dy.push_back(rng.uniform(-300.0, 300.0));
  }
  return u;
}

double eval_components(const std::vector<Component>& comps, const std::vector<double>& amp_scale,
                       const std::vector<double>& phase_shift, double s) {
  double v = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    v += comps[k].amplitude * amp_scale[k] *
         std::sin(kTwoPi * comps[k].freq * s + comps[k].phase + phase_shift[k]);
  }
  return v;
}

void moving_average(std::vector<double>& v, int half) {
  const int n = static_cast<int>(v.size());
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int k = lo; k <= hi; ++k) acc += v[k];
    out[i] = acc / (hi - lo + 1);
  }
  v.swap(out);
}

/// Renders one realization. Forgeries double the perturbation scale `j` and are
/// smoothed and slowed down.
std::vector<PenSample> render(const UserModel& u, int session, bool forgery, Rng& rng) {
  const double j = forgery ? 2.0 : 1.0;
  auto perturb = [&](const std::vector<Component>& comps, std::vector<double>& amp,
                     std::vector<double>& phase) {
    for (std::size_t k = 0; k < comps.size(); ++k) {
      amp.push_back(1.0 + rng.uniform(-0.05 * j, 0.05 * j));
      phase.push_back(rng.uniform(-0.05 * j, 0.05 * j));
    }
  };
  std::vector<double> ax, px, ay, py;
  perturb(u.x, ax, px);
  perturb(u.y, ay, py);

  double duration = u.duration_s * (1.0 + rng.uniform(-0.05 * j, 0.05 * j));
  if (forgery) duration *= rng.uniform(1.1, 1.35);
  const double warp = rng.uniform(-0.05 * j, 0.05 * j);
  const double pressure_scale = 1.0 + rng.uniform(-0.05 * j, 0.05 * j);
  const double pressure_phase = rng.uniform(-0.05 * j, 0.05 * j);
  const double drift = u.drift_x * (1.0 + rng.uniform(-0.05 * j, 0.05 * j));
  const double off_x = u.session_dx[session - 1];
  const double off_y = u.session_dy[session - 1];

  const int n = std::max(8, static_cast<int>(std::lround(duration * kSampleRateHz)));
  std::vector<double> xs(n), ys(n), ps(n);
  std::vector<bool> down(n, true);
  for (int i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / (n - 1);
    const double s = tau + warp * std::sin(std::numbers::pi * tau);
    xs[i] = off_x + drift * s + eval_components(u.x, ax, px, s) + rng.normal(0.0, 1.0);
    ys[i] = off_y + eval_components(u.y, ay, py, s) + rng.normal(0.0, 1.0);
    const double ramp = std::min({1.0, s / 0.03 + 0.05, (1.0 - s) / 0.03 + 0.05});
    ps[i] = u.pressure_level * pressure_scale * ramp *
            (1.0 - u.pressure_depth +
             u.pressure_depth * std::sin(kTwoPi * u.pressure_freq * s + u.pressure_phase +
                                         pressure_phase));
    for (const auto& up : u.pen_ups) {
      if (s >= up.start && s < up.start + up.width) down[i] = false;
    }
  }
  if (forgery) {
    moving_average(xs, 4);
    moving_average(ys, 4);
    moving_average(ps, 6);
  }

  std::vector<PenSample> out(n);
  for (int i = 0; i < n; ++i) {
    auto& smp = out[i];
    smp.t = static_cast<std::int64_t>(i) * 10;
    smp.x = std::llround(xs[i]);
    smp.y = std::llround(ys[i]);
    smp.pen_down = down[i];
    smp.p = down[i] ? std::clamp<std::int64_t>(std::llround(ps[i]), 1, 1023) : 0;
  }
  return out;
}

std::string file_name(int user, const char* kind, int session, int index) {
  char buf[64];
  if (session > 0) {
    std::snprintf(buf, sizeof buf, "u%03d_s%d_%s%02d.txt", user, session, kind, index);
  } else {
    std::snprintf(buf, sizeof buf, "u%03d_%s%02d.txt", user, kind, index);
  }
  return buf;
}

}  // namespace

std::vector<RawSignature> synth_signatures(const SynthConfig& config,
                                           std::vector<ManifestEntry>* entries) {
  if (config.n_users < 2) fail(ErrorKind::Configuration, "synth needs at least 2 users");
  if (config.sessions < 1 || config.genuine_per_session < 1 || config.forgeries_per_user < 0) {
    fail(ErrorKind::Configuration, "synth needs sessions >= 1, genuine >= 1, forgeries >= 0");
  }
  std::vector<RawSignature> sigs;
  if (entries) entries->clear();
  for (int u = 0; u < config.n_users; ++u) {
    const auto user_seed = mix_seed(config.seed, static_cast<std::uint64_t>(u));
    Rng user_rng(user_seed);
    const auto model = draw_user(user_rng, config.sessions);
    char uid[16];
    std::snprintf(uid, sizeof uid, "u%03d", u + 1);

    int sample_index = 0;
    auto emit = [&](int session, Label label, std::string name) {
      Rng rng(mix_seed(user_seed, static_cast<std::uint64_t>(1000 + sample_index++)));
      RawSignature sig;
      sig.samples = render(model, session, label == Label::SkilledForgery, rng);
      sig.user_id = uid;
      sig.session = session;
      sig.device = config.device;
      sig.input_kind = InputKind::Stylus;
      sig.label = label;
      if (entries) {
        entries->push_back({std::move(name), sig.user_id, session, sig.device, sig.input_kind, label});
      }
      sigs.push_back(std::move(sig));
    };
    for (int s = 1; s <= config.sessions; ++s) {
      for (int g = 1; g <= config.genuine_per_session; ++g) {
        emit(s, Label::Genuine, file_name(u + 1, "g", s, g));
      }
    }
    for (int f = 1; f <= config.forgeries_per_user; ++f) {
      const int session = 1 + (f - 1) % config.sessions;
      emit(session, Label::SkilledForgery, file_name(u + 1, "f", 0, f));
    }
  }
  return sigs;
}

DatasetManifest synth_dataset(const SynthConfig& config, const std::filesystem::path& out_dir) {
  std::vector<ManifestEntry> entries;
  const auto sigs = synth_signatures(config, &entries);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    write_file(out_dir / entries[i].path, write_signature(sigs[i]));
  }
  manifest.entries = std::move(entries);
  save_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace tasign
