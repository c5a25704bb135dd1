#include "alm_audit/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <nlohmann/json.hpp>

#include "alm_audit/phase_vocoder.hpp"
#include "alm_audit/seeding.hpp"

namespace alm_audit {

namespace {

constexpr std::array<double, 4> kStretchRatios = {0.90, 0.95, 1.05, 1.10};
constexpr std::array<std::int64_t, 3> kShiftSamples = {1600, 16000, 32000};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void invalid(const std::string& what) { throw AttackError("invalid perturbation: " + what); }

void require_range(double v, double lo, double hi, const char* name) {
  if (!std::isfinite(v) || v < lo || v > hi) {
    invalid(std::string(name) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
            std::to_string(hi) + "]");
  }
}

AudioClip with_samples(const AudioClip& like, std::vector<double> samples) {
  return AudioClip(std::move(samples), like.sample_rate());
}

// Scales noise so that rms(clip) / rms(gain * noise) = 10^(snr_db / 20), then adds it.
AudioClip mix_at_snr(const AudioClip& clip, std::span<const double> noise, double snr_db) {
  if (!std::isfinite(snr_db)) throw AttackError("snr_db must be finite");
  const double clip_rms = rms(clip);
  if (clip_rms == 0.0) throw AttackError("SNR undefined for silent signal");
  const double noise_rms = rms(noise);
  if (noise_rms == 0.0) throw AttackError("SNR undefined for silent noise");
  const double gain = clip_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));

  std::vector<double> out(clip.samples().begin(), clip.samples().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gain * noise[i];
  return with_samples(clip, std::move(out));
}

const std::set<std::string>& expected_param_keys(AttackKind kind) {
  static const std::array<std::set<std::string>, 8> keys = {{
      {"snr_db"},
      {"snr_db"},
      {"ratio"},
      {"shift_samples"},
      {"factor"},
      {"fade_shape", "fade_direction", "fade_fraction"},
      {"delay_samples", "strength"},
      {},
  }};
  return keys[static_cast<std::size_t>(kind)];
}

}  // namespace

AttackKind PerturbationSpec::kind() const { return static_cast<AttackKind>(params.index()); }

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::WhiteNoise: return "white_noise";
    case AttackKind::EnvironmentalNoise: return "environmental_noise";
    case AttackKind::TimeStretch: return "time_stretch";
    case AttackKind::TimeShift: return "time_shift";
    case AttackKind::VolumeChange: return "volume_change";
    case AttackKind::Fade: return "fade";
    case AttackKind::Echo: return "echo";
    case AttackKind::Identity: return "identity";
  }
  return "unknown";
}

std::string_view to_string(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::BackgroundNoise: return "background_noise";
    case RecipeKind::TimePitch: return "time_pitch";
    case RecipeKind::ShapeSpace: return "shape_space";
  }
  return "unknown";
}

std::string_view to_string(FadeShape shape) {
  switch (shape) {
    case FadeShape::Linear: return "linear";
    case FadeShape::Logarithmic: return "logarithmic";
    case FadeShape::Exponential: return "exponential";
    case FadeShape::Sine: return "sine";
  }
  return "unknown";
}

std::string_view to_string(FadeDirection direction) {
  return direction == FadeDirection::FadeIn ? "fade_in" : "fade_out";
}

AttackKind attack_kind_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(AttackKind::Identity); ++i) {
    if (to_string(static_cast<AttackKind>(i)) == name) return static_cast<AttackKind>(i);
  }
  throw AttackError("unknown attack kind: " + std::string(name));
}

RecipeKind recipe_kind_from_string(std::string_view name) {
  for (auto k : {RecipeKind::BackgroundNoise, RecipeKind::TimePitch, RecipeKind::ShapeSpace}) {
    if (to_string(k) == name) return k;
  }
  throw AttackError("unknown recipe: " + std::string(name));
}

FadeShape fade_shape_from_string(std::string_view name) {
  for (auto s : {FadeShape::Linear, FadeShape::Logarithmic, FadeShape::Exponential, FadeShape::Sine}) {
    if (to_string(s) == name) return s;
  }
  throw AttackError("unknown fade shape: " + std::string(name));
}

FadeDirection fade_direction_from_string(std::string_view name) {
  if (name == "fade_in") return FadeDirection::FadeIn;
  if (name == "fade_out") return FadeDirection::FadeOut;
  throw AttackError("unknown fade direction: " + std::string(name));
}

void validate(const PerturbationSpec& spec) {
  const bool wants_noise = spec.kind() == AttackKind::EnvironmentalNoise;
  if (wants_noise && (!spec.noise_source || spec.noise_source->empty())) invalid("environmental noise needs noise_source");
  if (!wants_noise && spec.noise_source) invalid("noise_source only applies to environmental noise");

  std::visit(overloaded{
                 [](const WhiteNoiseParams& p) { require_range(p.snr_db, 15.0, 25.0, "snr_db"); },
                 [](const EnvironmentalNoiseParams& p) { require_range(p.snr_db, 5.0, 20.0, "snr_db"); },
                 [](const TimeStretchParams& p) {
                   const bool allowed = std::any_of(kStretchRatios.begin(), kStretchRatios.end(),
                                                    [&](double r) { return std::abs(r - p.ratio) < 1e-9; });
                   if (!allowed) invalid("ratio " + std::to_string(p.ratio) + " not in {0.90, 0.95, 1.05, 1.10}");
                 },
                 [](const TimeShiftParams& p) {
                   if (std::find(kShiftSamples.begin(), kShiftSamples.end(), p.shift_samples) == kShiftSamples.end()) {
                     invalid("shift_samples " + std::to_string(p.shift_samples) + " not in {1600, 16000, 32000}");
                   }
                 },
                 [](const VolumeChangeParams& p) { require_range(p.factor, 0.5, 2.0, "factor"); },
                 [](const FadeParams& p) {
                   if (!(p.fraction > 0.0 && p.fraction <= 0.5)) invalid("fade_fraction outside (0, 0.5]");
                 },
                 [](const EchoParams& p) {
                   if (p.delay_samples < 1000 || p.delay_samples > 2000) invalid("delay_samples outside [1000, 2000]");
                   require_range(p.strength, 0.2, 0.5, "strength");
                 },
                 [](const IdentityParams&) {},
             },
             spec.params);
}

void to_json(nlohmann::json& j, const PerturbationSpec& spec) {
  nlohmann::json params = nlohmann::json::object();
  std::visit(overloaded{
                 [&](const WhiteNoiseParams& p) { params["snr_db"] = p.snr_db; },
                 [&](const EnvironmentalNoiseParams& p) { params["snr_db"] = p.snr_db; },
                 [&](const TimeStretchParams& p) { params["ratio"] = p.ratio; },
                 [&](const TimeShiftParams& p) { params["shift_samples"] = p.shift_samples; },
                 [&](const VolumeChangeParams& p) { params["factor"] = p.factor; },
                 [&](const FadeParams& p) {
                   params["fade_shape"] = to_string(p.shape);
                   params["fade_direction"] = to_string(p.direction);
                   params["fade_fraction"] = p.fraction;
                 },
                 [&](const EchoParams& p) {
                   params["delay_samples"] = p.delay_samples;
                   params["strength"] = p.strength;
                 },
                 [](const IdentityParams&) {},
             },
             spec.params);
  j = nlohmann::json{{"kind", to_string(spec.kind())},
                     {"params", std::move(params)},
                     {"seed", spec.seed},
                     {"noise_source", spec.noise_source ? nlohmann::json(*spec.noise_source) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, PerturbationSpec& spec) {
  try {
    const AttackKind kind = attack_kind_from_string(j.at("kind").get<std::string>());
    const nlohmann::json& p = j.contains("params") ? j.at("params") : nlohmann::json::object();
    if (!p.is_object()) invalid("params must be an object");

    std::set<std::string> present;
    for (const auto& [key, _] : p.items()) present.insert(key);
    if (present != expected_param_keys(kind)) invalid("params do not match schema of " + std::string(to_string(kind)));

    PerturbationSpec out;
    switch (kind) {
      case AttackKind::WhiteNoise: out.params = WhiteNoiseParams{p.at("snr_db").get<double>()}; break;
      case AttackKind::EnvironmentalNoise: out.params = EnvironmentalNoiseParams{p.at("snr_db").get<double>()}; break;
      case AttackKind::TimeStretch: out.params = TimeStretchParams{p.at("ratio").get<double>()}; break;
      case AttackKind::TimeShift: out.params = TimeShiftParams{p.at("shift_samples").get<std::int64_t>()}; break;
      case AttackKind::VolumeChange: out.params = VolumeChangeParams{p.at("factor").get<double>()}; break;
      case AttackKind::Fade:
        out.params = FadeParams{fade_shape_from_string(p.at("fade_shape").get<std::string>()),
                                fade_direction_from_string(p.at("fade_direction").get<std::string>()),
                                p.at("fade_fraction").get<double>()};
        break;
      case AttackKind::Echo:
        out.params = EchoParams{p.at("delay_samples").get<std::int64_t>(), p.at("strength").get<double>()};
        break;
      case AttackKind::Identity: out.params = IdentityParams{}; break;
    }
    out.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("noise_source") && !j.at("noise_source").is_null()) {
      out.noise_source = j.at("noise_source").get<std::string>();
    }
    spec = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw AttackError(std::string("malformed perturbation spec: ") + e.what());
  }
}

AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw AttackError("snr_db must be finite");
  if (rms(clip) == 0.0) throw AttackError("SNR undefined for silent signal");

  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(clip.size());
  for (double& n : noise) n = gauss(rng);
  return mix_at_snr(clip, noise, snr_db);
}

AudioClip add_environmental_noise(const AudioClip& clip, const AudioClip& noise, double snr_db) {
  if (rms(noise) == 0.0) throw AttackError("SNR undefined for silent noise");
  std::vector<double> tiled(clip.size());
  const auto src = noise.samples();
  for (std::size_t i = 0; i < tiled.size(); ++i) tiled[i] = src[i % src.size()];
  return mix_at_snr(clip, tiled, snr_db);
}

AudioClip time_stretch(const AudioClip& clip, double ratio) {
  try {
    return with_samples(clip, phase_vocoder_stretch(clip.samples(), ratio));
  } catch (const std::invalid_argument& e) {
    throw AttackError(e.what());
  }
}

AudioClip time_shift(const AudioClip& clip, std::int64_t shift_samples) {
  if (shift_samples < 0) throw AttackError("shift_samples must be non-negative");
  const auto n = clip.size();
  const auto shift = static_cast<std::size_t>(shift_samples) % n;
  std::vector<double> out(n);
  // out[i] = in[(i - shift) mod n]
  std::rotate_copy(clip.samples().begin(), clip.samples().end() - static_cast<std::ptrdiff_t>(shift),
                   clip.samples().end(), out.begin());
  return with_samples(clip, std::move(out));
}

AudioClip change_volume(const AudioClip& clip, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw AttackError("volume factor must be positive");
  std::vector<double> out(clip.samples().begin(), clip.samples().end());
  for (double& s : out) s *= factor;
  return with_samples(clip, std::move(out));
}

double fade_envelope(FadeShape shape, std::size_t i, std::size_t ramp_length) {
  const double x = static_cast<double>(i) / static_cast<double>(ramp_length);
  switch (shape) {
    case FadeShape::Linear: return x;
    case FadeShape::Sine: return std::sin(std::numbers::pi * x / 2.0);
    case FadeShape::Exponential: return (std::exp(x) - 1.0) / (std::numbers::e - 1.0);
    case FadeShape::Logarithmic: return std::log(1.0 + 9.0 * x) / std::log(10.0);
  }
  return x;
}

AudioClip apply_fade(const AudioClip& clip, FadeShape shape, FadeDirection direction, double fraction) {
  if (!(fraction > 0.0 && fraction <= 0.5)) throw AttackError("fade fraction must lie in (0, 0.5]");
  const std::size_t n = clip.size();
  const auto ramp = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<double> out(clip.samples().begin(), clip.samples().end());
  for (std::size_t i = 0; i < ramp; ++i) {
    const double env = fade_envelope(shape, i, ramp);
    if (direction == FadeDirection::FadeIn) {
      out[i] *= env;
    } else {
      out[n - 1 - i] *= env;
    }
  }
  return with_samples(clip, std::move(out));
}

AudioClip add_echo(const AudioClip& clip, std::int64_t delay_samples, double strength) {
  const auto n = static_cast<std::int64_t>(clip.size());
  if (delay_samples <= 0 || delay_samples >= n) throw AttackError("echo delay must lie in (0, clip length)");
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw AttackError("echo strength must be non-negative");
  const auto in = clip.samples();
  std::vector<double> out(in.begin(), in.end());
  const auto delay = static_cast<std::size_t>(delay_samples);
  for (std::size_t t = delay; t < out.size(); ++t) out[t] += strength * in[t - delay];
  return with_samples(clip, std::move(out));
}

PerturbationSpec sample_recipe(RecipeKind kind, std::uint64_t seed, std::span<const std::string> noise_corpus) {
  boost::random::mt19937_64 rng(mix_seed(seed, 0x5265636970650001ULL));
  auto pick = [&rng](std::size_t n) { return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto uniform = [&rng](double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(rng); };

  PerturbationSpec spec;
  spec.seed = seed;
  switch (kind) {
    case RecipeKind::BackgroundNoise: {
      const bool environmental = !noise_corpus.empty() && pick(2) == 1;
      if (environmental) {
        spec.params = EnvironmentalNoiseParams{uniform(5.0, 20.0)};
        spec.noise_source = noise_corpus[pick(noise_corpus.size())];
      } else {
        spec.params = WhiteNoiseParams{uniform(15.0, 25.0)};
      }
      break;
    }
    case RecipeKind::TimePitch:
      if (pick(2) == 0) {
        spec.params = TimeStretchParams{kStretchRatios[pick(kStretchRatios.size())]};
      } else {
        spec.params = TimeShiftParams{kShiftSamples[pick(kShiftSamples.size())]};
      }
      break;
    case RecipeKind::ShapeSpace:
      switch (pick(3)) {
        case 0: spec.params = VolumeChangeParams{uniform(0.5, 2.0)}; break;
        case 1: {
          FadeParams fade;
          fade.shape = static_cast<FadeShape>(pick(4));
          fade.direction = static_cast<FadeDirection>(pick(2));
          // uniform on (0, 0.5]
          fade.fraction = 0.5 - uniform(0.0, 0.5);
          spec.params = fade;
          break;
        }
        default: {
          const auto delay = static_cast<std::int64_t>(1000 + pick(1001));
          spec.params = EchoParams{delay, uniform(0.2, 0.5)};
          break;
        }
      }
      break;
  }
  return spec;
}

AudioClip apply(const PerturbationSpec& spec, const AudioClip& clip, const NoiseLoader& load_noise) {
  validate(spec);
  return std::visit(
      overloaded{
          [&](const WhiteNoiseParams& p) { return add_white_noise(clip, p.snr_db, spec.seed); },
          [&](const EnvironmentalNoiseParams& p) {
            const AudioClip noise = load_noise ? load_noise(*spec.noise_source) : load_wav(*spec.noise_source);
            return add_environmental_noise(clip, noise, p.snr_db);
          },
          [&](const TimeStretchParams& p) { return time_stretch(clip, p.ratio); },
          [&](const TimeShiftParams& p) { return time_shift(clip, p.shift_samples); },
          [&](const VolumeChangeParams& p) { return change_volume(clip, p.factor); },
          [&](const FadeParams& p) { return apply_fade(clip, p.shape, p.direction, p.fraction); },
          [&](const EchoParams& p) { return add_echo(clip, p.delay_samples, p.strength); },
          [&](const IdentityParams&) { return clip; },
      },
      spec.params);
}

}  // namespace alm_audit
