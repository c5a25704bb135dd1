#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alm_audit/audio.hpp"

namespace alm_audit {

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AttackKind { WhiteNoise, EnvironmentalNoise, TimeStretch, TimeShift, VolumeChange, Fade, Echo, Identity };

// The three acoustic recipes; each samples one attack from its family.
enum class RecipeKind { BackgroundNoise, TimePitch, ShapeSpace };

enum class FadeShape { Linear, Logarithmic, Exponential, Sine };
enum class FadeDirection { FadeIn, FadeOut };

struct WhiteNoiseParams {
  double snr_db = 20.0;
};
struct EnvironmentalNoiseParams {
  double snr_db = 10.0;
};
// ratio is the duration scale: 0.90 makes the clip 10% shorter.
struct TimeStretchParams {
  double ratio = 1.0;
};
struct TimeShiftParams {
  std::int64_t shift_samples = 0;
};
struct VolumeChangeParams {
  double factor = 1.0;
};
struct FadeParams {
  FadeShape shape = FadeShape::Linear;
  FadeDirection direction = FadeDirection::FadeIn;
  double fraction = 0.5;
};
struct EchoParams {
  std::int64_t delay_samples = 1000;
  double strength = 0.2;
};
struct IdentityParams {};

using AttackParams = std::variant<WhiteNoiseParams, EnvironmentalNoiseParams, TimeStretchParams, TimeShiftParams,
                                  VolumeChangeParams, FadeParams, EchoParams, IdentityParams>;

// One sampled attack instance. The seed drives every random draw the attack
// makes, so apply() is a pure function of (spec, clip).
struct PerturbationSpec {
  AttackParams params = IdentityParams{};
  std::uint64_t seed = 0;
  // Path of the noise WAV; only EnvironmentalNoise carries one.
  std::optional<std::string> noise_source;

  AttackKind kind() const;
};

std::string_view to_string(AttackKind kind);
std::string_view to_string(RecipeKind kind);
std::string_view to_string(FadeShape shape);
std::string_view to_string(FadeDirection direction);
AttackKind attack_kind_from_string(std::string_view name);
RecipeKind recipe_kind_from_string(std::string_view name);
FadeShape fade_shape_from_string(std::string_view name);
FadeDirection fade_direction_from_string(std::string_view name);

// Throws AttackError when parameters fall outside the recipe ranges.
void validate(const PerturbationSpec& spec);

void to_json(nlohmann::json& j, const PerturbationSpec& spec);
// Rejects unknown kinds and parameter sets that do not exactly match the kind.
void from_json(const nlohmann::json& j, PerturbationSpec& spec);

// Adds seeded Gaussian noise scaled so that the added component sits exactly
// snr_db below the clip.
AudioClip add_white_noise(const AudioClip& clip, double snr_db, std::uint64_t seed);

// Tiles (or truncates) noise to the clip length, scales it to snr_db and adds it.
AudioClip add_environmental_noise(const AudioClip& clip, const AudioClip& noise, double snr_db);

AudioClip time_stretch(const AudioClip& clip, double ratio);
AudioClip time_shift(const AudioClip& clip, std::int64_t shift_samples);
AudioClip change_volume(const AudioClip& clip, double factor);
AudioClip apply_fade(const AudioClip& clip, FadeShape shape, FadeDirection direction, double fraction);
AudioClip add_echo(const AudioClip& clip, std::int64_t delay_samples, double strength);

// Envelope value at position i of a K-sample ramp, rising from 0 toward 1.
double fade_envelope(FadeShape shape, std::size_t i, std::size_t ramp_length);

// Draws an attack and its parameters from the recipe's distributions.
// EnvironmentalNoise is only drawn when noise_corpus is non-empty; the file is
// chosen uniformly from the corpus in the order given.
PerturbationSpec sample_recipe(RecipeKind kind, std::uint64_t seed, std::span<const std::string> noise_corpus = {});

using NoiseLoader = std::function<AudioClip(const std::string&)>;

// Validates `spec`, then dispatches. EnvironmentalNoise resolves its
// noise_source through `load_noise` (load_wav by default).
AudioClip apply(const PerturbationSpec& spec, const AudioClip& clip, const NoiseLoader& load_noise = {});

}  // namespace alm_audit
