#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "alm_audit/attacks.hpp"
#include "alm_audit/seeding.hpp"

namespace alm_audit {
namespace {

AudioClip random_clip(std::uint64_t seed, std::size_t n = 16000) {
  boost::random::mt19937_64 rng(seed);
  boost::random::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return AudioClip(std::move(x), kCanonicalSampleRate);
}

AudioClip residual(const AudioClip& out, const AudioClip& in) {
  std::vector<double> r(in.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = out[i] - in[i];
  return AudioClip(std::move(r), in.sample_rate());
}

class WhiteNoiseSnr : public ::testing::TestWithParam<double> {};

TEST_P(WhiteNoiseSnr, ResidualHitsTarget) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const AudioClip in = random_clip(s);
    const AudioClip out = add_white_noise(in, GetParam(), mix_seed(s, 1));
    EXPECT_NEAR(measured_snr_db(in, residual(out, in)), GetParam(), 0.01);
  }
}

INSTANTIATE_TEST_SUITE_P(Targets, WhiteNoiseSnr, ::testing::Values(5.0, 10.0, 15.0, 20.0, 25.0));

TEST(WhiteNoise, SeedDeterminesOutput) {
  const AudioClip in = random_clip(3);
  EXPECT_EQ(add_white_noise(in, 20.0, 9), add_white_noise(in, 20.0, 9));
  EXPECT_NE(add_white_noise(in, 20.0, 9), add_white_noise(in, 20.0, 10));
}

TEST(WhiteNoise, SilentClipIsRejected) {
  const AudioClip silent(std::vector<double>(100, 0.0), 16000);
  EXPECT_THROW(add_white_noise(silent, 20.0, 1), AttackError);
}

TEST(EnvironmentalNoise, TilesShortNoiseAndHitsTarget) {
  const AudioClip in = random_clip(4, 5000);
  const AudioClip noise({0.3, -0.1, 0.2}, 16000);
  const AudioClip out = add_environmental_noise(in, noise, 7.5);
  EXPECT_NEAR(measured_snr_db(in, residual(out, in)), 7.5, 0.01);
  const AudioClip r = residual(out, in);
  EXPECT_NEAR(r[0] / r[3], 1.0, 1e-9);
}

TEST(TimeShift, ShiftByLengthIsIdentity) {
  const AudioClip in = random_clip(5, 1234);
  EXPECT_EQ(time_shift(in, 1234), in);
  EXPECT_EQ(time_shift(in, 0), in);
}

TEST(TimeShift, CompositionAddsShifts) {
  const AudioClip in = random_clip(6, 777);
  for (std::int64_t a : {1, 100, 776}) {
    for (std::int64_t b : {3, 500, 1600}) {
      EXPECT_EQ(time_shift(time_shift(in, a), b), time_shift(in, a + b));
    }
  }
}

TEST(TimeShift, MovesSamplesForward) {
  const AudioClip in({1.0, 2.0, 3.0, 4.0}, 16000);
  const AudioClip out = time_shift(in, 1);
  EXPECT_EQ(std::vector<double>(out.samples().begin(), out.samples().end()), (std::vector<double>{4.0, 1.0, 2.0, 3.0}));
}

TEST(Echo, ImpulseResponseHasTwoTaps) {
  std::vector<double> x(4000, 0.0);
  x[0] = 1.0;
  const AudioClip out = add_echo(AudioClip(x, 16000), 1500, 0.35);
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] != 0.0) nonzero.push_back(i);
  }
  ASSERT_EQ(nonzero, (std::vector<std::size_t>{0, 1500}));
  EXPECT_EQ(out[1500], 0.35);
}

TEST(Echo, ZeroStrengthIsIdentity) {
  const AudioClip in = random_clip(7, 3000);
  EXPECT_EQ(add_echo(in, 1000, 0.0), in);
}

TEST(Volume, ScalesRmsByFactor) {
  const AudioClip in = random_clip(8);
  for (double k : {0.5, 0.731, 1.0, 1.9, 2.0}) {
    EXPECT_NEAR(rms(change_volume(in, k)) / rms(in), k, 1e-12);
  }
  EXPECT_THROW(change_volume(in, 0.0), AttackError);
}

TEST(Fade, UntouchedRegionIsBitIdentical) {
  const AudioClip in = random_clip(9, 10000);
  for (auto shape : {FadeShape::Linear, FadeShape::Logarithmic, FadeShape::Exponential, FadeShape::Sine}) {
    const AudioClip fin = apply_fade(in, shape, FadeDirection::FadeIn, 0.3);
    const AudioClip fout = apply_fade(in, shape, FadeDirection::FadeOut, 0.3);
    for (std::size_t i = 3000; i < 10000; ++i) ASSERT_EQ(fin[i], in[i]);
    for (std::size_t i = 0; i < 7000; ++i) ASSERT_EQ(fout[i], in[i]);
    EXPECT_EQ(fin[0], 0.0);
    EXPECT_EQ(fout[9999], 0.0);
  }
}

TEST(Fade, EnvelopesRiseFromZeroTowardOne) {
  for (auto shape : {FadeShape::Linear, FadeShape::Logarithmic, FadeShape::Exponential, FadeShape::Sine}) {
    EXPECT_EQ(fade_envelope(shape, 0, 100), 0.0);
    double prev = 0.0;
    for (std::size_t i = 1; i < 100; ++i) {
      const double e = fade_envelope(shape, i, 100);
      EXPECT_GT(e, prev);
      EXPECT_LT(e, 1.0);
      prev = e;
    }
  }
}

TEST(Fade, FractionOutsideRangeIsRejected) {
  const AudioClip in = random_clip(10, 100);
  EXPECT_THROW(apply_fade(in, FadeShape::Linear, FadeDirection::FadeIn, 0.0), AttackError);
  EXPECT_THROW(apply_fade(in, FadeShape::Linear, FadeDirection::FadeIn, 0.51), AttackError);
}

TEST(SampleRecipe, DrawsStayInsideRecipeRanges) {
  const std::vector<std::string> noise = {"a.wav", "b.wav"};
  std::set<AttackKind> seen;
  for (std::uint64_t s = 0; s < 300; ++s) {
    for (auto recipe : {RecipeKind::BackgroundNoise, RecipeKind::TimePitch, RecipeKind::ShapeSpace}) {
      const PerturbationSpec spec = sample_recipe(recipe, s, noise);
      EXPECT_NO_THROW(validate(spec));
      seen.insert(spec.kind());
    }
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(SampleRecipe, EmptyNoiseCorpusDrawsWhiteNoiseOnly) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    EXPECT_EQ(sample_recipe(RecipeKind::BackgroundNoise, s).kind(), AttackKind::WhiteNoise);
  }
}

TEST(SampleRecipe, SameSeedSameSpec) {
  const nlohmann::json a = sample_recipe(RecipeKind::ShapeSpace, 42);
  const nlohmann::json b = sample_recipe(RecipeKind::ShapeSpace, 42);
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(PerturbationSpecJson, RoundTripsEveryKind) {
  const std::vector<std::string> noise = {"n.wav"};
  for (std::uint64_t s = 0; s < 60; ++s) {
    for (auto recipe : {RecipeKind::BackgroundNoise, RecipeKind::TimePitch, RecipeKind::ShapeSpace}) {
      const PerturbationSpec spec = sample_recipe(recipe, s, noise);
      const nlohmann::json j = spec;
      const PerturbationSpec back = j.get<PerturbationSpec>();
      EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
    }
  }
}

TEST(PerturbationSpecJson, RejectsUnknownKindAndMismatchedParams) {
  EXPECT_THROW(nlohmann::json({{"kind", "reverb"}, {"params", nlohmann::json::object()}}).get<PerturbationSpec>(),
               AttackError);
  EXPECT_THROW(nlohmann::json({{"kind", "echo"}, {"params", {{"delay_samples", 1000}}}}).get<PerturbationSpec>(),
               AttackError);
  EXPECT_THROW(
      nlohmann::json({{"kind", "volume_change"}, {"params", {{"factor", 1.0}, {"extra", 1}}}}).get<PerturbationSpec>(),
      AttackError);
}

TEST(Apply, ValidatesBeforeDispatch) {
  const AudioClip in = random_clip(11, 4000);
  PerturbationSpec spec;
  spec.params = EchoParams{500, 0.3};
  EXPECT_THROW(apply(spec, in), AttackError);
  spec.params = WhiteNoiseParams{30.0};
  EXPECT_THROW(apply(spec, in), AttackError);
  spec.params = EnvironmentalNoiseParams{10.0};
  EXPECT_THROW(apply(spec, in), AttackError);
}

TEST(Apply, EnvironmentalNoiseUsesLoader) {
  const AudioClip in = random_clip(12, 4000);
  PerturbationSpec spec;
  spec.params = EnvironmentalNoiseParams{10.0};
  spec.noise_source = "cafe.wav";
  std::string asked;
  const AudioClip out = apply(spec, in, [&](const std::string& p) {
    asked = p;
    return random_clip(13, 1000);
  });
  EXPECT_EQ(asked, "cafe.wav");
  EXPECT_NEAR(measured_snr_db(in, residual(out, in)), 10.0, 0.01);
}

TEST(Apply, IdentityReturnsInput) {
  const AudioClip in = random_clip(14, 100);
  EXPECT_EQ(apply(PerturbationSpec{}, in), in);
}

}  // namespace
}  // namespace alm_audit
