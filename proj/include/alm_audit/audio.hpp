#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace alm_audit {

// Sample rate the attack recipes assume (shift magnitudes are given at 16 kHz).
inline constexpr int kCanonicalSampleRate = 16000;

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mono floating-point signal. Samples stay unclamped until WAV export.
class AudioClip {
 public:
  // Throws AudioError if sample_rate <= 0, samples is empty or any sample is
  // NaN/Inf.
  AudioClip(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  int sample_rate() const { return sample_rate_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  // Moves the sample buffer out; the clip is left empty and must not be used.
  std::vector<double> release() && { return std::move(samples_); }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

 private:
  std::vector<double> samples_;
  int sample_rate_;
};

// WAV decoding accepts RIFF PCM 16-bit and IEEE float 32-bit (plain or
// WAVE_FORMAT_EXTENSIBLE), any channel count; channels are averaged to mono.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip load_wav(const std::filesystem::path& path);

// Encodes as 16-bit PCM mono. Samples are clamped to [-1, 1 - 2^-15] here and
// nowhere else.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

double rms(const AudioClip& clip);
double rms(std::span<const double> samples);

// 20*log10(rms(signal)/rms(noise)). Lengths must match; throws AudioError
// ("undefined SNR") when the noise is silent.
double measured_snr_db(const AudioClip& signal, const AudioClip& noise);

}  // namespace alm_audit
