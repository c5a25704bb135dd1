#include "alm_audit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>

namespace alm_audit {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
  }
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

[[noreturn]] void unsupported(const std::string& detail) {
  throw AudioError("unsupported encoding: " + detail);
}

}  // namespace

AudioClip::AudioClip(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw AudioError("sample rate must be positive");
  if (samples_.empty()) throw AudioError("zero-length audio");
  if (!std::all_of(samples_.begin(), samples_.end(), [](double s) { return std::isfinite(s); })) {
    throw AudioError("non-finite sample");
  }
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    unsupported("not a RIFF/WAVE file");
  }

  std::optional<FormatChunk> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (chunk_size > bytes.size() - body) {
      // A truncated data chunk is tolerated by trimming to what is present;
      // anything else is malformed.
      if (!tag_is(bytes, pos, "data")) unsupported("truncated chunk");
    }
    const std::size_t avail = std::min<std::size_t>(chunk_size, bytes.size() - body);

    if (tag_is(bytes, pos, "fmt ")) {
      if (avail < 16) unsupported("short fmt chunk");
      FormatChunk f;
      f.format = read_u16(bytes, body);
      f.channels = read_u16(bytes, body + 2);
      f.sample_rate = read_u32(bytes, body + 4);
      f.bits_per_sample = read_u16(bytes, body + 14);
      if (f.format == kFormatExtensible) {
        if (avail < 26) unsupported("short extensible fmt chunk");
        // First two bytes of the SubFormat GUID carry the format tag.
        f.format = read_u16(bytes, body + 24);
      }
      fmt = f;
    } else if (tag_is(bytes, pos, "data")) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    // Chunks are word aligned.
    pos = body + avail + (avail & 1U);
  }

  if (!fmt) unsupported("missing fmt chunk");
  if (!have_data) unsupported("missing data chunk");
  if (fmt->channels == 0) unsupported("zero channels");
  if (fmt->sample_rate == 0 || fmt->sample_rate > static_cast<std::uint32_t>(INT32_MAX)) {
    unsupported("invalid sample rate");
  }

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits_per_sample == 16;
  const bool float32 = fmt->format == kFormatFloat && fmt->bits_per_sample == 32;
  if (!pcm16 && !float32) {
    unsupported("format " + std::to_string(fmt->format) + " with " +
                std::to_string(fmt->bits_per_sample) + " bits");
  }

  const std::size_t bytes_per_sample = fmt->bits_per_sample / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw AudioError("zero-length audio");

  std::vector<double> mono(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      const std::size_t at = i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(data, at)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(data, at);
        float f;
        std::memcpy(&f, &raw, sizeof f);
        acc += f;
      }
    }
    mono[i] = acc / fmt->channels;
  }
  if (!std::all_of(mono.begin(), mono.end(), [](double s) { return std::isfinite(s); })) {
    unsupported("non-finite float samples");
  }
  return AudioClip(std::move(mono), static_cast<int>(fmt->sample_rate));
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  constexpr double kMax = 1.0 - 1.0 / 32768.0;
  const auto n = static_cast<std::uint32_t>(clip.size());
  const std::uint32_t data_bytes = n * 2;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : clip.samples()) {
    const double clamped = std::clamp(s, -1.0, kMax);
    const long q = std::lround(clamped * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
  }
  return out;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AudioError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AudioError("cannot write " + path.string());
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  const double sum_sq =
      std::accumulate(samples.begin(), samples.end(), 0.0, [](double acc, double s) { return acc + s * s; });
  return std::sqrt(sum_sq / static_cast<double>(samples.size()));
}

double rms(const AudioClip& clip) { return rms(clip.samples()); }

double measured_snr_db(const AudioClip& signal, const AudioClip& noise) {
  if (signal.size() != noise.size()) throw AudioError("signal and noise lengths differ");
  const double noise_rms = rms(noise);
  if (noise_rms == 0.0) throw AudioError("undefined SNR: noise is silent");
  return 20.0 * std::log10(rms(signal) / noise_rms);
}

}  // namespace alm_audit
