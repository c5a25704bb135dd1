#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alm_audit {

struct VocoderConfig {
  std::size_t window = 1024;  // Hann, periodic
  std::size_t hop = 256;
};

// Phase-vocoder time stretch with pitch preserved. `ratio` scales duration;
// the result has exactly round(input.size() * ratio) samples.
// Requires input.size() >= config.window and ratio > 0.
std::vector<double> phase_vocoder_stretch(std::span<const double> input, double ratio,
                                          const VocoderConfig& config = {});

}  // namespace alm_audit
