#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace alm_audit::testing {

// The synthetic evaluation corpus: 20 half-second clips at 16 kHz.
//   6 clean fakes   plain harmonic synthesis
//   6 clean reals   harmonics with vibrato and breath noise
//   4 linguistic    fakes voiced to pass as real, two profiles over two sources
//   4 audit         perception-audit split with yes/no ground truth
// Writes audio/*.wav, manifest.jsonl and audit_truth.json under dir.
// Every call writes identical bytes.
void write_fixture_corpus(const std::filesystem::path& dir);

inline constexpr int kFixtureClipCount = 20;

// Location of the bundled copy in the source tree.
std::filesystem::path bundled_corpus_dir();

// A run configuration over `corpus_dir` pointing every model at `model_url`,
// written as JSON to `config_path`. Two models: one in both modes, one
// reasoning-only; all three recipes; stub judge.
void write_fixture_config(const std::filesystem::path& config_path, const std::filesystem::path& corpus_dir,
                          const std::string& model_url, std::uint64_t run_seed = 2024, std::size_t concurrency = 4);

}  // namespace alm_audit::testing
