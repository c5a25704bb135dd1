#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alm_audit/attacks.hpp"
#include "alm_audit/metrics.hpp"
#include "alm_audit/model_client.hpp"
#include "alm_audit/stats.hpp"
#include "alm_audit/trace.hpp"

namespace alm_audit {

// Bad configuration, manifest or stage layout. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Dev, Eval, Audit };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct ManifestEntry {
  std::string sample_id;
  std::filesystem::path audio_path;  // relative to the audio root
  Verdict true_label = Verdict::Fake;
  Split split = Split::Eval;
  std::optional<std::string> voice_profile;
  // Clean sample a pre-generated linguistic attack was derived from.
  std::optional<std::string> attack_provenance;
  std::size_t line = 0;
};

// JSONL, one entry per line; blank lines are skipped. Collects every missing
// audio file before failing. Throws ConfigError naming line numbers.
std::vector<ManifestEntry> ingest_manifest(const std::filesystem::path& path, const std::filesystem::path& audio_root);

struct ModelSpec {
  std::string name;
  Mode mode = Mode::Rsn;
  EndpointConfig endpoint;  // endpoint.model defaults to name
};

struct RecipeSpec {
  RecipeKind kind = RecipeKind::BackgroundNoise;
  std::uint64_t seed = 0;
};

struct JudgeSpec {
  std::string backend = "stub";  // "stub" or "remote"
  std::optional<EndpointConfig> endpoint;
};

// Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::vector<ModelSpec> models;
  std::vector<RecipeSpec> recipes;
  JudgeSpec judge;
  std::filesystem::path manifest;
  std::filesystem::path audio_root;
  std::optional<std::filesystem::path> prompt;  // built-in reasoning prompt when unset
  std::optional<std::filesystem::path> noise_dir;
  std::optional<std::filesystem::path> question_bank;
  std::optional<std::filesystem::path> audit_ground_truth;
  std::filesystem::path output_root = "runs";
  std::size_t concurrency = 1;
  std::uint64_t run_seed = 0;
  AsrDefinition asr_definition = AsrDefinition::PairedFlip;
  QuadrantThresholds thresholds;
  bool majority_vote = false;
};

// `.toml` files are read as TOML, anything else as JSON. Unknown keys are
// rejected. Throws ConfigError, including when a referenced asset is missing.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
void validate(const RunConfig& config);

// Stage outputs under a run directory. A stage refuses to write into a
// directory it has already populated.
namespace layout {
inline constexpr const char* kPerturbDir = "perturb";
inline constexpr const char* kPerturbIndex = "perturb/index.jsonl";
inline constexpr const char* kInferOutputs = "infer/outputs.jsonl";
inline constexpr const char* kJudged = "judge/judged.jsonl";
inline constexpr const char* kPerception = "audit/perception.jsonl";
inline constexpr const char* kMetricsDir = "metrics";
inline constexpr const char* kReportDir = "report";
inline constexpr const char* kRunMetadata = "run.json";
}  // namespace layout

struct StageResult {
  std::size_t items = 0;
  std::size_t failures = 0;  // flagged items; the stage still completed
};

// Identifier of an audio item: the sample id, or "<sample>__<recipe>" for an
// acoustic perturbation.
std::string perturbed_id(std::string_view sample_id, RecipeKind recipe);

// The ORG inputs: non-audit manifest entries without attack provenance.
std::vector<ManifestEntry> clean_entries(const std::vector<ManifestEntry>& manifest);

StageResult run_perturb(const RunConfig& config, const std::vector<ManifestEntry>& manifest,
                        const std::filesystem::path& run_dir);

// Reads perturb outputs from in_dir; writes infer/outputs.jsonl into out_dir.
StageResult run_infer(const RunConfig& config, const std::vector<ManifestEntry>& manifest,
                      const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

StageResult run_judge(const RunConfig& config, const std::filesystem::path& in_dir,
                      const std::filesystem::path& out_dir);

// Perception audit over the audit split, asking each configured model.
StageResult run_audit(const RunConfig& config, const std::vector<ManifestEntry>& manifest,
                      const std::filesystem::path& out_dir);

// Writes metrics.csv and metrics.json under metrics/.
StageResult run_metrics(const RunConfig& config, const std::filesystem::path& in_dir,
                        const std::filesystem::path& out_dir);

// Writes all report files under report/.
StageResult run_metrics_and_report(const RunConfig& config, const std::filesystem::path& in_dir,
                                   const std::filesystem::path& out_dir);

// Records the config, prompts and seed used for a run; written once.
void write_run_metadata(const RunConfig& config, const std::filesystem::path& run_dir);

}  // namespace alm_audit
