#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alm_audit/judge.hpp"
#include "alm_audit/trace.hpp"

namespace alm_audit {

enum class Mode { Non, Rsn };
enum class Condition { Org, Per };
enum class AttackFamily { Acoustic, Linguistic };
enum class AsrDefinition { PairedFlip, RawPerError };

std::string_view to_string(Mode m);            // "NON", "RSN"
std::string_view to_string(Condition c);       // "ORG", "PER"
std::string_view to_string(AttackFamily f);    // "acoustic", "linguistic"
std::string_view to_string(AsrDefinition d);   // "paired_flip", "raw_per_error"
Mode mode_from_string(std::string_view s);
Condition condition_from_string(std::string_view s);
AsrDefinition asr_definition_from_string(std::string_view s);

// Recipe keys are acoustic; anything else (voice profiles) is linguistic.
AttackFamily attack_family(std::string_view strategy);

inline constexpr std::string_view kNoStrategy = "none";

struct JudgedRecord {
  // For PER records this is the clean sample the perturbation came from, so
  // ORG and PER join on it.
  std::string sample_id;
  std::string model;
  Mode mode = Mode::Rsn;
  Condition condition = Condition::Org;
  std::optional<std::string> strategy;  // required for PER
  std::optional<std::string> voice_profile;
  Verdict true_label = Verdict::Fake;
  Verdict predicted = Verdict::Unparseable;
  std::optional<std::array<bool, kDimensionCount>> entail_bits;  // RSN only
  std::vector<std::string> flags;
  std::string judge_backend;

  bool correct() const { return predicted == true_label; }
};

// Throws std::invalid_argument if a structural invariant is broken.
void validate(const JudgedRecord& r);

void to_json(nlohmann::json& j, const JudgedRecord& r);
void from_json(const nlohmann::json& j, JudgedRecord& r);

// A rate in [0,1] or absent. `denominator` is the number of units the value
// is taken over; for means it is the sum of the component denominators.
// A present value may still carry a reason when some components were absent.
struct Rate {
  std::optional<double> value;
  std::size_t denominator = 0;
  std::string reason;

  static Rate absent(std::string why, std::size_t denominator = 0) { return {std::nullopt, denominator, std::move(why)}; }
};

// PER minus ORG, in [-1,1], or absent.
struct Shift {
  std::optional<double> value;
  std::string reason;
};

Rate perception_score(std::span<const PerceptionBit> bits, ReasoningDimension d);

// Records must share (model, mode=RSN, condition) and carry entail bits.
Rate coherence_score(std::span<const JudgedRecord> records, ReasoningDimension d);

// Mean of (1 - bit) over records whose prediction is wrong.
Rate dissonance(std::span<const JudgedRecord> records, ReasoningDimension d);

Shift coherence_shift(const Rate& per, const Rate& org);
Shift dissonance_shift(const Rate& per, const Rate& org);

// Records must all be ORG. Unparseable predictions count as wrong.
Rate original_accuracy(std::span<const JudgedRecord> records);

// PairedFlip: among samples correct at ORG that have a PER record, the
// fraction wrong at PER. RawPerError: the fraction of PER records that are
// wrong. Throws std::invalid_argument on duplicate sample ids within a side.
Rate attack_success_rate(std::span<const JudgedRecord> org, std::span<const JudgedRecord> per,
                         AsrDefinition definition = AsrDefinition::PairedFlip);

// Mean over present components; absent only when none is present.
Rate unweighted_mean(std::span<const Rate> rates);

struct DimensionCell {
  ReasoningDimension dimension = ReasoningDimension::Prosody;
  Rate coh_org, coh_per, diss_org, diss_per;
  Shift delta_coh, delta_diss;
};

struct ArmScalars {
  Rate oc, asr;
  Rate coh_org, coh_per, diss_org, diss_per;
  Shift delta_coh, delta_diss;
};

struct StrategyReport {
  std::string strategy;  // kNoStrategy when there is no PER arm
  std::optional<AttackFamily> family;
  std::size_t n_org = 0;  // ORG records paired with this strategy
  std::size_t n_per = 0;
  std::array<DimensionCell, kDimensionCount> dimensions;
  ArmScalars scalars;  // dimension means
};

struct FamilySummary {
  AttackFamily family = AttackFamily::Acoustic;
  std::vector<std::string> strategies;
  ArmScalars scalars;  // strategy means
};

struct ModelModeReport {
  std::string model;
  Mode mode = Mode::Rsn;
  AsrDefinition asr_definition = AsrDefinition::PairedFlip;
  std::array<Rate, kDimensionCount> perception;
  std::vector<StrategyReport> strategies;  // sorted by strategy name
  std::vector<FamilySummary> families;     // acoustic before linguistic
};

struct MetricReport {
  std::vector<ModelModeReport> entries;  // sorted by (model, mode)
};

// Records for one (model, mode). Per strategy, ORG metrics use the ORG
// records whose sample ids appear in that strategy's PER arm. Throws
// std::invalid_argument if records mix models or modes.
ModelModeReport aggregate_report(std::span<const JudgedRecord> records,
                                 AsrDefinition definition = AsrDefinition::PairedFlip);

// Groups by (model, mode); perception bits are matched to entries by model.
MetricReport build_metric_report(std::span<const JudgedRecord> records, std::span<const PerceptionBit> perception,
                                 AsrDefinition definition = AsrDefinition::PairedFlip);

void to_json(nlohmann::json& j, const Rate& r);
void to_json(nlohmann::json& j, const Shift& s);
void to_json(nlohmann::json& j, const MetricReport& report);

}  // namespace alm_audit
