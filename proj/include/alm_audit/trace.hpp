#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alm_audit {

// The six forensic reasoning dimensions, in prompt order.
enum class ReasoningDimension { Prosody, Disfluency, Speed, SpeakingStyle, Liveliness, Quality };

inline constexpr std::size_t kDimensionCount = 6;
inline constexpr std::array<ReasoningDimension, kDimensionCount> kAllDimensions = {
    ReasoningDimension::Prosody,       ReasoningDimension::Disfluency, ReasoningDimension::Speed,
    ReasoningDimension::SpeakingStyle, ReasoningDimension::Liveliness, ReasoningDimension::Quality};

enum class Verdict { Fake, Real, Unparseable };

// Snake-case key used in files ("speaking_style").
std::string_view dimension_key(ReasoningDimension d);
// Header text used when rendering traces ("Speaking Style").
std::string_view dimension_title(ReasoningDimension d);
// Accepts the key, the title, or either with spaces/underscores/case varied.
std::optional<ReasoningDimension> parse_dimension(std::string_view name);
ReasoningDimension dimension_from_string(std::string_view name);  // throws std::invalid_argument

std::string_view to_string(Verdict v);
// Parses "fake"/"real"/"unparseable" (case-insensitive); throws std::invalid_argument.
Verdict verdict_from_string(std::string_view s);
// Ground-truth labels are Fake or Real only.
Verdict label_from_string(std::string_view s);

struct ReasoningTrace {
  std::map<ReasoningDimension, std::string> aspects;
  std::string conclusion_text;
  Verdict verdict = Verdict::Unparseable;
  std::string raw_text;
};

// Splits a model output into its aspect sections and extracts the verdict
// marker. Total: never throws, Unparseable is an ordinary result.
//
// Headers are "- <Dimension>:" lines; bullets and markdown emphasis around the
// header are ignored. Without a "Conclusion" header the whole text is scanned
// for the verdict. The last standalone $fake$/$real$ wins, and the echoed
// instruction "$fake$ or $real$" is never a candidate.
ReasoningTrace parse_trace(std::string_view text);

// Verdict marker scan over arbitrary text, using the same rules as parse_trace.
Verdict extract_verdict(std::string_view text);

// "- Prosody: ...\n...\n- Conclusion: ..." with the verdict marker appended to
// the conclusion when it is not already there.
std::string render_trace(const ReasoningTrace& trace);

// Three generations reduced to one verdict; Unparseable entries abstain and a
// tie yields Unparseable. Throws std::invalid_argument unless exactly three.
Verdict majority_vote(std::span<const Verdict> verdicts);

struct ValidationFinding {
  enum class Kind { MissingDimension, EmptyAspect, MissingVerdict };
  Kind kind;
  std::optional<ReasoningDimension> dimension;
  std::string message;  // "missing: Liveliness", "empty: Prosody", "missing verdict marker"
};

std::vector<ValidationFinding> validate_trace(const ReasoningTrace& trace);

}  // namespace alm_audit
