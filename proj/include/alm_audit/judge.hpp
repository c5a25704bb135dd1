#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alm_audit/audio.hpp"
#include "alm_audit/model_client.hpp"
#include "alm_audit/trace.hpp"

namespace alm_audit {

enum class YesNo { Yes, No };

std::string_view to_string(YesNo v);
YesNo yes_no_from_string(std::string_view s);  // throws std::invalid_argument

struct Question {
  std::string id;
  ReasoningDimension dimension;
  std::string text;
};

class QuestionBank {
 public:
  // Throws std::invalid_argument on empty text, duplicate ids, or a dimension
  // with no questions.
  explicit QuestionBank(std::vector<Question> questions);

  std::span<const Question> questions() const { return questions_; }
  std::vector<const Question*> for_dimension(ReasoningDimension d) const;
  std::size_t size() const { return questions_.size(); }

 private:
  std::vector<Question> questions_;
};

// The published subset: three or four binary questions per dimension.
QuestionBank default_question_bank();

// JSON array of {id, dimension, text}.
QuestionBank question_bank_from_json(const nlohmann::json& j);
QuestionBank load_question_bank(const std::filesystem::path& path);
nlohmann::json to_json(const QuestionBank& bank);

// sample_id -> question_id -> yes/no
using AuditGroundTruth = std::map<std::string, std::map<std::string, YesNo>>;
AuditGroundTruth load_audit_ground_truth(const std::filesystem::path& path);
AuditGroundTruth audit_ground_truth_from_json(const nlohmann::json& j);

// Leading "yes"/"no" word after stripping punctuation and markup.
std::optional<YesNo> normalize_yes_no(std::string_view answer);

struct VerifyOutcome {
  bool bit = false;
  bool unnormalizable = false;
};

// 1 iff the normalized answer equals the ground truth. Unnormalizable answers
// count as a mismatch and are flagged.
VerifyOutcome verify(std::string_view answer_text, YesNo ground_truth);

// Answers perception questions about audio and judges whether an aspect text
// supports a verdict. Implementations must be safe for concurrent calls.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string answer(const AudioClip& audio, std::string_view question) = 0;
  virtual bool entail(std::string_view aspect_text, Verdict verdict) = 0;
};

struct EntailOutcome {
  bool bit = false;
  std::optional<std::string> flag;  // "empty aspect"
};

// Empty aspects judge 0 without consulting the backend. Throws
// std::invalid_argument for an Unparseable verdict; transport failures from the
// backend propagate as TransportError.
EntailOutcome entail(JudgeBackend& backend, std::string_view aspect_text, Verdict verdict);

// Keyword heuristic: fake cues vs real cues, longest match first at word
// starts, so "unnatural" is not read as "natural". 1 iff the dominant class
// matches the verdict; ties give 0.
bool stub_entail(std::string_view aspect_text, Verdict verdict);

// Deterministic offline backend built on stub_entail. Perception answers are a
// fixed function of the question text and coarse audio level.
class StubJudge final : public JudgeBackend {
 public:
  std::string name() const override { return "stub-keyword-v1"; }
  std::string answer(const AudioClip& audio, std::string_view question) override;
  bool entail(std::string_view aspect_text, Verdict verdict) override;
};

// Remote LLM judge speaking the model transport. Perception questions go out
// with the audio; entailment prompts are text-only.
class RemoteJudge final : public JudgeBackend {
 public:
  explicit RemoteJudge(EndpointConfig endpoint, ModelClient::Sleeper sleeper = {});
  std::string name() const override;
  std::string answer(const AudioClip& audio, std::string_view question) override;
  bool entail(std::string_view aspect_text, Verdict verdict) override;

 private:
  ModelClient client_;
};

struct AuditSample {
  std::string sample_id;
  AudioClip audio;
  std::map<std::string, YesNo> ground_truth;  // question_id -> answer
};

struct PerceptionBit {
  std::string model;  // set by the caller; the audit itself is model-agnostic
  ReasoningDimension dimension = ReasoningDimension::Prosody;
  std::string sample_id;
  std::string question_id;
  bool bit = false;
  std::string answer_text;
  std::vector<std::string> flags;  // "unnormalizable", "transport_failed: ...", "error: ..."
};

// Asks every bank question of every sample and verifies each answer. Emits
// exactly samples x questions bits ordered by (sample, bank order); failed
// cells become flagged zeros. Throws std::invalid_argument up front when a
// sample lacks ground truth for a question.
std::vector<PerceptionBit> run_perception_audit(const QuestionBank& bank, std::span<const AuditSample> samples,
                                                JudgeBackend& backend, std::size_t concurrency = 1);

void to_json(nlohmann::json& j, const PerceptionBit& bit);
void from_json(const nlohmann::json& j, PerceptionBit& bit);

}  // namespace alm_audit
