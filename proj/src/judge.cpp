#include "alm_audit/judge.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "alm_audit/parallel.hpp"
#include "alm_audit/prompts.hpp"
#include "alm_audit/seeding.hpp"

namespace alm_audit {

namespace {

struct Cue {
  std::string_view text;
  bool fake;
};

constexpr std::array<Cue, 10> kCues = {{
    {"synthesizer", true},
    {"robotic", true},
    {"unnatural", true},
    {"artifact", true},
    {"no breathing", true},
    {"monotone", true},
    {"natural", false},
    {"breathing", false},
    {"fluent and natural", false},
    {"consistent with a real person", false},
}};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(YesNo v) { return v == YesNo::Yes ? "yes" : "no"; }

YesNo yes_no_from_string(std::string_view s) {
  const std::string key = lowercase(s);
  if (key == "yes") return YesNo::Yes;
  if (key == "no") return YesNo::No;
  throw std::invalid_argument("expected yes or no, got: " + std::string(s));
}

QuestionBank::QuestionBank(std::vector<Question> questions) : questions_(std::move(questions)) {
  std::set<std::string> ids;
  std::set<ReasoningDimension> covered;
  for (const auto& q : questions_) {
    if (q.id.empty()) throw std::invalid_argument("question id is empty");
    if (blank(q.text)) throw std::invalid_argument("question " + q.id + " has empty text");
    if (!ids.insert(q.id).second) throw std::invalid_argument("duplicate question id: " + q.id);
    covered.insert(q.dimension);
  }
  for (auto d : kAllDimensions) {
    if (!covered.contains(d)) {
      throw std::invalid_argument("question bank has no question for " + std::string(dimension_title(d)));
    }
  }
}

std::vector<const Question*> QuestionBank::for_dimension(ReasoningDimension d) const {
  std::vector<const Question*> out;
  for (const auto& q : questions_) {
    if (q.dimension == d) out.push_back(&q);
  }
  return out;
}

QuestionBank default_question_bank() {
  using D = ReasoningDimension;
  return QuestionBank({
      {"prosody_1", D::Prosody, "Does the audio sound like a naturally produced human recording?"},
      {"prosody_2", D::Prosody, "Is the pitch contour flat and devoid of variation?"},
      {"prosody_3", D::Prosody, "Does the speaker's tone match the implied emotion of the words?"},
      {"prosody_4", D::Prosody, "Does the speech exhibit a machine-like or repetitive cadence?"},
      {"disfluency_1", D::Disfluency, "Is the speech completely devoid of fillers or breathing pauses?"},
      {"disfluency_2", D::Disfluency, "Does the speaker exhibit natural fillers like 'um' or 'uh'?"},
      {"disfluency_3", D::Disfluency, "Are there excessive or glitch-like repetitions of specific sounds?"},
      {"disfluency_4", D::Disfluency, "Do pauses occur at logical syntactic boundaries?"},
      {"speed_1", D::Speed, "Is the overall speaking rate within a natural range?"},
      {"speed_2", D::Speed, "Does the speaker maintain a rigid, machine-like consistency in speed?"},
      {"speed_3", D::Speed, "Does the tempo fluctuate erratically within a single sentence?"},
      {"speaking_style_1", D::SpeakingStyle, "Does the speaker articulate with unnatural, robotic precision?"},
      {"speaking_style_2", D::SpeakingStyle, "Does the delivery sound like scripted 'read speech'?"},
      {"speaking_style_3", D::SpeakingStyle, "Are there instances of garbled or fractured articulation?"},
      {"liveliness_1", D::Liveliness, "Are audible breathing sounds or natural pauses present?"},
      {"liveliness_2", D::Liveliness, "Does the voice possess natural warmth versus a sterile quality?"},
      {"liveliness_3", D::Liveliness, "Does the audio sound unnaturally clean, as if in an acoustic void?"},
      {"quality_1", D::Quality, "Are there audible digital artifacts, metallic ringing, or static?"},
      {"quality_2", D::Quality, "Does the audio contain natural environmental cues (reverb/reflections)?"},
      {"quality_3", D::Quality, "Is the audio quality consistent from beginning to end?"},
  });
}

QuestionBank question_bank_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("question bank must be a JSON array");
  std::vector<Question> questions;
  for (const auto& item : j) {
    try {
      questions.push_back({item.at("id").get<std::string>(),
                           dimension_from_string(item.at("dimension").get<std::string>()),
                           item.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("malformed question entry: ") + e.what());
    }
  }
  return QuestionBank(std::move(questions));
}

QuestionBank load_question_bank(const std::filesystem::path& path) {
  return question_bank_from_json(read_json_file(path));
}

nlohmann::json to_json(const QuestionBank& bank) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& q : bank.questions()) {
    out.push_back({{"id", q.id}, {"dimension", dimension_key(q.dimension)}, {"text", q.text}});
  }
  return out;
}

AuditGroundTruth audit_ground_truth_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("audit ground truth must be a JSON object");
  AuditGroundTruth out;
  for (const auto& [sample_id, answers] : j.items()) {
    if (!answers.is_object()) throw std::invalid_argument("ground truth for " + sample_id + " must be an object");
    for (const auto& [question_id, value] : answers.items()) {
      if (!value.is_string()) throw std::invalid_argument("ground truth values must be \"yes\" or \"no\"");
      out[sample_id][question_id] = yes_no_from_string(value.get<std::string>());
    }
  }
  return out;
}

AuditGroundTruth load_audit_ground_truth(const std::filesystem::path& path) {
  return audit_ground_truth_from_json(read_json_file(path));
}

std::optional<YesNo> normalize_yes_no(std::string_view answer) {
  std::size_t i = 0;
  while (i < answer.size() && std::isalnum(static_cast<unsigned char>(answer[i])) == 0) ++i;
  std::size_t end = i;
  while (end < answer.size() && std::isalpha(static_cast<unsigned char>(answer[end])) != 0) ++end;
  const std::string word = lowercase(answer.substr(i, end - i));
  if (word == "yes") return YesNo::Yes;
  if (word == "no") return YesNo::No;
  return std::nullopt;
}

VerifyOutcome verify(std::string_view answer_text, YesNo ground_truth) {
  const auto normalized = normalize_yes_no(answer_text);
  if (!normalized) return {false, true};
  return {*normalized == ground_truth, false};
}

EntailOutcome entail(JudgeBackend& backend, std::string_view aspect_text, Verdict verdict) {
  if (verdict == Verdict::Unparseable) throw std::invalid_argument("entailment needs a fake or real verdict");
  if (blank(aspect_text)) return {false, "empty aspect"};
  return {backend.entail(aspect_text, verdict), std::nullopt};
}

bool stub_entail(std::string_view aspect_text, Verdict verdict) {
  const std::string text = lowercase(aspect_text);
  int fake_cues = 0;
  int real_cues = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool word_start = i == 0 || std::isalpha(static_cast<unsigned char>(text[i - 1])) == 0;
    const Cue* best = nullptr;
    if (word_start) {
      for (const auto& cue : kCues) {
        if (text.compare(i, cue.text.size(), cue.text) == 0 && (best == nullptr || cue.text.size() > best->text.size())) {
          best = &cue;
        }
      }
    }
    if (best == nullptr) {
      ++i;
      continue;
    }
    (best->fake ? fake_cues : real_cues) += 1;
    i += best->text.size();
  }
  if (fake_cues == real_cues) return false;
  const Verdict dominant = fake_cues > real_cues ? Verdict::Fake : Verdict::Real;
  return dominant == verdict;
}

std::string StubJudge::answer(const AudioClip& audio, std::string_view question) {
  // Coarse level in 5 dB steps keeps answers stable under tiny perturbations.
  const double level = rms(audio);
  const long bucket = level > 0.0 ? std::lround(20.0 * std::log10(level) / 5.0) : -100;
  const std::uint64_t h = mix_seed(fnv1a64(question), static_cast<std::uint64_t>(bucket));
  return (h & 1U) != 0 ? "Yes." : "No.";
}

bool StubJudge::entail(std::string_view aspect_text, Verdict verdict) { return stub_entail(aspect_text, verdict); }

RemoteJudge::RemoteJudge(EndpointConfig endpoint, ModelClient::Sleeper sleeper)
    : client_(std::move(endpoint), std::move(sleeper)) {}

std::string RemoteJudge::name() const { return "remote:" + client_.config().model; }

std::string RemoteJudge::answer(const AudioClip& audio, std::string_view question) {
  const std::string id = "perc-" + std::to_string(fnv1a64(question));
  return client_.query(&audio, perception_prompt(question), id).text;
}

bool RemoteJudge::entail(std::string_view aspect_text, Verdict verdict) {
  const std::string prompt = entailment_prompt(aspect_text, verdict);
  const std::string id = "entail-" + std::to_string(fnv1a64(prompt));
  return normalize_yes_no(client_.query(nullptr, prompt, id).text) == YesNo::Yes;
}

std::vector<PerceptionBit> run_perception_audit(const QuestionBank& bank, std::span<const AuditSample> samples,
                                                JudgeBackend& backend, std::size_t concurrency) {
  const auto questions = bank.questions();
  for (const auto& sample : samples) {
    for (const auto& q : questions) {
      if (!sample.ground_truth.contains(q.id)) {
        throw std::invalid_argument("sample " + sample.sample_id + " has no ground truth for question " + q.id);
      }
    }
  }

  std::vector<PerceptionBit> bits(samples.size() * questions.size());
  parallel_for(bits.size(), concurrency, [&](std::size_t cell) {
    const AuditSample& sample = samples[cell / questions.size()];
    const Question& q = questions[cell % questions.size()];
    PerceptionBit& out = bits[cell];
    out.dimension = q.dimension;
    out.sample_id = sample.sample_id;
    out.question_id = q.id;
    try {
      out.answer_text = backend.answer(sample.audio, q.text);
      const VerifyOutcome v = verify(out.answer_text, sample.ground_truth.at(q.id));
      out.bit = v.bit;
      if (v.unnormalizable) out.flags.emplace_back("unnormalizable");
    } catch (const TransportError& e) {
      out.flags.emplace_back(std::string("transport_failed: ") + e.what());
    } catch (const std::exception& e) {
      out.flags.emplace_back(std::string("error: ") + e.what());
    }
  });
  return bits;
}

void to_json(nlohmann::json& j, const PerceptionBit& bit) {
  j = nlohmann::json{{"model", bit.model},
                     {"dimension", dimension_key(bit.dimension)},
                     {"sample_id", bit.sample_id},
                     {"question_id", bit.question_id},
                     {"bit", bit.bit ? 1 : 0},
                     {"answer_text", bit.answer_text},
                     {"flags", bit.flags}};
}

void from_json(const nlohmann::json& j, PerceptionBit& bit) {
  bit.model = j.value("model", std::string());
  bit.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  bit.sample_id = j.at("sample_id").get<std::string>();
  bit.question_id = j.at("question_id").get<std::string>();
  bit.bit = j.at("bit").get<int>() != 0;
  bit.answer_text = j.value("answer_text", std::string());
  bit.flags = j.value("flags", std::vector<std::string>{});
}

}  // namespace alm_audit
