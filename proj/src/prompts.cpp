#include "alm_audit/prompts.hpp"

namespace alm_audit {

std::string entailment_prompt(std::string_view aspect_text, Verdict verdict) {
  std::string prompt =
      "You judge forensic reasoning about audio deepfakes. Does the following reasoning aspect entail or support "
      "the conclusion that the audio is ";
  prompt += verdict == Verdict::Fake ? "FAKE" : "REAL";
  prompt += "? Answer with yes or no only.\n\nReasoning aspect: ";
  prompt += aspect_text;
  return prompt;
}

std::string perception_prompt(std::string_view question) {
  std::string prompt = "Listen to the audio and answer with yes or no only. ";
  prompt += question;
  return prompt;
}

}  // namespace alm_audit
