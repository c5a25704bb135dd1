#pragma once

#include <string>
#include <string_view>

#include "alm_audit/trace.hpp"

namespace alm_audit {

// Reasoning-mode prompt: six aspect headers plus a conclusion carrying the
// $fake$/$real$ marker.
inline constexpr std::string_view kCotPrompt =
    "You are an expert in speech analysis in audio deepfake detection. Please analyze the speech under these "
    "criteria, then provide the conclusion and clearly state the audio is $fake$ or $real$ (put your decision in "
    "$$).\n"
    "\n"
    "- Prosody: Analyze Tone, Inflections, Cadence, Pitch, Monotone, Raspy, Emotion,...\n"
    "- Disfluency: Analyze Pauses, Filler Words\n"
    "- Speed: Analyze Fast, Slow, Rushed\n"
    "- Speaking Style: Accent, List, Articulation, Specific Word Pronunciation\n"
    "- Liveliness: like do you hear the breathing, or robotic sound\n"
    "- Quality: analyze background noise, computer noise, microphone feedback noise,...\n"
    "- Conclusion: Based on above analysis, give your inductive reasoning and clearly state the audio is $fake$ or "
    "$real$ (put your decision in $$)";

// Classification-mode prompt; recorded verbatim in run metadata.
inline constexpr std::string_view kClassifyPrompt = "Is this audio fake or real? Answer with $fake$ or $real$ only.";

// Text-only prompt for the remote entailment judge.
std::string entailment_prompt(std::string_view aspect_text, Verdict verdict);

// Prompt wrapping one perception-audit question.
std::string perception_prompt(std::string_view question);

}  // namespace alm_audit
