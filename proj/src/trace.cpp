#include "alm_audit/trace.hpp"

#include <algorithm>
#include <cctype>

namespace alm_audit {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Lowercase with spaces, underscores and hyphens removed.
std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
    out.push_back(lower(c));
  }
  return out;
}

bool is_markdown(char c) { return c == '*' || c == '_' || c == '`' || c == '#'; }

enum class HeaderKind { Dimension, Conclusion, Unrecognized };

struct Header {
  HeaderKind kind;
  ReasoningDimension dimension = ReasoningDimension::Prosody;
  std::string_view content;
};

std::optional<Header> match_header(std::string_view line) {
  std::string_view s = line;
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);

  bool bulleted = false;
  if (s.starts_with("\xE2\x80\xA2")) {  // U+2022 bullet
    s.remove_prefix(3);
    bulleted = true;
  }
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits])) != 0) ++digits;
  if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
    s.remove_prefix(digits + 1);
    bulleted = true;
  }
  while (!s.empty() && (s.front() == '-' || s.front() == '+' || s.front() == '>' || is_markdown(s.front()) ||
                        is_space(s.front()))) {
    if (s.front() == '-' || s.front() == '+' || s.front() == '*') bulleted = true;
    s.remove_prefix(1);
  }

  const auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 40) return std::nullopt;

  std::string name;
  for (char c : s.substr(0, colon)) {
    if (!is_markdown(c)) name.push_back(c);
  }
  const std::string_view name_view = trim(name);
  if (name_view.empty()) return std::nullopt;

  std::string_view content = s.substr(colon + 1);
  while (!content.empty() && (is_markdown(content.front()) || is_space(content.front()))) content.remove_prefix(1);

  const std::string key = squash(name_view);
  if (key == "conclusion") return Header{HeaderKind::Conclusion, ReasoningDimension::Prosody, content};
  if (auto dim = parse_dimension(name_view)) return Header{HeaderKind::Dimension, *dim, content};

  // Other "- Title:" sections are kept verbatim with the conclusion.
  const bool title_like =
      std::all_of(name_view.begin(), name_view.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == ' '; }) &&
      std::count(name_view.begin(), name_view.end(), ' ') < 4;
  if (bulleted && title_like) return Header{HeaderKind::Unrecognized, ReasoningDimension::Prosody, content};
  return std::nullopt;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

void append_line(std::string& dst, std::string_view line) {
  if (!dst.empty()) dst.push_back('\n');
  dst.append(line);
}

bool starts_with_at(std::string_view hay, std::size_t at, std::string_view needle) {
  return hay.size() >= at + needle.size() && hay.substr(at, needle.size()) == needle;
}

// Length of "$a$ or $b$" starting at `at` (either order), or 0.
std::size_t template_phrase_at(std::string_view s, std::size_t at) {
  for (auto [first, second] : {std::pair{"$fake$", "$real$"}, std::pair{"$real$", "$fake$"}}) {
    if (!starts_with_at(s, at, first)) continue;
    std::size_t i = at + 6;
    const std::size_t ws1 = i;
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == ws1 || !starts_with_at(s, i, "or")) continue;
    i += 2;
    const std::size_t ws2 = i;
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == ws2 || !starts_with_at(s, i, second)) continue;
    return i + 6 - at;
  }
  return 0;
}

}  // namespace

std::string_view dimension_key(ReasoningDimension d) {
  switch (d) {
    case ReasoningDimension::Prosody: return "prosody";
    case ReasoningDimension::Disfluency: return "disfluency";
    case ReasoningDimension::Speed: return "speed";
    case ReasoningDimension::SpeakingStyle: return "speaking_style";
    case ReasoningDimension::Liveliness: return "liveliness";
    case ReasoningDimension::Quality: return "quality";
  }
  return "unknown";
}

std::string_view dimension_title(ReasoningDimension d) {
  switch (d) {
    case ReasoningDimension::Prosody: return "Prosody";
    case ReasoningDimension::Disfluency: return "Disfluency";
    case ReasoningDimension::Speed: return "Speed";
    case ReasoningDimension::SpeakingStyle: return "Speaking Style";
    case ReasoningDimension::Liveliness: return "Liveliness";
    case ReasoningDimension::Quality: return "Quality";
  }
  return "Unknown";
}

std::optional<ReasoningDimension> parse_dimension(std::string_view name) {
  const std::string key = squash(name);
  for (auto d : kAllDimensions) {
    if (squash(dimension_key(d)) == key) return d;
  }
  return std::nullopt;
}

ReasoningDimension dimension_from_string(std::string_view name) {
  if (auto d = parse_dimension(name)) return *d;
  throw std::invalid_argument("unknown reasoning dimension: " + std::string(name));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Fake: return "fake";
    case Verdict::Real: return "real";
    case Verdict::Unparseable: return "unparseable";
  }
  return "unparseable";
}

Verdict verdict_from_string(std::string_view s) {
  const std::string key = squash(s);
  if (key == "fake") return Verdict::Fake;
  if (key == "real") return Verdict::Real;
  if (key == "unparseable") return Verdict::Unparseable;
  throw std::invalid_argument("unknown verdict: " + std::string(s));
}

Verdict label_from_string(std::string_view s) {
  const Verdict v = verdict_from_string(s);
  if (v == Verdict::Unparseable) throw std::invalid_argument("label must be fake or real");
  return v;
}

Verdict extract_verdict(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '$') continue;
    s.push_back(lower(text[i]));
  }

  Verdict last = Verdict::Unparseable;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '$') {
      ++i;
      continue;
    }
    if (const std::size_t skip = template_phrase_at(s, i); skip > 0) {
      i += skip;
      continue;
    }
    const bool fake = starts_with_at(s, i, "$fake$");
    const bool real = starts_with_at(s, i, "$real$");
    if (fake || real) {
      const bool clean_left = i == 0 || (!is_alnum(s[i - 1]) && s[i - 1] != '$');
      const bool clean_right = i + 6 >= s.size() || (!is_alnum(s[i + 6]) && s[i + 6] != '$');
      if (clean_left && clean_right) {
        last = fake ? Verdict::Fake : Verdict::Real;
        i += 6;
        continue;
      }
    }
    ++i;
  }
  return last;
}

ReasoningTrace parse_trace(std::string_view text) {
  ReasoningTrace trace;
  trace.raw_text = std::string(text);

  enum class Target { Preamble, Aspect, Conclusion, Extra };
  Target target = Target::Preamble;
  ReasoningDimension current = ReasoningDimension::Prosody;
  bool saw_conclusion = false;
  std::map<ReasoningDimension, std::string> aspects;
  std::string conclusion;

  for (std::string_view line : split_lines(text)) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto header = match_header(line)) {
      switch (header->kind) {
        case HeaderKind::Dimension:
          target = Target::Aspect;
          current = header->dimension;
          append_line(aspects[current], header->content);
          break;
        case HeaderKind::Conclusion:
          target = Target::Conclusion;
          saw_conclusion = true;
          append_line(conclusion, header->content);
          break;
        case HeaderKind::Unrecognized:
          target = Target::Extra;
          append_line(conclusion, line);
          break;
      }
      continue;
    }
    switch (target) {
      case Target::Preamble: break;
      case Target::Aspect: append_line(aspects[current], line); break;
      case Target::Conclusion:
      case Target::Extra: append_line(conclusion, line); break;
    }
  }

  for (auto& [dim, body] : aspects) trace.aspects[dim] = std::string(trim(body));
  trace.conclusion_text = saw_conclusion ? std::string(trim(conclusion)) : std::string(text);
  trace.verdict = extract_verdict(trace.conclusion_text);
  return trace;
}

std::string render_trace(const ReasoningTrace& trace) {
  std::string out;
  for (auto d : kAllDimensions) {
    const auto it = trace.aspects.find(d);
    if (it == trace.aspects.end()) continue;
    out += "- ";
    out += dimension_title(d);
    out += ": ";
    out += it->second;
    out += '\n';
  }
  out += "- Conclusion: ";
  out += trace.conclusion_text;
  if (trace.verdict != Verdict::Unparseable && extract_verdict(trace.conclusion_text) != trace.verdict) {
    out += trace.verdict == Verdict::Fake ? " $fake$" : " $real$";
  }
  out += '\n';
  return out;
}

Verdict majority_vote(std::span<const Verdict> verdicts) {
  if (verdicts.size() != 3) throw std::invalid_argument("majority vote needs exactly three verdicts");
  const auto fake = std::count(verdicts.begin(), verdicts.end(), Verdict::Fake);
  const auto real = std::count(verdicts.begin(), verdicts.end(), Verdict::Real);
  if (fake > real) return Verdict::Fake;
  if (real > fake) return Verdict::Real;
  return Verdict::Unparseable;
}

std::vector<ValidationFinding> validate_trace(const ReasoningTrace& trace) {
  std::vector<ValidationFinding> findings;
  for (auto d : kAllDimensions) {
    const auto it = trace.aspects.find(d);
    if (it == trace.aspects.end()) {
      findings.push_back({ValidationFinding::Kind::MissingDimension, d, "missing: " + std::string(dimension_title(d))});
    } else if (trim(it->second).empty()) {
      findings.push_back({ValidationFinding::Kind::EmptyAspect, d, "empty: " + std::string(dimension_title(d))});
    }
  }
  if (trace.verdict == Verdict::Unparseable) {
    findings.push_back({ValidationFinding::Kind::MissingVerdict, std::nullopt, "missing verdict marker"});
  }
  return findings;
}

}  // namespace alm_audit
