#include "finfre/scoring.hpp"

#include <array>
#include <cctype>
#include <regex>

namespace finfre {
namespace {

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

RiskScore parse_score(std::string_view text) {
  // "score", optional emphasis, ':', optional emphasis/space, one digit 1-5
  // that is not the start of a longer number or a decimal.
  static const std::regex pattern(R"(score[*_`\s]*:[*_`\s]*([1-5])(?![0-9]|\.[0-9]))", std::regex::icase);
  const std::string s(text);
  RiskScore out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto start = static_cast<std::size_t>(m.position(0));
    if (start > 0 && word_char(s[start - 1])) continue;  // "riskscore:" is not the key
    out.value = m.str(1)[0] - '0';
    out.parse_ok = true;
    out.raw_span = m.str(0);
  }
  return out;
}

Prediction apply_threshold(const RiskScore& s) {
  Prediction p;
  p.mode = PromptMode::Scoring;
  p.score = s;
  p.flagged = !s.parse_ok;
  p.label = s.parse_ok && s.value >= kFraudThreshold ? 1 : 0;
  return p;
}

Prediction parse_binary(std::string_view text) {
  struct Keyword {
    std::string_view word;
    int label;
  };
  static constexpr std::array<Keyword, 4> kKeywords = {{
      {"not a fraud", 0},
      {"not fraud", 0},
      {"legitimate", 0},
      {"fraud", 1},
  }};
  const std::string lower = lowercase(text);
  Prediction p;
  p.mode = PromptMode::Binary;
  std::size_t best_end = 0;
  std::size_t best_len = 0;
  bool found = false;
  for (const auto& kw : kKeywords) {
    for (auto at = lower.find(kw.word); at != std::string::npos; at = lower.find(kw.word, at + 1)) {
      if (at > 0 && word_char(lower[at - 1])) continue;
      const std::size_t end = at + kw.word.size();
      // Later end wins; at the same end the longer (negated) form wins.
      if (!found || end > best_end || (end == best_end && kw.word.size() > best_len)) {
        found = true;
        best_end = end;
        best_len = kw.word.size();
        p.label = kw.label;
      }
    }
  }
  p.flagged = !found;
  if (!found) p.label = 0;
  return p;
}

Prediction interpret(std::string_view text, PromptMode mode) {
  return mode == PromptMode::Scoring ? apply_threshold(parse_score(text)) : parse_binary(text);
}

}  // namespace finfre
