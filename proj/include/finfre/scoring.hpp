#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "finfre/prompt.hpp"

namespace finfre {

struct RiskScore {
  int value = 0;  // 1..5 when parse_ok
  bool parse_ok = false;
  std::string raw_span;
};

inline constexpr int kFraudThreshold = 4;

struct Prediction {
  int label = 0;  // 1 = fraud
  PromptMode mode = PromptMode::Scoring;
  std::optional<RiskScore> score;  // scoring mode only
  bool flagged = false;            // no verdict could be parsed
};

// Last "Score: N" (N in 1..5) in the text, case-insensitive, tolerating
// markdown emphasis around the key and the number.
RiskScore parse_score(std::string_view text);

// fraud iff parse_ok and value >= 4; a parse failure is legit and flagged.
Prediction apply_threshold(const RiskScore& s);

// The verdict keyword ending last wins; "not a fraud" / "not fraud" beat the
// bare "fraud" they contain. No keyword means legit and flagged.
Prediction parse_binary(std::string_view text);

Prediction interpret(std::string_view text, PromptMode mode);

}  // namespace finfre
