#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "finfre/features.hpp"

namespace finfre {

enum class PromptMode { Scoring, Binary };
std::string_view to_string(PromptMode mode);
PromptMode parse_prompt_mode(std::string_view text);

enum class TemplateStyle { Descriptive, SchemaGrounded };

enum class ExemplarOrder { Descending, Ascending, Shuffled };
std::string_view to_string(ExemplarOrder order);
ExemplarOrder parse_exemplar_order(std::string_view text);

inline constexpr std::string_view kScoringSystemPrompt =
    "You are a helpful financial expert that can help analyze fraud. Use the fewest reasoning steps "
    "needed to reach a correct answer. Please give a score of 1 to 5 for the probability of fraud. "
    "You must include Score: in your response. For example, Score: 1 means the lowest probability "
    "of fraud, and Score: 5 means the highest probability of fraud. Provide a brief explanation "
    "for your score.";

inline constexpr std::string_view kBinarySystemPrompt =
    "You are a helpful financial expert that can help analyze fraud. Use the fewest reasoning steps "
    "needed to reach a correct answer. Decide whether the current case is a fraud. Answer with one "
    "word: fraud or not fraud.";

inline constexpr std::string_view kRagHeader =
    "You are given several similar historical cases with their ground truth labels.\n"
    "Use them as guidance and then assess the current case.";

// Per-dataset transaction template. `{name}` is replaced by the canonical
// rendering of feature `name`; `{@features}` expands to "name: {name}, ..."
// over the selected features in selection order (schema-grounded lists).
struct TemplateSpec {
  std::string name;
  TemplateStyle style = TemplateStyle::SchemaGrounded;
  std::string body;
  std::string label_true_text = "It is a fraud.";
  std::string label_false_text = "It is not a fraud.";

  // Body with `{@features}` expanded for this selection.
  std::string expand(const SelectedFeatures& sel) const;
};

// Names: "ccf", "ccfraud", "ieee_cis", "paysim", "generic".
TemplateSpec builtin_template(std::string_view name);
std::vector<std::string> builtin_template_names();

// Template file: optional "style:", "label_true:", "label_false:" header
// lines, then a "body:" line; everything after it is the body.
TemplateSpec parse_template(std::string_view text, std::string name);
TemplateSpec load_template(const std::filesystem::path& path);
// Builtin name, or a path to a template file.
TemplateSpec resolve_template(const std::string& ref);

// Placeholders of the expanded body, in order of appearance.
std::vector<std::string> placeholders(const TemplateSpec& tpl, const SelectedFeatures& sel);

// Throws ConfigError unless every placeholder names a selected feature and
// every selected feature appears exactly once.
void validate_template(const TemplateSpec& tpl, const SelectedFeatures& sel);

inline constexpr std::string_view kMissingToken = "missing";

// At most 6 significant digits, fixed notation, no trailing zeros.
std::string format_number(double value);

// Canonical text per selected feature name.
std::map<std::string, std::string, std::less<>> canonical_values(const FeatureRow& row, const SelectedFeatures& sel);

std::string fill_body(const TemplateSpec& tpl, const SelectedFeatures& sel, const FeatureRow& row);

// "Example {index}: {body} {label text}"
std::string render_example(const FeatureRow& row, int label, const TemplateSpec& tpl, const SelectedFeatures& sel,
                           std::size_t index);

struct Exemplar {
  FeatureRow row;
  int label = 0;
  double similarity = 0.0;
};

struct PromptOptions {
  PromptMode mode = PromptMode::Scoring;
  bool rag = true;
  ExemplarOrder order = ExemplarOrder::Descending;
  std::uint64_t shuffle_seed = 0;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
  std::size_t token_estimate = 0;
  std::size_t example_count = 0;
};

// Rough token count: one token per four bytes, rounded up.
std::size_t estimate_tokens(std::string_view text);

// `exemplars` must be in descending-similarity order. With rag off the user
// text is only the query block.
RenderedPrompt build_prompt(std::span<const Exemplar> exemplars, const FeatureRow& query, const TemplateSpec& tpl,
                            const SelectedFeatures& sel, const PromptOptions& opts);

nlohmann::json prompt_json(std::uint64_t row_id, const RenderedPrompt& p);

}  // namespace finfre
