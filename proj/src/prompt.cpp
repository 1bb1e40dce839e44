#include "finfre/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "finfre/error.hpp"
#include "finfre/random.hpp"

namespace finfre {
namespace {

constexpr std::string_view kFeatureList = "{@features}";

struct BuiltinTemplate {
  std::string_view name;
  TemplateStyle style;
  std::string_view body;
};

constexpr BuiltinTemplate kBuiltins[] = {
    {"ccf", TemplateStyle::SchemaGrounded,
     "The client has only numerical input variables which are the result of a PCA transformation: {@features}."},
    {"ccfraud", TemplateStyle::Descriptive,
     "The client is a {gender}. the state number is {state}, the number of cards is {cardholder}, the credit "
     "balance is {balance}, the number of transactions is {numTrans}, the number of international transactions "
     "is {numIntlTrans}, the credit limit is {creditLine}."},
    {"ieee_cis", TemplateStyle::SchemaGrounded, "The transaction has attributes: {@features}."},
    {"paysim", TemplateStyle::Descriptive,
     "The transaction has: step is {step}, transaction type is {type}, amount is {amount}, originator is "
     "{nameOrig}, original balance before transaction is {oldbalanceOrg}, originator balance after transaction "
     "is {newbalanceOrig}, recipient is {nameDest}, recipient balance before transaction is {oldbalanceDest}, "
     "recipient balance after transaction is {newbalanceDest}."},
    {"generic", TemplateStyle::SchemaGrounded, "The transaction has attributes: {@features}."},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Calls `literal(text)` and `field(name)` over the body in order.
template <typename Literal, typename Field>
void scan_body(std::string_view body, Literal literal, Field field) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find('{', pos);
    if (open == std::string_view::npos) {
      literal(body.substr(pos));
      return;
    }
    const auto close = body.find('}', open);
    if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in template body");
    literal(body.substr(pos, open - pos));
    const auto name = body.substr(open + 1, close - open - 1);
    if (name.empty()) throw ConfigError("empty placeholder in template body");
    field(name);
    pos = close + 1;
  }
}

}  // namespace

std::string_view to_string(PromptMode mode) { return mode == PromptMode::Scoring ? "scoring" : "binary"; }

PromptMode parse_prompt_mode(std::string_view text) {
  if (text == "scoring") return PromptMode::Scoring;
  if (text == "binary") return PromptMode::Binary;
  throw ConfigError("mode must be 'scoring' or 'binary', got '" + std::string(text) + "'");
}

std::string_view to_string(ExemplarOrder order) {
  switch (order) {
    case ExemplarOrder::Descending: return "desc";
    case ExemplarOrder::Ascending: return "asc";
    case ExemplarOrder::Shuffled: return "shuffled";
  }
  return "?";
}

ExemplarOrder parse_exemplar_order(std::string_view text) {
  if (text == "desc") return ExemplarOrder::Descending;
  if (text == "asc") return ExemplarOrder::Ascending;
  if (text == "shuffled") return ExemplarOrder::Shuffled;
  throw ConfigError("exemplar_order must be 'desc', 'asc' or 'shuffled'");
}

std::string TemplateSpec::expand(const SelectedFeatures& sel) const {
  const auto at = body.find(kFeatureList);
  if (at == std::string::npos) return body;
  std::string list;
  for (std::size_t i = 0; i < sel.ordered.size(); ++i) {
    if (i > 0) list += ", ";
    list += sel.ordered[i].name + ": {" + sel.ordered[i].name + "}";
  }
  std::string out = body;
  out.replace(at, kFeatureList.size(), list);
  if (out.find(kFeatureList) != std::string::npos) throw ConfigError("{@features} may appear only once");
  return out;
}

TemplateSpec builtin_template(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (b.name == name) {
      TemplateSpec t;
      t.name = std::string(b.name);
      t.style = b.style;
      t.body = std::string(b.body);
      return t;
    }
  }
  throw ConfigError("unknown builtin template '" + std::string(name) + "'");
}

std::vector<std::string> builtin_template_names() {
  std::vector<std::string> out;
  for (const auto& b : kBuiltins) out.emplace_back(b.name);
  return out;
}

TemplateSpec parse_template(std::string_view text, std::string name) {
  TemplateSpec t;
  t.name = std::move(name);
  std::size_t pos = 0;
  bool have_body = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ConfigError("template " + t.name + ": expected 'key: value' header");
    const auto key = trim(line.substr(0, colon));
    const auto value = trim(line.substr(colon + 1));
    if (key == "body") {
      t.body = std::string(trim(pos < text.size() ? text.substr(pos) : std::string_view{}));
      if (!value.empty()) t.body = std::string(value) + (t.body.empty() ? "" : " " + t.body);
      have_body = true;
      break;
    }
    if (key == "style") {
      if (value == "descriptive") {
        t.style = TemplateStyle::Descriptive;
      } else if (value == "schema_grounded") {
        t.style = TemplateStyle::SchemaGrounded;
      } else {
        throw ConfigError("template " + t.name + ": unknown style '" + std::string(value) + "'");
      }
    } else if (key == "label_true") {
      t.label_true_text = std::string(value);
    } else if (key == "label_false") {
      t.label_false_text = std::string(value);
    } else {
      throw ConfigError("template " + t.name + ": unknown header '" + std::string(key) + "'");
    }
  }
  if (!have_body || t.body.empty()) throw ConfigError("template " + t.name + ": missing body");
  return t;
}

TemplateSpec load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open template " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_template(ss.str(), path.stem().string());
}

TemplateSpec resolve_template(const std::string& ref) {
  if (ref.empty()) return builtin_template("generic");
  const auto names = builtin_template_names();
  if (std::find(names.begin(), names.end(), ref) != names.end()) return builtin_template(ref);
  return load_template(ref);
}

std::vector<std::string> placeholders(const TemplateSpec& tpl, const SelectedFeatures& sel) {
  std::vector<std::string> out;
  scan_body(tpl.expand(sel), [](std::string_view) {}, [&](std::string_view name) { out.emplace_back(name); });
  return out;
}

void validate_template(const TemplateSpec& tpl, const SelectedFeatures& sel) {
  const auto names = sel.names();
  std::map<std::string, int, std::less<>> seen;
  for (const auto& p : placeholders(tpl, sel)) {
    if (std::find(names.begin(), names.end(), p) == names.end()) {
      throw ConfigError("template " + tpl.name + ": placeholder {" + p + "} has no corresponding selected feature");
    }
    ++seen[p];
  }
  for (const auto& n : names) {
    const auto it = seen.find(n);
    if (it == seen.end()) throw ConfigError("template " + tpl.name + ": selected feature '" + n + "' is not rendered");
    if (it->second > 1) throw ConfigError("template " + tpl.name + ": feature '" + n + "' appears more than once");
  }
}

std::string format_number(double value) {
  if (!std::isfinite(value)) return std::string(kMissingToken);
  if (value == 0.0) return "0";
  // %.5e yields the value correctly rounded to 6 significant digits plus
  // the post-rounding exponent; rebuild it in fixed notation.
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.5e", value);
  std::string_view s(buf);
  std::string out;
  if (s.front() == '-') {
    out.push_back('-');
    s.remove_prefix(1);
  }
  std::string digits;
  digits.push_back(s[0]);
  digits.append(s.substr(2, 5));
  const int exp = std::stoi(std::string(s.substr(s.find('e') + 1)));

  std::string body;
  if (exp >= 5) {
    body = digits + std::string(static_cast<std::size_t>(exp - 5), '0');
  } else if (exp >= 0) {
    body = digits.substr(0, static_cast<std::size_t>(exp + 1)) + "." + digits.substr(static_cast<std::size_t>(exp + 1));
  } else {
    body = "0." + std::string(static_cast<std::size_t>(-exp - 1), '0') + digits;
  }
  if (body.find('.') != std::string::npos) {
    while (body.back() == '0') body.pop_back();
    if (body.back() == '.') body.pop_back();
  }
  return out + body;
}

std::map<std::string, std::string, std::less<>> canonical_values(const FeatureRow& row, const SelectedFeatures& sel) {
  if (row.numeric.size() != sel.numeric.size() || row.categorical.size() != sel.categorical.size()) {
    throw DataError("feature row does not match the selected features");
  }
  std::map<std::string, std::string, std::less<>> out;
  for (std::size_t i = 0; i < sel.numeric.size(); ++i) {
    out[sel.numeric[i].name] = row.numeric[i] ? format_number(*row.numeric[i]) : std::string(kMissingToken);
  }
  for (std::size_t i = 0; i < sel.categorical.size(); ++i) {
    const auto& v = row.categorical[i];
    out[sel.categorical[i].name] = v ? *v : std::string(kMissingToken);
  }
  return out;
}

std::string fill_body(const TemplateSpec& tpl, const SelectedFeatures& sel, const FeatureRow& row) {
  const auto values = canonical_values(row, sel);
  std::string out;
  scan_body(
      tpl.expand(sel), [&](std::string_view lit) { out.append(lit); },
      [&](std::string_view name) {
        const auto it = values.find(name);
        if (it == values.end()) {
          throw ConfigError("template " + tpl.name + ": placeholder {" + std::string(name) +
                            "} has no corresponding selected feature");
        }
        out.append(it->second);
      });
  return out;
}

std::string render_example(const FeatureRow& row, int label, const TemplateSpec& tpl, const SelectedFeatures& sel,
                           std::size_t index) {
  return "Example " + std::to_string(index) + ": " + fill_body(tpl, sel, row) + " " +
         (label == 1 ? tpl.label_true_text : tpl.label_false_text);
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

RenderedPrompt build_prompt(std::span<const Exemplar> exemplars, const FeatureRow& query, const TemplateSpec& tpl,
                            const SelectedFeatures& sel, const PromptOptions& opts) {
  RenderedPrompt p;
  p.system = std::string(opts.mode == PromptMode::Scoring ? kScoringSystemPrompt : kBinarySystemPrompt);
  const std::string current = "Current case: " + fill_body(tpl, sel, query);
  if (!opts.rag) {
    p.user = current;
  } else {
    if (exemplars.empty()) throw DataError("retrieval-augmented prompt needs at least one exemplar");
    std::vector<std::size_t> order(exemplars.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (opts.order == ExemplarOrder::Ascending) {
      std::reverse(order.begin(), order.end());
    } else if (opts.order == ExemplarOrder::Shuffled) {
      Rng rng(opts.shuffle_seed);
      rng.shuffle(std::span<std::size_t>(order));
    }
    p.user = std::string(kRagHeader) + "\n\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& ex = exemplars[order[i]];
      p.user += render_example(ex.row, ex.label, tpl, sel, i + 1) + "\n";
    }
    p.user += "\n" + current;
    p.example_count = exemplars.size();
  }
  p.token_estimate = estimate_tokens(p.system) + estimate_tokens(p.user);
  return p;
}

nlohmann::json prompt_json(std::uint64_t row_id, const RenderedPrompt& p) {
  return {{"id", row_id}, {"system", p.system}, {"user", p.user}, {"token_estimate", p.token_estimate}};
}

}  // namespace finfre
