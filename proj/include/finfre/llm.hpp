#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finfre/prompt.hpp"
#include "finfre/retrieval.hpp"

namespace finfre {

struct GenerationParams {
  double temperature = 0.6;
  double top_p = 0.95;
  std::size_t max_tokens = 16384;  // generation cap, not total context
  std::size_t runs = 3;

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

void to_json(nlohmann::json& j, const GenerationParams& p);
void from_json(const nlohmann::json& j, GenerationParams& p);

struct Completion {
  std::string text;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  double latency_ms = 0.0;
  int attempts = 1;
};

// Implementations must be safe for concurrent calls to complete().
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const RenderedPrompt& prompt, const GenerationParams& params, std::uint64_t seed) = 0;
  virtual std::string name() const = 0;
};

// "Score: 5" above half positive, "Score: 1" below, "Score: 3" on a tie.
std::string mock_majority(const RetrievedSet& rs);
// Binary-mode counterpart: "fraud" above half positive, otherwise "not fraud".
std::string mock_majority_binary(const RetrievedSet& rs);

// Votes over the example labels present in the prompt text, so its answer is
// the neighbor majority of whatever was retrieved. A prompt without examples
// gets an answer that carries no verdict.
class MockMajorityBackend final : public ChatBackend {
 public:
  MockMajorityBackend(PromptMode mode, std::string label_true_text, std::string label_false_text);
  Completion complete(const RenderedPrompt& prompt, const GenerationParams& params, std::uint64_t seed) override;
  std::string name() const override { return "mock"; }

 private:
  PromptMode mode_;
  std::string true_suffix_;
  std::string false_suffix_;
};

inline constexpr std::string_view kMockNoExamples = "No similar cases were provided, so no assessment is given.";

struct HttpSettings {
  std::string base_url;                      // e.g. http://localhost:8000/v1
  std::string model;
  std::string api_key_env = "FINFRE_API_KEY";
  double timeout_s = 120.0;
  std::size_t context_limit = 0;             // prompt token budget; 0 disables the local check
  int max_attempts = 3;
  double backoff_ms = 500.0;                 // doubled after each failed attempt
  std::string transcript;                    // JSONL path, empty = off
  nlohmann::json extra = nlohmann::json::object();  // merged into the request body

  bool operator==(const HttpSettings&) const = default;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::size_t concurrency = 8;
  HttpSettings http;

  void validate() const;
  // FINFRE_API_BASE and FINFRE_MODEL fill unset http fields.
  void apply_env();
  bool operator==(const BackendConfig&) const = default;
};

void to_json(nlohmann::json& j, const BackendConfig& b);
void from_json(const nlohmann::json& j, BackendConfig& b);

// Client for the /chat/completions request shape. Transient failures
// (connection errors, 408, 429, 5xx) are retried up to max_attempts with
// exponential backoff; other statuses fail at once.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpSettings settings);
  ~HttpChatBackend() override;
  Completion complete(const RenderedPrompt& prompt, const GenerationParams& params, std::uint64_t seed) override;
  std::string name() const override { return "http:" + settings_.model; }

  nlohmann::json request_body(const RenderedPrompt& prompt, const GenerationParams& params, std::uint64_t seed) const;

 private:
  struct Impl;
  HttpSettings settings_;
  std::string api_key_;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, PromptMode mode, const TemplateSpec& tpl);

// Runs work(i) for i in [0, count) with at most `concurrency` in flight.
// Results keep index order. After the first exception no new items start;
// finished results are kept and the exception is returned, not thrown.
template <typename T>
struct BatchResult {
  std::vector<std::optional<T>> results;
  std::exception_ptr error;
};

BatchResult<Completion> run_batch(std::size_t count, std::size_t concurrency,
                                  const std::function<Completion(std::size_t)>& work);

}  // namespace finfre
