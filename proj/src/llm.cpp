#include "finfre/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "finfre/error.hpp"

namespace finfre {

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(top_p >= 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in [0, 1]");
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
  if (runs == 0) throw ConfigError("runs must be positive");
}

void to_json(nlohmann::json& j, const GenerationParams& p) {
  j = {{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}, {"runs", p.runs}};
}

void from_json(const nlohmann::json& j, GenerationParams& p) {
  p = GenerationParams{};
  p.temperature = j.value("temperature", p.temperature);
  p.top_p = j.value("top_p", p.top_p);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  p.runs = j.value("runs", p.runs);
}

// ---- mock ----

namespace {

std::string majority_text(std::size_t pos, std::size_t total, PromptMode mode) {
  if (total == 0) return std::string(kMockNoExamples);
  const std::size_t twice = 2 * pos;
  if (mode == PromptMode::Scoring) {
    if (twice > total) return "Most similar cases are fraud. Score: 5";
    if (twice < total) return "Most similar cases are legitimate. Score: 1";
    return "Similar cases are evenly split. Score: 3";
  }
  return twice > total ? "fraud" : "not fraud";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string mock_majority(const RetrievedSet& rs) {
  if (rs.items.empty()) throw DataError("mock_majority needs a nonempty retrieved set");
  return majority_text(rs.positives(), rs.items.size(), PromptMode::Scoring);
}

std::string mock_majority_binary(const RetrievedSet& rs) {
  if (rs.items.empty()) throw DataError("mock_majority needs a nonempty retrieved set");
  return majority_text(rs.positives(), rs.items.size(), PromptMode::Binary);
}

MockMajorityBackend::MockMajorityBackend(PromptMode mode, std::string label_true_text, std::string label_false_text)
    : mode_(mode), true_suffix_(" " + std::move(label_true_text)), false_suffix_(" " + std::move(label_false_text)) {}

Completion MockMajorityBackend::complete(const RenderedPrompt& prompt, const GenerationParams&, std::uint64_t) {
  std::size_t pos = 0;
  std::size_t total = 0;
  std::string_view user(prompt.user);
  std::size_t at = 0;
  while (at < user.size()) {
    auto eol = user.find('\n', at);
    if (eol == std::string_view::npos) eol = user.size();
    const auto line = user.substr(at, eol - at);
    at = eol + 1;
    if (line.rfind("Example ", 0) != 0) continue;
    if (ends_with(line, true_suffix_)) {
      ++pos;
      ++total;
    } else if (ends_with(line, false_suffix_)) {
      ++total;
    }
  }
  Completion c;
  c.text = majority_text(pos, total, mode_);
  c.input_tokens = prompt.token_estimate;
  c.output_tokens = estimate_tokens(c.text);
  return c;
}

// ---- backend config ----

void BackendConfig::validate() const {
  if (kind != "mock" && kind != "http") throw ConfigError("backend kind must be 'mock' or 'http'");
  if (concurrency == 0) throw ConfigError("backend concurrency must be positive");
  if (kind == "http") {
    if (http.base_url.empty()) throw ConfigError("http backend needs base_url (or FINFRE_API_BASE)");
    if (http.model.empty()) throw ConfigError("http backend needs model (or FINFRE_MODEL)");
    if (http.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (!(http.timeout_s > 0)) throw ConfigError("timeout_s must be positive");
  }
}

void BackendConfig::apply_env() {
  if (http.base_url.empty()) {
    if (const char* v = std::getenv("FINFRE_API_BASE")) http.base_url = v;
  }
  if (http.model.empty()) {
    if (const char* v = std::getenv("FINFRE_MODEL")) http.model = v;
  }
}

void to_json(nlohmann::json& j, const BackendConfig& b) {
  j = {{"kind", b.kind}, {"concurrency", b.concurrency}};
  if (b.kind == "http") {
    j["base_url"] = b.http.base_url;
    j["model"] = b.http.model;
    j["api_key_env"] = b.http.api_key_env;
    j["timeout_s"] = b.http.timeout_s;
    j["context_limit"] = b.http.context_limit;
    j["max_attempts"] = b.http.max_attempts;
    j["backoff_ms"] = b.http.backoff_ms;
    j["transcript"] = b.http.transcript;
    j["extra"] = b.http.extra;
  }
}

void from_json(const nlohmann::json& j, BackendConfig& b) {
  b = BackendConfig{};
  b.kind = j.value("kind", b.kind);
  b.concurrency = j.value("concurrency", b.concurrency);
  auto& h = b.http;
  h.base_url = j.value("base_url", h.base_url);
  h.model = j.value("model", h.model);
  h.api_key_env = j.value("api_key_env", h.api_key_env);
  h.timeout_s = j.value("timeout_s", h.timeout_s);
  h.context_limit = j.value("context_limit", h.context_limit);
  h.max_attempts = j.value("max_attempts", h.max_attempts);
  h.backoff_ms = j.value("backoff_ms", h.backoff_ms);
  h.transcript = j.value("transcript", h.transcript);
  if (j.contains("extra")) h.extra = j.at("extra");
}

// ---- http ----

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // .../chat/completions
};

Endpoint split_url(const std::string& base) {
  const auto scheme = base.find("://");
  if (scheme == std::string::npos) throw ConfigError("base_url needs a scheme: " + base);
  const auto slash = base.find('/', scheme + 3);
  Endpoint e;
  e.origin = base.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : base.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  e.path = prefix + "/chat/completions";
  return e;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

bool mentions_context_length(const std::string& body) {
  std::string lower(body);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return lower.find("context length") != std::string::npos || lower.find("context_length") != std::string::npos ||
         lower.find("maximum context") != std::string::npos || lower.find("too many tokens") != std::string::npos;
}

}  // namespace

struct HttpChatBackend::Impl {
  Endpoint endpoint;
  std::mutex transcript_mu;
  std::ofstream transcript;
};

HttpChatBackend::HttpChatBackend(HttpSettings settings) : settings_(std::move(settings)), impl_(std::make_unique<Impl>()) {
  impl_->endpoint = split_url(settings_.base_url);
  if (const char* key = std::getenv(settings_.api_key_env.c_str())) api_key_ = key;
  if (!settings_.transcript.empty()) {
    impl_->transcript.open(settings_.transcript, std::ios::app);
    if (!impl_->transcript) throw ConfigError("cannot open transcript " + settings_.transcript);
  }
}

HttpChatBackend::~HttpChatBackend() = default;

nlohmann::json HttpChatBackend::request_body(const RenderedPrompt& prompt, const GenerationParams& params,
                                             std::uint64_t seed) const {
  nlohmann::json body = {
      {"model", settings_.model},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", prompt.system}}, {{"role", "user"}, {"content", prompt.user}}})},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"max_tokens", params.max_tokens},
      {"seed", seed},
  };
  for (const auto& [key, value] : settings_.extra.items()) body[key] = value;
  return body;
}

Completion HttpChatBackend::complete(const RenderedPrompt& prompt, const GenerationParams& params, std::uint64_t seed) {
  if (settings_.context_limit > 0 && prompt.token_estimate > settings_.context_limit) {
    throw ContextLengthError("prompt of ~" + std::to_string(prompt.token_estimate) + " tokens exceeds context limit " +
                                 std::to_string(settings_.context_limit),
                             prompt.token_estimate);
  }
  const std::string payload = request_body(prompt, params, seed).dump();

  httplib::Client client(impl_->endpoint.origin);
  const auto timeout = std::chrono::duration<double>(settings_.timeout_s);
  const auto secs = static_cast<time_t>(settings_.timeout_s);
  const auto usecs = static_cast<time_t>((timeout.count() - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
    if (attempt > 1) {
      const double wait = settings_.backoff_ms * static_cast<double>(1 << (attempt - 2));
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
    }
    auto res = client.Post(impl_->endpoint.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (impl_->transcript.is_open()) {
      std::lock_guard lock(impl_->transcript_mu);
      nlohmann::json line = {{"attempt", attempt}, {"status", res->status}, {"request", nlohmann::json::parse(payload)}};
      auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      line["response"] = parsed.is_discarded() ? nlohmann::json(res->body) : parsed;
      impl_->transcript << line.dump() << '\n' << std::flush;
    }
    if (res->status == 200) {
      const auto j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
        throw BackendError("malformed completion response");
      }
      const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
      Completion c;
      // Reasoning text first so a score stated in the answer is the last one.
      if (msg.contains("reasoning_content") && msg["reasoning_content"].is_string()) {
        c.text = msg["reasoning_content"].get<std::string>() + "\n";
      }
      if (msg.contains("content") && msg["content"].is_string()) c.text += msg["content"].get<std::string>();
      const auto usage = j.value("usage", nlohmann::json::object());
      c.input_tokens = usage.value("prompt_tokens", prompt.token_estimate);
      c.output_tokens = usage.value("completion_tokens", estimate_tokens(c.text));
      c.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
      c.attempts = attempt;
      return c;
    }
    if (res->status == 400 && mentions_context_length(res->body)) {
      throw ContextLengthError("backend rejected prompt of ~" + std::to_string(prompt.token_estimate) +
                                   " tokens: " + res->body,
                               prompt.token_estimate);
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500);
    if (!transient_status(res->status)) throw BackendError(last_error);
  }
  throw BackendError("giving up after " + std::to_string(settings_.max_attempts) + " attempts; " + last_error);
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, PromptMode mode, const TemplateSpec& tpl) {
  cfg.validate();
  if (cfg.kind == "mock") return std::make_unique<MockMajorityBackend>(mode, tpl.label_true_text, tpl.label_false_text);
  return std::make_unique<HttpChatBackend>(cfg.http);
}

BatchResult<Completion> run_batch(std::size_t count, std::size_t concurrency,
                                  const std::function<Completion(std::size_t)>& work) {
  BatchResult<Completion> out;
  out.results.resize(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out.results[i] = work(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!out.error) out.error = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(concurrency, count));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t + 1 < n; ++t) pool.emplace_back(worker);
    worker();
  }
  return out;
}

}  // namespace finfre
