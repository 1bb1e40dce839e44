#pragma once

#include <stdexcept>
#include <string>

namespace finfre {

// Each error family maps to one CLI exit code (see tools/finfre.cpp).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The prompt does not fit the model context. Never retried.
class ContextLengthError : public BackendError {
 public:
  ContextLengthError(const std::string& what, std::size_t prompt_tokens)
      : BackendError(what), prompt_tokens_(prompt_tokens) {}

  std::size_t prompt_tokens() const { return prompt_tokens_; }

 private:
  std::size_t prompt_tokens_;
};

}  // namespace finfre
