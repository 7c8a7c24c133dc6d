#pragma once

#include <stdexcept>
#include <string>

namespace accjoint {

// Error vocabulary shared by the library and the CLI. Every exception carries
// a stable E_* code so pipelines can match on stderr JSON instead of prose.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

// Malformed or out-of-domain values passed to an operation.
class InvalidInput : public Error {
public:
  explicit InvalidInput(const std::string& what) : Error("E_INVALID_INPUT", what) {}
};

// Model/config structure problems: unmapped cells, bad schemas, bad paths.
class ConfigError : public Error {
public:
  ConfigError(std::string code, const std::string& what) : Error(std::move(code), what) {}
  explicit ConfigError(const std::string& what) : Error("E_CONFIG_INVALID", what) {}
};

// Linear-algebra or sampling failures (non-PD matrices, exhausted jitter).
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error("E_NUMERIC", what) {}
};

// Chain initialization could not find a finite-likelihood start.
class InitError : public Error {
public:
  explicit InitError(const std::string& what) : Error("E_INIT_FAILED", what) {}
};

class IoError : public Error {
public:
  IoError(std::string code, const std::string& what) : Error(std::move(code), what) {}
  explicit IoError(const std::string& what) : Error("E_IO", what) {}
};

}  // namespace accjoint
