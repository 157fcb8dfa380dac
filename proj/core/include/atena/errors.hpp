#pragma once

#include <stdexcept>
#include <string>

namespace atena {

/// A caller broke a documented precondition (bad index, mismatched shapes,
/// stale caches). Not recoverable by retrying.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// World, shift or task generation could not satisfy its constraints within
/// the retry budget.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration, sweep grid or CLI override.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ATENA_REQUIRE(cond, msg)                                   \
  do {                                                             \
    if (!(cond)) throw ::atena::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace atena
