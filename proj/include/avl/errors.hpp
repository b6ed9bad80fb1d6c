#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace avl {

/// A precondition on the mathematical domain was violated (non-timelike
/// vector, non-unit velocity, non-affine connection where one is required).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A moment reduction had nothing to reduce (empty kernel selection).
class DegenerateMomentsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Characteristic integration left the configured domain box.
class OutOfDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration aborted; carries the failing step (and particle, if any).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, std::size_t step, long particle = -1)
      : std::runtime_error(what), step_(step), particle_(particle) {}
  std::size_t step() const { return step_; }
  long particle() const { return particle_; }

 private:
  std::size_t step_;
  long particle_;
};

}  // namespace avl
