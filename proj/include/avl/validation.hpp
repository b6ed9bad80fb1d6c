#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace avl {

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct ValidationOptions {
  int workers = 1;
  std::uint64_t seed = 1;
  bool flip_third_moment = false;  // deliberate fault; the delta check must then fail
};

/// Invariant suite: closed-form integrator oracles, connection identities,
/// shell conservation, delta consistency, normal frames, η̄ identities,
/// Liouville constancy, fitter self-test.
std::vector<ValidationCheck> run_validate(const ValidationOptions& options = {});

bool all_passed(const std::vector<ValidationCheck>& checks);
void write_validation_csv(std::ostream& out, const std::vector<ValidationCheck>& checks);
nlohmann::json validation_to_json(const std::vector<ValidationCheck>& checks);

}  // namespace avl
