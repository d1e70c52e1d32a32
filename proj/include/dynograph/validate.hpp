#ifndef DYNOGRAPH_VALIDATE_HPP
#define DYNOGRAPH_VALIDATE_HPP

#include <set>
#include <string>
#include <vector>

#include "dynograph/system.hpp"

namespace dynograph {

// Regularity rules checked on a structurally well-formed SystemSpec.
//   A1   orthogonal driving noises (by construction in this representation;
//        reserved so reports can name the assumption)
//   A2   deterministic bracket: diffusion coefficients must not reference
//        components or attributes
//   NAME undeclared or duplicated identifiers
//   INIT initial/value-domain violations (counting init != 0, sd < 0, ...)
enum class RuleId { A1, A2, NAME, INIT };

const char* to_string(RuleId id);

struct Violation {
  std::string component;  // may name an attribute or input for NAME/INIT
  RuleId rule = RuleId::NAME;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Violations are data, not failures; validate never throws on bad specs.
ValidationReport validate(const SystemSpec& spec);

// Component names appearing in `component`'s drift, excluding the component
// itself. Attributes and inputs are excluded. Throws UnknownNameError.
std::set<std::string> dependencies(const SystemSpec& spec, const std::string& component);

// Input names appearing in `component`'s drift.
std::set<std::string> input_dependencies(const SystemSpec& spec, const std::string& component);

struct TimeInhomogeneousError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical stochastic representation of an all-ODE system: each component
// becomes a Diffusion with the same drift and unit diffusion coefficient.
// Requires time-homogeneous drifts; throws TimeInhomogeneousError if any
// drift references time (the canonical representation is not unique then).
SystemSpec canonicalize_deterministic(const SystemSpec& spec);

}  // namespace dynograph

#endif  // DYNOGRAPH_VALIDATE_HPP
