#ifndef DYNOGRAPH_SYSTEM_HPP
#define DYNOGRAPH_SYSTEM_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynograph/expr.hpp"

namespace dynograph {

// Time-fixed identifying quantity: a constant or an independent Gaussian
// draw made once per replicate. sd = 0 is equivalent to Fixed(mean).
struct AttributeDecl {
  struct Fixed {
    double value = 0.0;
  };
  struct GaussianRandom {
    double mean = 0.0;
    double sd = 0.0;
  };

  std::string name;
  bool random = false;
  double mean = 0.0;  // Fixed value when !random
  double sd = 0.0;

  static AttributeDecl fixed(std::string name, double value) {
    AttributeDecl a;
    a.name = std::move(name);
    a.mean = value;
    return a;
  }
  static AttributeDecl gaussian(std::string name, double mean, double sd) {
    AttributeDecl a;
    a.name = std::move(name);
    a.random = true;
    a.mean = mean;
    a.sd = sd;
    return a;
  }
};

inline bool operator==(const AttributeDecl& a, const AttributeDecl& b) {
  return a.name == b.name && a.random == b.random && a.mean == b.mean && a.sd == b.sd;
}

enum class ComponentKind { Diffusion, Counting, DeterministicOde };

const char* to_string(ComponentKind k);

// Initial value: a literal or the value of a declared attribute.
struct InitValue {
  bool fromAttr = false;
  double value = 0.0;
  std::string attrName;

  static InitValue fixed(double v) {
    InitValue i;
    i.value = v;
    return i;
  }
  static InitValue attr(std::string name) {
    InitValue i;
    i.fromAttr = true;
    i.attrName = std::move(name);
    return i;
  }
};

inline bool operator==(const InitValue& a, const InitValue& b) {
  return a.fromAttr == b.fromAttr && a.value == b.value && a.attrName == b.attrName;
}

// One state component with its own driving noise. For Counting components
// `drift` is the intensity; `diffusionCoeff` is set for Diffusion only and
// may reference Const/Time nodes only (deterministic bracket).
struct ComponentSpec {
  std::string name;
  ComponentKind kind = ComponentKind::Diffusion;
  ExprPtr drift;
  ExprPtr diffusionCoeff;
  InitValue init;
};

inline bool operator==(const ComponentSpec& a, const ComponentSpec& b) {
  return a.name == b.name && a.kind == b.kind && expr_equal(a.drift, b.drift) &&
         expr_equal(a.diffusionCoeff, b.diffusionCoeff) && a.init == b.init;
}

// Piecewise-constant exogenous schedule. Drifts see the left limit: the
// value at time t is the value of the last breakpoint strictly before t.
struct InputSchedule {
  std::string name;
  std::vector<double> times;   // strictly increasing, times[0] is the start
  std::vector<double> values;  // same length as times

  double left_limit_at(double t) const;
};

inline bool operator==(const InputSchedule& a, const InputSchedule& b) {
  return a.name == b.name && a.times == b.times && a.values == b.values;
}

// A declared dynamical system: attributes plus an ordered list of state
// components, with optional exogenous inputs.
struct SystemSpec {
  std::string name;
  std::vector<AttributeDecl> attributes;
  std::vector<ComponentSpec> components;
  std::vector<InputSchedule> inputs;

  // Optional correlation matrix over the random attributes in declaration
  // order (identity when absent). Only builders set this; the DSL always
  // declares independent attributes.
  std::optional<Eigen::MatrixXd> attributeCorr;

  const ComponentSpec* find_component(const std::string& n) const;
  const AttributeDecl* find_attribute(const std::string& n) const;
  const InputSchedule* find_input(const std::string& n) const;

  NameIndex name_index() const;
};

bool operator==(const SystemSpec& a, const SystemSpec& b);

}  // namespace dynograph

#endif  // DYNOGRAPH_SYSTEM_HPP
