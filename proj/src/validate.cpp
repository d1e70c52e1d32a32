#include "dynograph/validate.hpp"

#include <cmath>
#include <unordered_set>

namespace dynograph {

const char* to_string(RuleId id) {
  switch (id) {
    case RuleId::A1: return "A1";
    case RuleId::A2: return "A2";
    case RuleId::NAME: return "NAME";
    case RuleId::INIT: return "INIT";
  }
  return "?";
}

namespace {

void check_refs(const SystemSpec& spec, const std::string& owner, const ExprPtr& e,
                const char* what, std::vector<Violation>& out) {
  if (!e) return;
  ExprRefs refs = collect_refs(e);
  for (const auto& n : refs.comps)
    if (!spec.find_component(n))
      out.push_back({owner, RuleId::NAME,
                     std::string(what) + " references undeclared component '" + n + "'"});
  for (const auto& n : refs.attrs)
    if (!spec.find_attribute(n))
      out.push_back({owner, RuleId::NAME,
                     std::string(what) + " references undeclared attribute '" + n + "'"});
  for (const auto& n : refs.inputs)
    if (!spec.find_input(n))
      out.push_back({owner, RuleId::NAME,
                     std::string(what) + " references undeclared input '" + n + "'"});
}

}  // namespace

ValidationReport validate(const SystemSpec& spec) {
  ValidationReport report;
  auto& out = report.violations;

  // Declared names must be mutually disjoint.
  std::unordered_set<std::string> seen;
  auto declare = [&](const std::string& n, const char* what) {
    if (!seen.insert(n).second)
      out.push_back({n, RuleId::NAME, std::string("duplicate declaration of '") + n +
                                          "' (" + what + ")"});
  };
  for (const auto& a : spec.attributes) declare(a.name, "attribute");
  for (const auto& c : spec.components) declare(c.name, "component");
  for (const auto& i : spec.inputs) declare(i.name, "input");

  for (const auto& a : spec.attributes) {
    if (a.random && (a.sd < 0.0 || !std::isfinite(a.sd)))
      out.push_back({a.name, RuleId::INIT, "attribute sd must be >= 0"});
    if (!std::isfinite(a.mean))
      out.push_back({a.name, RuleId::INIT, "attribute value must be finite"});
  }

  for (const auto& i : spec.inputs) {
    if (i.times.empty() || i.times.size() != i.values.size())
      out.push_back({i.name, RuleId::INIT, "input schedule needs matching breakpoints"});
    for (size_t k = 1; k < i.times.size(); ++k)
      if (!(i.times[k] > i.times[k - 1])) {
        out.push_back({i.name, RuleId::INIT, "input breakpoints must be strictly increasing"});
        break;
      }
  }

  for (const auto& c : spec.components) {
    if (!c.drift) {
      out.push_back({c.name, RuleId::NAME, "component has no drift expression"});
      continue;
    }
    check_refs(spec, c.name, c.drift, "drift", out);

    if (c.kind == ComponentKind::Diffusion) {
      if (!c.diffusionCoeff) {
        out.push_back({c.name, RuleId::A2, "diffusion component needs a sigma expression"});
      } else {
        check_refs(spec, c.name, c.diffusionCoeff, "sigma", out);
        ExprRefs refs = collect_refs(c.diffusionCoeff);
        if (!refs.comps.empty() || !refs.attrs.empty() || !refs.inputs.empty())
          out.push_back({c.name, RuleId::A2,
                         "sigma must be deterministic (Const/Time only); the bracket "
                         "process would otherwise be random"});
      }
    } else if (c.diffusionCoeff) {
      out.push_back({c.name, RuleId::A2,
                     std::string(to_string(c.kind)) + " component must not carry a sigma"});
    }

    if (c.kind == ComponentKind::Counting) {
      if (c.init.fromAttr || c.init.value != 0.0)
        out.push_back({c.name, RuleId::INIT, "counting component must start at 0"});
    }
    if (c.init.fromAttr && !spec.find_attribute(c.init.attrName))
      out.push_back({c.name, RuleId::NAME,
                     "init references undeclared attribute '" + c.init.attrName + "'"});
    if (!c.init.fromAttr && !std::isfinite(c.init.value))
      out.push_back({c.name, RuleId::INIT, "init must be finite"});
  }

  if (spec.attributeCorr) {
    long nRandom = 0;
    for (const auto& a : spec.attributes)
      if (a.random) ++nRandom;
    if (spec.attributeCorr->rows() != nRandom || spec.attributeCorr->cols() != nRandom)
      out.push_back({spec.name, RuleId::INIT,
                     "attribute correlation must be square over the random attributes"});
  }

  return report;
}

std::set<std::string> dependencies(const SystemSpec& spec, const std::string& component) {
  const ComponentSpec* c = spec.find_component(component);
  if (!c) throw UnknownNameError("unknown component '" + component + "'");
  std::set<std::string> deps = collect_refs(c->drift).comps;
  deps.erase(component);
  return deps;
}

std::set<std::string> input_dependencies(const SystemSpec& spec, const std::string& component) {
  const ComponentSpec* c = spec.find_component(component);
  if (!c) throw UnknownNameError("unknown component '" + component + "'");
  return collect_refs(c->drift).inputs;
}

SystemSpec canonicalize_deterministic(const SystemSpec& spec) {
  for (const auto& c : spec.components)
    if (c.kind != ComponentKind::DeterministicOde)
      throw PreconditionError("component '" + c.name + "' is not an ODE");
  for (const auto& c : spec.components)
    if (references_time(c.drift))
      throw TimeInhomogeneousError(
          "drift of '" + c.name +
          "' references time; the time-homogeneous canonical representation does not exist");

  SystemSpec out = spec;
  for (auto& c : out.components) {
    c.kind = ComponentKind::Diffusion;
    c.diffusionCoeff = eb::constant(1.0);
  }
  return out;
}

}  // namespace dynograph
