#include "dynograph/system.hpp"

namespace dynograph {

const char* to_string(ComponentKind k) {
  switch (k) {
    case ComponentKind::Diffusion: return "diffusion";
    case ComponentKind::Counting: return "counting";
    case ComponentKind::DeterministicOde: return "ode";
  }
  return "?";
}

double InputSchedule::left_limit_at(double t) const {
  if (times.empty()) return 0.0;
  double v = values.front();
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t)
      v = values[i];
    else
      break;
  }
  return v;
}

const ComponentSpec* SystemSpec::find_component(const std::string& n) const {
  for (const auto& c : components)
    if (c.name == n) return &c;
  return nullptr;
}

const AttributeDecl* SystemSpec::find_attribute(const std::string& n) const {
  for (const auto& a : attributes)
    if (a.name == n) return &a;
  return nullptr;
}

const InputSchedule* SystemSpec::find_input(const std::string& n) const {
  for (const auto& i : inputs)
    if (i.name == n) return &i;
  return nullptr;
}

NameIndex SystemSpec::name_index() const {
  NameIndex idx;
  for (size_t i = 0; i < components.size(); ++i)
    idx.comps.emplace(components[i].name, static_cast<int>(i));
  for (size_t i = 0; i < attributes.size(); ++i)
    idx.attrs.emplace(attributes[i].name, static_cast<int>(i));
  for (size_t i = 0; i < inputs.size(); ++i)
    idx.inputs.emplace(inputs[i].name, static_cast<int>(i));
  return idx;
}

bool operator==(const SystemSpec& a, const SystemSpec& b) {
  if (a.name != b.name || a.attributes != b.attributes || a.inputs != b.inputs)
    return false;
  if (a.components != b.components) return false;
  const bool ca = a.attributeCorr.has_value();
  const bool cb = b.attributeCorr.has_value();
  if (ca != cb) return false;
  if (ca) {
    if (a.attributeCorr->rows() != b.attributeCorr->rows() ||
        a.attributeCorr->cols() != b.attributeCorr->cols())
      return false;
    if (!(a.attributeCorr->array() == b.attributeCorr->array()).all()) return false;
  }
  return true;
}

}  // namespace dynograph
