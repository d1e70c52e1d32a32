#ifndef DYNOGRAPH_SERIALIZE_HPP
#define DYNOGRAPH_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "dynograph/system.hpp"

namespace dynograph {

// Shortest decimal string that round-trips to the same double.
std::string format_real(double v);

// Fixed 17-significant-digit formatting used by the CSV exports.
std::string format_real_17(double v);

// Expression in model-source syntax with minimal parentheses; reparsing
// yields a structurally identical tree.
std::string print_expr(const ExprPtr& e);

// Expression as a prefix s-expression, e.g. (+ (comp Q) 1).
std::string expr_sexpr(const ExprPtr& e);

// Canonical model source. parse_model(print_model(spec)) == spec for every
// valid spec built through the eb:: constructors.
std::string print_model(const SystemSpec& spec);

// Canonical JSON with stable key order for golden tests.
nlohmann::ordered_json to_json(const SystemSpec& spec);

}  // namespace dynograph

#endif  // DYNOGRAPH_SERIALIZE_HPP
