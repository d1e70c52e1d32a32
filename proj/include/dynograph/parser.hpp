#ifndef DYNOGRAPH_PARSER_HPP
#define DYNOGRAPH_PARSER_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynograph/system.hpp"

namespace dynograph {

struct SourceSpan {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  int length = 1;
};

enum class Severity { Error, Warning };

struct ParseDiagnostic {
  SourceSpan span;
  Severity severity = Severity::Error;
  std::string code;  // NAME | DUP | KIND | SYNTAX
  std::string message;
};

// "file:line:col: severity[code] message"
std::string format_diagnostic(const ParseDiagnostic& d, const std::string& file);

struct ParseResult {
  std::optional<SystemSpec> spec;  // absent iff an Error diagnostic exists
  std::vector<ParseDiagnostic> diagnostics;
  bool ok() const { return spec.has_value(); }
};

// Parses the model DSL. Total and deterministic: any input yields either a
// spec or diagnostics, never a crash. Semantic A1/A2 checking is a separate
// pass (validate); the parser only resolves names and shapes.
ParseResult parse_model(std::string_view source);

}  // namespace dynograph

#endif  // DYNOGRAPH_PARSER_HPP
