#include "dynograph/parser.hpp"

#include <cctype>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

namespace dynograph {

std::string format_diagnostic(const ParseDiagnostic& d, const std::string& file) {
  std::string sev = d.severity == Severity::Error ? "error" : "warning";
  return file + ":" + std::to_string(d.span.line) + ":" + std::to_string(d.span.column) +
         ": " + sev + "[" + d.code + "] " + d.message;
}

namespace {

enum class TokKind { Ident, Real, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  double value = 0.0;  // Real
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<ParseDiagnostic>& diags) {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t = next(diags);
      out.push_back(t);
      if (t.kind == TokKind::End) break;
    }
    return out;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;

  char peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  void advance() {
    if (pos_ < src_.size()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  Token next(std::vector<ParseDiagnostic>& diags) {
    Token t;
    t.span = {line_, col_, 1};
    if (pos_ >= src_.size()) {
      t.kind = TokKind::End;
      t.text = "<eof>";
      return t;
    }
    char c = peek();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      t.kind = TokKind::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      t.span.length = static_cast<int>(pos_ - start);
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      size_t start = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      if (peek() == '.') {
        advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        size_t mark = pos_;
        int markLine = line_, markCol = col_;
        advance();
        if (peek() == '+' || peek() == '-') advance();
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
          while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        } else {
          // 'e' was not an exponent; leave it for the next token
          pos_ = mark;
          line_ = markLine;
          col_ = markCol;
        }
      }
      t.kind = TokKind::Real;
      t.text = std::string(src_.substr(start, pos_ - start));
      t.span.length = static_cast<int>(pos_ - start);
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
        diags.push_back({t.span, Severity::Error, "SYNTAX", "malformed number '" + t.text + "'"});
      return t;
    }
    // multi-char comparison operators
    if ((c == '<' || c == '>' || c == '=') && peek(1) == '=') {
      t.kind = TokKind::Punct;
      t.text = std::string{c, '='};
      t.span.length = 2;
      advance();
      advance();
      return t;
    }
    t.kind = TokKind::Punct;
    t.text = std::string(1, c);
    advance();
    return t;
  }
};

const std::unordered_set<std::string>& reserved_words() {
  static const std::unordered_set<std::string> words{
      "t",      "system",    "attr",     "input", "component", "diffusion",
      "counting", "ode",     "drift",    "sigma", "init",      "steps",
      "normal", "exp",       "min",      "max",   "ind"};
  return words;
}

struct DeclaredName {
  enum class Kind { Comp, Attr, Input } kind;
  SourceSpan span;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lexer_(src) {}

  ParseResult run() {
    ParseResult result;
    tokens_ = lexer_.run(result.diagnostics);
    diags_ = &result.diagnostics;
    prescan();
    SystemSpec spec = parse_model();
    bool hasError = false;
    for (const auto& d : result.diagnostics)
      if (d.severity == Severity::Error) hasError = true;
    if (!hasError) result.spec = std::move(spec);
    return result;
  }

 private:
  Lexer lexer_;
  std::vector<Token> tokens_;
  size_t pos_ = 0;
  std::vector<ParseDiagnostic>* diags_ = nullptr;
  std::unordered_map<std::string, DeclaredName> declared_;
  int exprDepth_ = 0;

  const Token& cur() const { return tokens_[pos_]; }
  const Token& get() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool at_end() const { return cur().kind == TokKind::End; }

  bool is_ident(const char* word) const {
    return cur().kind == TokKind::Ident && cur().text == word;
  }
  bool is_punct(const char* p) const {
    return cur().kind == TokKind::Punct && cur().text == p;
  }

  void error(const SourceSpan& span, const std::string& code, const std::string& msg) {
    diags_->push_back({span, Severity::Error, code, msg});
  }

  bool expect_punct(const char* p, const char* context) {
    if (is_punct(p)) {
      get();
      return true;
    }
    error(cur().span, "SYNTAX",
          std::string("expected '") + p + "' " + context + ", found '" + cur().text + "'");
    return false;
  }

  // Skip to the next declaration keyword or closing brace.
  void recover_to_decl() {
    while (!at_end()) {
      if (is_ident("attr") || is_ident("input") || is_ident("component")) return;
      if (is_punct("}")) {
        get();
        return;
      }
      get();
    }
  }
  // Skip past the current statement inside a component body.
  void recover_in_body() {
    while (!at_end() && !is_punct(";") && !is_punct("}")) get();
    if (is_punct(";")) get();
  }

  // Collect declaration names first so drifts may reference components
  // declared later in the file.
  void prescan() {
    for (size_t i = 0; i + 1 < tokens_.size(); ++i) {
      if (tokens_[i].kind != TokKind::Ident) continue;
      const Token& name = tokens_[i + 1];
      if (name.kind != TokKind::Ident) continue;
      DeclaredName::Kind kind;
      if (tokens_[i].text == "component")
        kind = DeclaredName::Kind::Comp;
      else if (tokens_[i].text == "attr")
        kind = DeclaredName::Kind::Attr;
      else if (tokens_[i].text == "input")
        kind = DeclaredName::Kind::Input;
      else
        continue;
      declared_.emplace(name.text, DeclaredName{kind, name.span});
    }
  }

  std::optional<std::string> declared_ident(const char* what) {
    if (cur().kind != TokKind::Ident) {
      error(cur().span, "SYNTAX",
            std::string("expected ") + what + " name, found '" + cur().text + "'");
      return std::nullopt;
    }
    Token name = get();
    if (reserved_words().count(name.text)) {
      error(name.span, "NAME", "'" + name.text + "' is a reserved word");
      return std::nullopt;
    }
    return name.text;
  }

  std::optional<double> parse_real_value(const char* context) {
    bool negate = false;
    if (is_punct("-")) {
      get();
      negate = true;
    }
    if (cur().kind != TokKind::Real) {
      error(cur().span, "SYNTAX",
            std::string("expected a number ") + context + ", found '" + cur().text + "'");
      return std::nullopt;
    }
    double v = get().value;
    return negate ? -v : v;
  }

  SystemSpec parse_model() {
    SystemSpec spec;
    if (is_ident("system")) {
      get();
      if (cur().kind == TokKind::Ident && !reserved_words().count(cur().text)) {
        spec.name = get().text;
      } else {
        error(cur().span, "SYNTAX", "expected system name after 'system'");
      }
    } else {
      error(cur().span, "SYNTAX", "model must start with 'system <name>'");
    }

    std::unordered_set<std::string> defined;
    while (!at_end()) {
      if (is_ident("attr")) {
        get();
        parse_attr(spec, defined);
      } else if (is_ident("input")) {
        get();
        parse_input(spec, defined);
      } else if (is_ident("component")) {
        get();
        parse_component(spec, defined);
      } else {
        error(cur().span, "SYNTAX",
              "expected 'attr', 'input' or 'component', found '" + cur().text + "'");
        get();
        recover_to_decl();
      }
    }
    return spec;
  }

  void check_duplicate(const std::string& name, const SourceSpan& span,
                       std::unordered_set<std::string>& defined) {
    if (!defined.insert(name).second)
      error(span, "DUP", "duplicate declaration of '" + name + "'");
  }

  void parse_attr(SystemSpec& spec, std::unordered_set<std::string>& defined) {
    SourceSpan nameSpan = cur().span;
    auto name = declared_ident("attribute");
    if (!name) {
      recover_to_decl();
      return;
    }
    check_duplicate(*name, nameSpan, defined);
    if (!expect_punct("=", "after attribute name")) {
      recover_to_decl();
      return;
    }
    if (is_ident("normal")) {
      get();
      if (!expect_punct("(", "after 'normal'")) return;
      auto mean = parse_real_value("for the mean");
      if (!expect_punct(",", "between normal(mean, sd)")) return;
      auto sd = parse_real_value("for the sd");
      expect_punct(")", "closing 'normal'");
      if (mean && sd) spec.attributes.push_back(AttributeDecl::gaussian(*name, *mean, *sd));
    } else {
      auto v = parse_real_value("for the attribute value");
      if (v) spec.attributes.push_back(AttributeDecl::fixed(*name, *v));
    }
  }

  void parse_input(SystemSpec& spec, std::unordered_set<std::string>& defined) {
    SourceSpan nameSpan = cur().span;
    auto name = declared_ident("input");
    if (!name) {
      recover_to_decl();
      return;
    }
    check_duplicate(*name, nameSpan, defined);
    if (!expect_punct("=", "after input name")) {
      recover_to_decl();
      return;
    }
    if (!is_ident("steps")) {
      error(cur().span, "SYNTAX", "expected 'steps(time:value, ...)'");
      recover_to_decl();
      return;
    }
    get();
    if (!expect_punct("(", "after 'steps'")) return;
    InputSchedule sched;
    sched.name = *name;
    while (true) {
      SourceSpan pairSpan = cur().span;
      auto time = parse_real_value("for a breakpoint time");
      if (!time) break;
      if (!expect_punct(":", "between time and value")) break;
      auto value = parse_real_value("for a breakpoint value");
      if (!value) break;
      if (!sched.times.empty() && *time <= sched.times.back())
        error(pairSpan, "SYNTAX", "breakpoints must be strictly increasing");
      sched.times.push_back(*time);
      sched.values.push_back(*value);
      if (is_punct(",")) {
        get();
        continue;
      }
      break;
    }
    expect_punct(")", "closing 'steps'");
    if (sched.times.empty())
      error(nameSpan, "SYNTAX", "input needs at least one time:value breakpoint");
    else
      spec.inputs.push_back(std::move(sched));
  }

  void parse_component(SystemSpec& spec, std::unordered_set<std::string>& defined) {
    SourceSpan nameSpan = cur().span;
    auto name = declared_ident("component");
    if (!name) {
      recover_to_decl();
      return;
    }
    check_duplicate(*name, nameSpan, defined);
    ComponentSpec comp;
    comp.name = *name;
    if (!expect_punct(":", "after component name")) {
      recover_to_decl();
      return;
    }
    if (is_ident("diffusion"))
      comp.kind = ComponentKind::Diffusion;
    else if (is_ident("counting"))
      comp.kind = ComponentKind::Counting;
    else if (is_ident("ode"))
      comp.kind = ComponentKind::DeterministicOde;
    else {
      error(cur().span, "SYNTAX",
            "expected component kind 'diffusion', 'counting' or 'ode', found '" +
                cur().text + "'");
      recover_to_decl();
      return;
    }
    get();
    if (!expect_punct("{", "opening the component body")) {
      recover_to_decl();
      return;
    }

    bool haveDrift = false, haveInit = false;
    while (!at_end() && !is_punct("}")) {
      if (is_ident("drift")) {
        get();
        if (!expect_punct("=", "after 'drift'")) {
          recover_in_body();
          continue;
        }
        comp.drift = parse_expr();
        haveDrift = true;
        if (!expect_punct(";", "after the drift expression")) recover_in_body();
      } else if (is_ident("sigma")) {
        SourceSpan sigmaSpan = cur().span;
        get();
        if (!expect_punct("=", "after 'sigma'")) {
          recover_in_body();
          continue;
        }
        ExprPtr sigma = parse_expr();
        if (comp.kind == ComponentKind::Diffusion)
          comp.diffusionCoeff = sigma;
        else
          error(sigmaSpan, "KIND",
                std::string("sigma is only valid on diffusion components, not ") +
                    to_string(comp.kind));
        if (!expect_punct(";", "after the sigma expression")) recover_in_body();
      } else if (is_ident("init")) {
        get();
        if (!expect_punct("=", "after 'init'")) {
          recover_in_body();
          continue;
        }
        if (cur().kind == TokKind::Ident) {
          Token ref = get();
          auto it = declared_.find(ref.text);
          if (it == declared_.end() || it->second.kind != DeclaredName::Kind::Attr)
            error(ref.span, "NAME",
                  "init must reference a declared attribute; '" + ref.text + "' is not one");
          comp.init = InitValue::attr(ref.text);
        } else {
          auto v = parse_real_value("for the initial value");
          if (v) comp.init = InitValue::fixed(*v);
        }
        haveInit = true;
        if (!expect_punct(";", "after the init value")) recover_in_body();
      } else {
        error(cur().span, "SYNTAX",
              "expected 'drift', 'sigma' or 'init', found '" + cur().text + "'");
        recover_in_body();
      }
    }
    expect_punct("}", "closing the component body");
    if (!haveDrift) error(nameSpan, "SYNTAX", "component '" + *name + "' has no drift");
    if (!haveInit) error(nameSpan, "SYNTAX", "component '" + *name + "' has no init");
    if (haveDrift) spec.components.push_back(std::move(comp));
  }

  // --- expressions ------------------------------------------------------

  ExprPtr parse_expr() {
    if (++exprDepth_ > 500) {
      error(cur().span, "SYNTAX", "expression nested too deeply");
      --exprDepth_;
      return eb::constant(0.0);
    }
    ExprPtr e = parse_additive();
    --exprDepth_;
    return e;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (is_punct("+") || is_punct("-")) {
      bool add = cur().text == "+";
      get();
      ExprPtr rhs = parse_multiplicative();
      lhs = add ? eb::add(lhs, rhs) : eb::sub(lhs, rhs);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (is_punct("*") || is_punct("/")) {
      bool mul = cur().text == "*";
      get();
      ExprPtr rhs = parse_unary();
      lhs = mul ? eb::mul(lhs, rhs) : eb::div(lhs, rhs);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (is_punct("-")) {
      get();
      return eb::neg(parse_unary());  // eb::neg folds negated literals
    }
    return parse_primary();
  }

  std::optional<Cmp> parse_cmp() {
    static const std::unordered_map<std::string, Cmp> table{
        {"<", Cmp::Lt}, {"<=", Cmp::Le}, {"==", Cmp::Eq}, {">=", Cmp::Ge}, {">", Cmp::Gt}};
    if (cur().kind == TokKind::Punct) {
      auto it = table.find(cur().text);
      if (it != table.end()) {
        get();
        return it->second;
      }
    }
    error(cur().span, "SYNTAX", "expected a comparison (<, <=, ==, >=, >), found '" +
                                    cur().text + "'");
    return std::nullopt;
  }

  ExprPtr parse_primary() {
    if (cur().kind == TokKind::Real) return eb::constant(get().value);
    if (is_punct("(")) {
      get();
      ExprPtr e = parse_expr();
      expect_punct(")", "closing the parenthesis");
      return e;
    }
    if (cur().kind == TokKind::Ident) {
      Token id = get();
      if (id.text == "t") return eb::time();
      if (id.text == "exp" || id.text == "min" || id.text == "max" || id.text == "ind") {
        if (!expect_punct("(", ("after '" + id.text + "'").c_str()))
          return eb::constant(0.0);
        if (id.text == "exp") {
          ExprPtr a = parse_expr();
          expect_punct(")", "closing 'exp'");
          return eb::exp(a);
        }
        if (id.text == "ind") {
          ExprPtr a = parse_expr();
          auto cmp = parse_cmp();
          ExprPtr b = parse_expr();
          expect_punct(")", "closing 'ind'");
          return cmp ? eb::ind(*cmp, a, b) : eb::constant(0.0);
        }
        ExprPtr a = parse_expr();
        expect_punct(",", ("between the arguments of '" + id.text + "'").c_str());
        ExprPtr b = parse_expr();
        expect_punct(")", ("closing '" + id.text + "'").c_str());
        return id.text == "min" ? eb::min(a, b) : eb::max(a, b);
      }
      auto it = declared_.find(id.text);
      if (it == declared_.end()) {
        error(id.span, "NAME", "unknown identifier '" + id.text + "'");
        return eb::constant(0.0);
      }
      switch (it->second.kind) {
        case DeclaredName::Kind::Comp: return eb::comp(id.text);
        case DeclaredName::Kind::Attr: return eb::attr(id.text);
        case DeclaredName::Kind::Input: return eb::input(id.text);
      }
    }
    error(cur().span, "SYNTAX", "expected an expression, found '" + cur().text + "'");
    if (!at_end()) get();
    return eb::constant(0.0);
  }
};

}  // namespace

ParseResult parse_model(std::string_view source) {
  Parser parser(source);
  return parser.run();
}

}  // namespace dynograph
