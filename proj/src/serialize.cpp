#include "dynograph/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace dynograph {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_real_17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

const char* cmp_token(Cmp c) {
  switch (c) {
    case Cmp::Lt: return "<";
    case Cmp::Le: return "<=";
    case Cmp::Eq: return "==";
    case Cmp::Ge: return ">=";
    case Cmp::Gt: return ">";
  }
  return "?";
}

int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
      return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
      return 2;
    case Expr::Kind::Neg:
      return 3;
    default:
      return 4;
  }
}

void print_into(const ExprPtr& e, int context, std::string& out) {
  const int prec = precedence(*e);
  const bool parens = prec < context;
  if (parens) out += '(';
  switch (e->kind) {
    case Expr::Kind::Const:
      out += format_real(e->value);
      break;
    case Expr::Kind::Time:
      out += 't';
      break;
    case Expr::Kind::Comp:
    case Expr::Kind::Attr:
    case Expr::Kind::Input:
      out += e->name;
      break;
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
      print_into(e->lhs, 1, out);
      out += e->kind == Expr::Kind::Add ? " + " : " - ";
      print_into(e->rhs, 2, out);
      break;
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
      print_into(e->lhs, 2, out);
      out += e->kind == Expr::Kind::Mul ? " * " : " / ";
      print_into(e->rhs, 3, out);
      break;
    case Expr::Kind::Neg:
      out += '-';
      print_into(e->lhs, 3, out);
      break;
    case Expr::Kind::Exp:
      out += "exp(";
      print_into(e->lhs, 0, out);
      out += ')';
      break;
    case Expr::Kind::Min:
    case Expr::Kind::Max:
      out += e->kind == Expr::Kind::Min ? "min(" : "max(";
      print_into(e->lhs, 0, out);
      out += ", ";
      print_into(e->rhs, 0, out);
      out += ')';
      break;
    case Expr::Kind::Ind:
      out += "ind(";
      print_into(e->lhs, 0, out);
      out += ' ';
      out += cmp_token(e->cmp);
      out += ' ';
      print_into(e->rhs, 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

void sexpr_into(const ExprPtr& e, std::string& out) {
  switch (e->kind) {
    case Expr::Kind::Const:
      out += format_real(e->value);
      return;
    case Expr::Kind::Time:
      out += 't';
      return;
    case Expr::Kind::Comp:
      out += "(comp " + e->name + ")";
      return;
    case Expr::Kind::Attr:
      out += "(attr " + e->name + ")";
      return;
    case Expr::Kind::Input:
      out += "(input " + e->name + ")";
      return;
    default:
      break;
  }
  const char* head = "?";
  switch (e->kind) {
    case Expr::Kind::Add: head = "+"; break;
    case Expr::Kind::Sub: head = "-"; break;
    case Expr::Kind::Mul: head = "*"; break;
    case Expr::Kind::Div: head = "/"; break;
    case Expr::Kind::Neg: head = "neg"; break;
    case Expr::Kind::Exp: head = "exp"; break;
    case Expr::Kind::Min: head = "min"; break;
    case Expr::Kind::Max: head = "max"; break;
    case Expr::Kind::Ind: head = "ind"; break;
    default: break;
  }
  out += '(';
  out += head;
  if (e->kind == Expr::Kind::Ind) {
    out += ' ';
    out += cmp_token(e->cmp);
  }
  out += ' ';
  sexpr_into(e->lhs, out);
  if (e->rhs) {
    out += ' ';
    sexpr_into(e->rhs, out);
  }
  out += ')';
}

}  // namespace

std::string print_expr(const ExprPtr& e) {
  std::string out;
  print_into(e, 0, out);
  return out;
}

std::string expr_sexpr(const ExprPtr& e) {
  std::string out;
  sexpr_into(e, out);
  return out;
}

std::string print_model(const SystemSpec& spec) {
  std::string out = "system " + spec.name + "\n";
  if (!spec.attributes.empty()) out += '\n';
  for (const auto& a : spec.attributes) {
    if (a.random)
      out += "attr " + a.name + " = normal(" + format_real(a.mean) + ", " +
             format_real(a.sd) + ")\n";
    else
      out += "attr " + a.name + " = " + format_real(a.mean) + "\n";
  }
  if (!spec.inputs.empty()) out += '\n';
  for (const auto& in : spec.inputs) {
    out += "input " + in.name + " = steps(";
    for (size_t i = 0; i < in.times.size(); ++i) {
      if (i) out += ", ";
      out += format_real(in.times[i]) + ":" + format_real(in.values[i]);
    }
    out += ")\n";
  }
  for (const auto& c : spec.components) {
    out += "\ncomponent " + c.name + " : " + to_string(c.kind) + " {\n";
    out += "  drift = " + print_expr(c.drift) + ";\n";
    if (c.diffusionCoeff) out += "  sigma = " + print_expr(c.diffusionCoeff) + ";\n";
    if (c.init.fromAttr)
      out += "  init = " + c.init.attrName + ";\n";
    else
      out += "  init = " + format_real(c.init.value) + ";\n";
    out += "}\n";
  }
  return out;
}

nlohmann::ordered_json to_json(const SystemSpec& spec) {
  nlohmann::ordered_json j;
  j["system"] = spec.name;
  j["attributes"] = nlohmann::ordered_json::array();
  for (const auto& a : spec.attributes) {
    nlohmann::ordered_json ja;
    ja["name"] = a.name;
    if (a.random) {
      ja["kind"] = "normal";
      ja["mean"] = a.mean;
      ja["sd"] = a.sd;
    } else {
      ja["kind"] = "fixed";
      ja["value"] = a.mean;
    }
    j["attributes"].push_back(std::move(ja));
  }
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : spec.inputs) {
    nlohmann::ordered_json ji;
    ji["name"] = in.name;
    auto steps = nlohmann::ordered_json::array();
    for (size_t i = 0; i < in.times.size(); ++i)
      steps.push_back({in.times[i], in.values[i]});
    ji["steps"] = std::move(steps);
    j["inputs"].push_back(std::move(ji));
  }
  j["components"] = nlohmann::ordered_json::array();
  for (const auto& c : spec.components) {
    nlohmann::ordered_json jc;
    jc["name"] = c.name;
    jc["kind"] = to_string(c.kind);
    jc["drift"] = expr_sexpr(c.drift);
    if (c.diffusionCoeff) jc["sigma"] = expr_sexpr(c.diffusionCoeff);
    if (c.init.fromAttr)
      jc["init"] = nlohmann::ordered_json{{"attr", c.init.attrName}};
    else
      jc["init"] = nlohmann::ordered_json{{"value", c.init.value}};
    j["components"].push_back(std::move(jc));
  }
  if (spec.attributeCorr) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < spec.attributeCorr->rows(); ++r) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < spec.attributeCorr->cols(); ++c)
        row.push_back((*spec.attributeCorr)(r, c));
      rows.push_back(std::move(row));
    }
    j["attributeCorr"] = std::move(rows);
  }
  return j;
}

}  // namespace dynograph
