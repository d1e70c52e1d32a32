#include "dynograph/expr.hpp"

#include <cmath>

namespace dynograph {

namespace {

ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

ExprPtr unary(Expr::Kind k, ExprPtr a) {
  Expr e;
  e.kind = k;
  e.lhs = std::move(a);
  return make(std::move(e));
}

ExprPtr binary(Expr::Kind k, ExprPtr a, ExprPtr b) {
  Expr e;
  e.kind = k;
  e.lhs = std::move(a);
  e.rhs = std::move(b);
  return make(std::move(e));
}

ExprPtr named(Expr::Kind k, std::string name) {
  Expr e;
  e.kind = k;
  e.name = std::move(name);
  return make(std::move(e));
}

}  // namespace

namespace eb {

ExprPtr constant(double v) {
  Expr e;
  e.kind = Expr::Kind::Const;
  e.value = v;
  return make(std::move(e));
}

ExprPtr time() {
  Expr e;
  e.kind = Expr::Kind::Time;
  return make(std::move(e));
}

ExprPtr comp(std::string name) { return named(Expr::Kind::Comp, std::move(name)); }
ExprPtr attr(std::string name) { return named(Expr::Kind::Attr, std::move(name)); }
ExprPtr input(std::string name) { return named(Expr::Kind::Input, std::move(name)); }

ExprPtr add(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Add, std::move(a), std::move(b)); }
ExprPtr sub(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Sub, std::move(a), std::move(b)); }
ExprPtr mul(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Mul, std::move(a), std::move(b)); }
ExprPtr div(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Div, std::move(a), std::move(b)); }
ExprPtr neg(ExprPtr a) {
  // fold a negated literal; keeps printing round-trippable ("-2" lexes as a
  // unary minus on a literal)
  if (a->kind == Expr::Kind::Const) return constant(-a->value);
  return unary(Expr::Kind::Neg, std::move(a));
}
ExprPtr exp(ExprPtr a) { return unary(Expr::Kind::Exp, std::move(a)); }
ExprPtr min(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Min, std::move(a), std::move(b)); }
ExprPtr max(ExprPtr a, ExprPtr b) { return binary(Expr::Kind::Max, std::move(a), std::move(b)); }

ExprPtr ind(Cmp cmp, ExprPtr a, ExprPtr b) {
  Expr e;
  e.kind = Expr::Kind::Ind;
  e.cmp = cmp;
  e.lhs = std::move(a);
  e.rhs = std::move(b);
  return make(std::move(e));
}

}  // namespace eb

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Const:
      return a.value == b.value;
    case Expr::Kind::Time:
      return true;
    case Expr::Kind::Comp:
    case Expr::Kind::Attr:
    case Expr::Kind::Input:
      return a.name == b.name;
    case Expr::Kind::Ind:
      if (a.cmp != b.cmp) return false;
      [[fallthrough]];
    default:
      return expr_equal(a.lhs, b.lhs) && expr_equal(a.rhs, b.rhs);
  }
}

namespace {

void collect_refs_into(const ExprPtr& e, ExprRefs& out) {
  if (!e) return;
  switch (e->kind) {
    case Expr::Kind::Comp:
      out.comps.insert(e->name);
      break;
    case Expr::Kind::Attr:
      out.attrs.insert(e->name);
      break;
    case Expr::Kind::Input:
      out.inputs.insert(e->name);
      break;
    default:
      break;
  }
  collect_refs_into(e->lhs, out);
  collect_refs_into(e->rhs, out);
}

}  // namespace

ExprRefs collect_refs(const ExprPtr& e) {
  ExprRefs refs;
  collect_refs_into(e, refs);
  return refs;
}

bool references_time(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == Expr::Kind::Time) return true;
  return references_time(e->lhs) || references_time(e->rhs);
}

CompiledExpr CompiledExpr::compile(const ExprPtr& e, const NameIndex& names) {
  CompiledExpr out;
  int depth = 0;
  int max_depth = 0;

  auto push = [&](Op op, int arity) {
    depth += 1 - arity;
    if (depth > max_depth) max_depth = depth;
    out.ops_.push_back(op);
  };

  auto lookup = [](const std::unordered_map<std::string, int>& table,
                   const std::string& name, const char* what) {
    auto it = table.find(name);
    if (it == table.end())
      throw UnknownNameError(std::string("unknown ") + what + " '" + name + "'");
    return it->second;
  };

  auto walk = [&](auto&& self, const ExprPtr& node) -> void {
    if (!node) throw std::logic_error("null expression node");
    switch (node->kind) {
      case Expr::Kind::Const:
        push({OpCode::PushConst, node->value, 0}, 0);
        return;
      case Expr::Kind::Time:
        push({OpCode::PushTime}, 0);
        return;
      case Expr::Kind::Comp:
        push({OpCode::PushState, 0.0, lookup(names.comps, node->name, "component")}, 0);
        return;
      case Expr::Kind::Attr:
        push({OpCode::PushAttr, 0.0, lookup(names.attrs, node->name, "attribute")}, 0);
        return;
      case Expr::Kind::Input:
        push({OpCode::PushInput, 0.0, lookup(names.inputs, node->name, "input")}, 0);
        return;
      case Expr::Kind::Neg:
        self(self, node->lhs);
        push({OpCode::Neg}, 1);
        return;
      case Expr::Kind::Exp:
        self(self, node->lhs);
        push({OpCode::Exp}, 1);
        return;
      case Expr::Kind::Add:
      case Expr::Kind::Sub:
      case Expr::Kind::Mul:
      case Expr::Kind::Div:
      case Expr::Kind::Min:
      case Expr::Kind::Max: {
        self(self, node->lhs);
        self(self, node->rhs);
        OpCode code = OpCode::Add;
        switch (node->kind) {
          case Expr::Kind::Add: code = OpCode::Add; break;
          case Expr::Kind::Sub: code = OpCode::Sub; break;
          case Expr::Kind::Mul: code = OpCode::Mul; break;
          case Expr::Kind::Div: code = OpCode::Div; break;
          case Expr::Kind::Min: code = OpCode::Min; break;
          case Expr::Kind::Max: code = OpCode::Max; break;
          default: break;
        }
        push({code}, 2);
        return;
      }
      case Expr::Kind::Ind: {
        self(self, node->lhs);
        self(self, node->rhs);
        OpCode code = OpCode::IndLt;
        switch (node->cmp) {
          case Cmp::Lt: code = OpCode::IndLt; break;
          case Cmp::Le: code = OpCode::IndLe; break;
          case Cmp::Eq: code = OpCode::IndEq; break;
          case Cmp::Ge: code = OpCode::IndGe; break;
          case Cmp::Gt: code = OpCode::IndGt; break;
        }
        push({code}, 2);
        return;
      }
    }
  };
  walk(walk, e);
  out.stack_depth_ = max_depth;
  return out;
}

double CompiledExpr::eval(double t, const double* state, const double* attrs,
                          const double* inputs) const {
  double stack[64];
  double* heap = nullptr;
  double* s = stack;
  std::unique_ptr<double[]> owner;
  if (stack_depth_ > 64) {
    owner = std::make_unique<double[]>(static_cast<size_t>(stack_depth_));
    heap = owner.get();
    s = heap;
  }
  int top = 0;
  for (const Op& op : ops_) {
    switch (op.code) {
      case OpCode::PushConst: s[top++] = op.k; break;
      case OpCode::PushTime: s[top++] = t; break;
      case OpCode::PushState: s[top++] = state[op.slot]; break;
      case OpCode::PushAttr: s[top++] = attrs[op.slot]; break;
      case OpCode::PushInput: s[top++] = inputs[op.slot]; break;
      case OpCode::Add: top--; s[top - 1] += s[top]; break;
      case OpCode::Sub: top--; s[top - 1] -= s[top]; break;
      case OpCode::Mul: top--; s[top - 1] *= s[top]; break;
      case OpCode::Div:
        top--;
        if (s[top] == 0.0)
          throw EvalError(EvalError::Kind::DivByZero, "division by zero");
        s[top - 1] /= s[top];
        break;
      case OpCode::Neg: s[top - 1] = -s[top - 1]; break;
      case OpCode::Exp: {
        double r = std::exp(s[top - 1]);
        if (std::isinf(r))
          throw EvalError(EvalError::Kind::ExpOverflow, "exp overflow");
        s[top - 1] = r;
        break;
      }
      case OpCode::Min: top--; s[top - 1] = std::min(s[top - 1], s[top]); break;
      case OpCode::Max: top--; s[top - 1] = std::max(s[top - 1], s[top]); break;
      case OpCode::IndLt: top--; s[top - 1] = s[top - 1] < s[top] ? 1.0 : 0.0; break;
      case OpCode::IndLe: top--; s[top - 1] = s[top - 1] <= s[top] ? 1.0 : 0.0; break;
      case OpCode::IndEq: top--; s[top - 1] = s[top - 1] == s[top] ? 1.0 : 0.0; break;
      case OpCode::IndGe: top--; s[top - 1] = s[top - 1] >= s[top] ? 1.0 : 0.0; break;
      case OpCode::IndGt: top--; s[top - 1] = s[top - 1] > s[top] ? 1.0 : 0.0; break;
    }
  }
  double r = s[0];
  if (!std::isfinite(r))
    throw EvalError(EvalError::Kind::NonFinite, "non-finite expression value");
  return r;
}

}  // namespace dynograph
