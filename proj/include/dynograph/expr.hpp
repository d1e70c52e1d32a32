#ifndef DYNOGRAPH_EXPR_HPP
#define DYNOGRAPH_EXPR_HPP

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dynograph {

enum class Cmp { Lt, Le, Eq, Ge, Gt };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Drift / intensity / diffusion-coefficient expression tree. Nodes are
// immutable after construction and freely shared between systems.
// Comp(c) denotes the left limit X_{c,t-} of component c when evaluated
// inside a drift at time t.
struct Expr {
  enum class Kind {
    Const,
    Time,
    Comp,
    Attr,
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Min,
    Max,
    Ind
  };

  Kind kind = Kind::Const;
  double value = 0.0;  // Const
  std::string name;    // Comp / Attr / Input
  Cmp cmp = Cmp::Lt;   // Ind
  ExprPtr lhs, rhs;    // Neg and Exp use lhs only
};

bool operator==(const Expr& a, const Expr& b);
inline bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }
bool expr_equal(const ExprPtr& a, const ExprPtr& b);

// Expression builders.
namespace eb {
ExprPtr constant(double v);
ExprPtr time();
ExprPtr comp(std::string name);
ExprPtr attr(std::string name);
ExprPtr input(std::string name);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr exp(ExprPtr a);
ExprPtr min(ExprPtr a, ExprPtr b);
ExprPtr max(ExprPtr a, ExprPtr b);
ExprPtr ind(Cmp cmp, ExprPtr a, ExprPtr b);
}  // namespace eb

// Name references found in a tree, grouped by node kind.
struct ExprRefs {
  std::set<std::string> comps;
  std::set<std::string> attrs;
  std::set<std::string> inputs;
};
ExprRefs collect_refs(const ExprPtr& e);
bool references_time(const ExprPtr& e);

struct EvalError : std::runtime_error {
  enum class Kind { DivByZero, ExpOverflow, NonFinite };
  Kind kind;
  EvalError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

struct UnknownNameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Slot assignment used to bind name references before evaluation.
struct NameIndex {
  std::unordered_map<std::string, int> comps;
  std::unordered_map<std::string, int> attrs;
  std::unordered_map<std::string, int> inputs;
};

// Expression compiled to a postfix program over value slots; evaluation is
// total on finite inputs: division by zero, exp overflow and any non-finite
// intermediate raise EvalError instead of propagating NaN/inf.
class CompiledExpr {
 public:
  CompiledExpr() = default;

  // Throws UnknownNameError if the tree references an unbound name.
  static CompiledExpr compile(const ExprPtr& e, const NameIndex& names);

  double eval(double t, const double* state, const double* attrs,
              const double* inputs) const;

  bool empty() const { return ops_.empty(); }

 private:
  enum class OpCode {
    PushConst,
    PushTime,
    PushState,
    PushAttr,
    PushInput,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Min,
    Max,
    IndLt,
    IndLe,
    IndEq,
    IndGe,
    IndGt
  };
  struct Op {
    OpCode code;
    double k = 0.0;
    int slot = 0;
  };
  std::vector<Op> ops_;
  int stack_depth_ = 0;
};

}  // namespace dynograph

#endif  // DYNOGRAPH_EXPR_HPP
