#pragma once

// Scalar expressions over chart coordinates (x1..xn), fiber coordinates
// (v1..vn), product-norm slots (a1..ak, s1..sm) and named parameters.
//
// Nodes are hash-consed: two structurally equal expressions share one node,
// so equality is pointer equality and repeated differentiation stays a DAG.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace finsler {

enum class SymbolKind : std::uint8_t { Position, Fiber, FlatSlot, FactorSlot, Parameter };

/// A free variable. `index` is zero-based; `name` is only used by parameters.
struct Symbol {
  SymbolKind kind = SymbolKind::Position;
  int index = 0;
  std::string name;

  static Symbol position(int i) { return {SymbolKind::Position, i, {}}; }
  static Symbol fiber(int i) { return {SymbolKind::Fiber, i, {}}; }
  static Symbol flat_slot(int i) { return {SymbolKind::FlatSlot, i, {}}; }
  static Symbol factor_slot(int i) { return {SymbolKind::FactorSlot, i, {}}; }
  static Symbol parameter(std::string n) { return {SymbolKind::Parameter, 0, std::move(n)}; }

  std::string to_string() const;

  friend bool operator==(const Symbol&, const Symbol&) = default;
  friend auto operator<=>(const Symbol&, const Symbol&) = default;
};

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Sqrt,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Constant;
  double value = 0.0;
  Symbol symbol;
  NodePtr lhs;
  NodePtr rhs;
  std::size_t hash = 0;
};

class Expression {
 public:
  Expression();  // the constant 0
  Expression(double c);  // NOLINT(google-explicit-constructor)

  static Expression constant(double c);
  static Expression variable(Symbol s);
  static Expression x(int i) { return variable(Symbol::position(i)); }
  static Expression v(int i) { return variable(Symbol::fiber(i)); }

  /// Wraps an already interned node.
  static Expression wrap(NodePtr n) { return Expression(std::move(n)); }

  const Node& node() const { return *node_; }
  Expression lhs() const { return Expression(node_->lhs); }
  Expression rhs() const { return Expression(node_->rhs); }
  const NodePtr& ptr() const { return node_; }
  Op op() const { return node_->op; }

  bool is_constant() const { return node_->op == Op::Constant; }
  bool is_constant(double c) const { return is_constant() && node_->value == c; }
  double constant_value() const { return node_->value; }

  /// Number of distinct nodes reachable from this expression.
  std::size_t dag_size() const;

  std::vector<Symbol> free_symbols() const;
  std::string to_string() const;

  friend bool operator==(const Expression& a, const Expression& b) { return a.node_ == b.node_; }

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);

  Expression& operator+=(const Expression& b) { return *this = *this + b; }
  Expression& operator-=(const Expression& b) { return *this = *this - b; }
  Expression& operator*=(const Expression& b) { return *this = *this * b; }

 private:
  explicit Expression(NodePtr n) : node_(std::move(n)) {}
  friend Expression make_node(Op, const Expression&, const Expression&);
  friend Expression make_node(Op, const Expression&);

  NodePtr node_;
};

Expression pow(const Expression& base, const Expression& exponent);
Expression sin(const Expression& a);
Expression cos(const Expression& a);
Expression tan(const Expression& a);
Expression exp(const Expression& a);
Expression log(const Expression& a);
Expression sqrt(const Expression& a);

struct ParseDiagnostic {
  std::size_t offset = 0;
  std::string token;
  std::string message;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(ParseDiagnostic d);
  const ParseDiagnostic& diagnostic() const { return diag_; }

 private:
  ParseDiagnostic diag_;
};

/// Raised by evaluation for unbound variables and domain violations.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseOptions {
  int dim = 0;
  int flat_slots = 0;    // a1..ak
  int factor_slots = 0;  // s1..sm
  std::vector<std::string> parameters;
};

/// Standard infix grammar. Precedence: ^ > unary minus > * / > + -,
/// all binary operators left-associative; `pi` is a builtin constant.
Expression parse_expression(std::string_view text, int dim);
Expression parse_expression(std::string_view text, const ParseOptions& options);

Expression differentiate(const Expression& e, const Symbol& var);

/// Replaces free symbols. Powers `s^(2k)` of a mapped symbol whose
/// replacement is given in `squared` become `squared^k`, which keeps
/// compositions like G(a, sqrt(Q)) smooth where Q vanishes.
Expression substitute(const Expression& e, const std::map<Symbol, Expression>& replacement,
                      const std::map<Symbol, Expression>& squared = {});

using Bindings = std::map<Symbol, double>;

double evaluate(const Expression& e, const Bindings& bindings);

/// Assignment of symbols to input slots of a compiled Program.
class VariableLayout {
 public:
  VariableLayout() = default;
  /// x1..xn at slots [0, n), v1..vn at slots [n, 2n).
  static VariableLayout chart(int n);

  int add(const Symbol& s);
  int slot(const Symbol& s) const;  // -1 when absent
  std::size_t size() const { return symbols_.size(); }
  const std::vector<Symbol>& symbols() const { return symbols_; }

 private:
  std::vector<Symbol> symbols_;
  std::map<Symbol, int> slots_;
};

/// Expressions flattened into a single tape with common subexpressions
/// evaluated once. Immutable; `run` is safe to call concurrently.
class Program {
 public:
  Program() = default;
  Program(std::span<const Expression> outputs, const VariableLayout& layout);

  void run(std::span<const double> inputs, std::span<double> outputs) const;
  std::vector<double> run(std::span<const double> inputs) const;

  std::size_t tape_size() const { return tape_.size(); }
  std::size_t output_count() const { return outputs_.size(); }
  std::size_t input_count() const { return input_count_; }

 private:
  struct Instr {
    Op op;
    std::int32_t a;
    std::int32_t b;
    double value;
    const Node* node;
  };
  std::vector<Instr> tape_;
  std::vector<std::int32_t> outputs_;
  std::vector<NodePtr> roots_;
  std::size_t input_count_ = 0;
};

}  // namespace finsler
