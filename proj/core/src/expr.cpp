#include "finslerlab/expr.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <set>
#include <unordered_map>

namespace finsler {

namespace {

std::size_t mix(std::size_t h, std::size_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::size_t hash_symbol(const Symbol& s) {
  std::size_t h = std::hash<int>{}(static_cast<int>(s.kind));
  h = mix(h, std::hash<int>{}(s.index));
  return mix(h, std::hash<std::string>{}(s.name));
}

bool same_node(const Node& a, const Node& b) {
  return a.op == b.op && std::bit_cast<std::uint64_t>(a.value) == std::bit_cast<std::uint64_t>(b.value) &&
         a.symbol == b.symbol && a.lhs.get() == b.lhs.get() && a.rhs.get() == b.rhs.get();
}

// Process-wide hash-consing table. Entries are weak so unused nodes are
// released; expired entries are swept when the table doubles.
class InternTable {
 public:
  NodePtr intern(Node&& n) {
    std::lock_guard lock(mu_);
    auto [first, last] = map_.equal_range(n.hash);
    for (auto it = first; it != last; ++it) {
      if (auto live = it->second.lock(); live && same_node(*live, n)) return live;
    }
    auto made = std::make_shared<const Node>(std::move(n));
    map_.emplace(made->hash, made);
    if (map_.size() > sweep_at_) {
      std::erase_if(map_, [](const auto& kv) { return kv.second.expired(); });
      sweep_at_ = std::max<std::size_t>(1u << 16, 2 * map_.size());
    }
    return made;
  }

 private:
  std::mutex mu_;
  std::unordered_multimap<std::size_t, std::weak_ptr<const Node>> map_;
  std::size_t sweep_at_ = 1u << 16;
};

InternTable& table() {
  static auto* t = new InternTable();  // never destroyed; nodes may outlive static teardown
  return *t;
}

NodePtr intern(Op op, double value, Symbol symbol, NodePtr lhs, NodePtr rhs) {
  Node n;
  n.op = op;
  n.value = value;
  n.symbol = std::move(symbol);
  n.lhs = std::move(lhs);
  n.rhs = std::move(rhs);
  std::size_t h = std::hash<int>{}(static_cast<int>(op));
  h = mix(h, std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(value)));
  if (op == Op::Variable) h = mix(h, hash_symbol(n.symbol));
  if (n.lhs) h = mix(h, n.lhs->hash);
  if (n.rhs) h = mix(h, n.rhs->hash);
  n.hash = h;
  return table().intern(std::move(n));
}

bool is_integer(double e) { return std::isfinite(e) && e == std::floor(e); }

const char* op_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

// Applies one operation to numeric arguments. Returns false on a domain
// violation and writes the reason.
bool apply(Op op, double a, double b, double& out, const char*& reason) {
  switch (op) {
    case Op::Add: out = a + b; break;
    case Op::Sub: out = a - b; break;
    case Op::Mul: out = a * b; break;
    case Op::Div:
      if (b == 0.0) {
        reason = "division by zero";
        return false;
      }
      out = a / b;
      break;
    case Op::Pow:
      if (!is_integer(b) && a <= 0.0) {
        reason = "non-integer power of a non-positive base";
        return false;
      }
      if (a == 0.0 && b < 0.0) {
        reason = "division by zero";
        return false;
      }
      out = std::pow(a, b);
      break;
    case Op::Neg: out = -a; break;
    case Op::Sin: out = std::sin(a); break;
    case Op::Cos: out = std::cos(a); break;
    case Op::Tan: out = std::tan(a); break;
    case Op::Exp: out = std::exp(a); break;
    case Op::Log:
      if (a <= 0.0) {
        reason = "log of a non-positive argument";
        return false;
      }
      out = std::log(a);
      break;
    case Op::Sqrt:
      if (a < 0.0) {
        reason = "sqrt of a negative argument";
        return false;
      }
      out = std::sqrt(a);
      break;
    default: out = 0.0; break;
  }
  if (!std::isfinite(out)) {
    reason = "non-finite result";
    return false;
  }
  return true;
}

}  // namespace

std::string Symbol::to_string() const {
  switch (kind) {
    case SymbolKind::Position: return "x" + std::to_string(index + 1);
    case SymbolKind::Fiber: return "v" + std::to_string(index + 1);
    case SymbolKind::FlatSlot: return "a" + std::to_string(index + 1);
    case SymbolKind::FactorSlot: return "s" + std::to_string(index + 1);
    case SymbolKind::Parameter: return name;
  }
  return name;
}

// ---------------------------------------------------------------------------
// Construction with constant folding

Expression::Expression() : Expression(constant(0.0)) {}
Expression::Expression(double c) : Expression(constant(c)) {}

Expression Expression::constant(double c) {
  if (c == 0.0) c = 0.0;  // fold -0 into +0
  return Expression(intern(Op::Constant, c, {}, nullptr, nullptr));
}

Expression Expression::variable(Symbol s) {
  return Expression(intern(Op::Variable, 0.0, std::move(s), nullptr, nullptr));
}

Expression make_node(Op op, const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) {
    double out = 0.0;
    const char* reason = nullptr;
    if (apply(op, a.constant_value(), b.constant_value(), out, reason)) return Expression::constant(out);
  }
  switch (op) {
    case Op::Add:
      if (a.is_constant(0.0)) return b;
      if (b.is_constant(0.0)) return a;
      if (b.op() == Op::Neg) return make_node(Op::Sub, a, Expression(b.node().lhs));
      break;
    case Op::Sub:
      if (b.is_constant(0.0)) return a;
      if (a.is_constant(0.0)) return make_node(Op::Neg, b);
      break;
    case Op::Mul:
      if (a.is_constant(0.0) || b.is_constant(0.0)) return Expression::constant(0.0);
      if (a.is_constant(1.0)) return b;
      if (b.is_constant(1.0)) return a;
      if (a.is_constant(-1.0)) return make_node(Op::Neg, b);
      if (b.is_constant(-1.0)) return make_node(Op::Neg, a);
      break;
    case Op::Div:
      if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expression::constant(0.0);
      if (b.is_constant(1.0)) return a;
      break;
    case Op::Pow:
      if (b.is_constant(1.0)) return a;
      if (b.is_constant(0.0)) return Expression::constant(1.0);
      break;
    default: break;
  }
  return Expression(intern(op, 0.0, {}, a.ptr(), b.ptr()));
}

Expression make_node(Op op, const Expression& a) {
  if (a.is_constant()) {
    double out = 0.0;
    const char* reason = nullptr;
    if (apply(op, a.constant_value(), 0.0, out, reason)) return Expression::constant(out);
  }
  if (op == Op::Neg && a.op() == Op::Neg) return Expression(a.node().lhs);
  return Expression(intern(op, 0.0, {}, a.ptr(), nullptr));
}

Expression operator+(const Expression& a, const Expression& b) { return make_node(Op::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return make_node(Op::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return make_node(Op::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return make_node(Op::Div, a, b); }
Expression operator-(const Expression& a) { return make_node(Op::Neg, a); }

Expression pow(const Expression& base, const Expression& exponent) { return make_node(Op::Pow, base, exponent); }
Expression sin(const Expression& a) { return make_node(Op::Sin, a); }
Expression cos(const Expression& a) { return make_node(Op::Cos, a); }
Expression tan(const Expression& a) { return make_node(Op::Tan, a); }
Expression exp(const Expression& a) { return make_node(Op::Exp, a); }
Expression log(const Expression& a) { return make_node(Op::Log, a); }
Expression sqrt(const Expression& a) { return make_node(Op::Sqrt, a); }

std::size_t Expression::dag_size() const {
  std::set<const Node*> seen;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!n || !seen.insert(n).second) continue;
    stack.push_back(n->lhs.get());
    stack.push_back(n->rhs.get());
  }
  return seen.size();
}

std::vector<Symbol> Expression::free_symbols() const {
  std::set<const Node*> seen;
  std::set<Symbol> found;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!n || !seen.insert(n).second) continue;
    if (n->op == Op::Variable) found.insert(n->symbol);
    stack.push_back(n->lhs.get());
    stack.push_back(n->rhs.get());
  }
  return {found.begin(), found.end()};
}

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Constant: return n.value < 0.0 ? 3 : 5;
    default: return 5;
  }
}

void format_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void print(const Node& n, std::string& out);

void print_child(const Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, out);
    out += ')';
  } else {
    print(child, out);
  }
}

void print(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::Constant: format_number(out, n.value); return;
    case Op::Variable: out += n.symbol.to_string(); return;
    case Op::Add:
    case Op::Sub:
      print_child(*n.lhs, 1, out);
      out += n.op == Op::Add ? " + " : " - ";
      print_child(*n.rhs, 2, out);
      return;
    case Op::Mul:
    case Op::Div:
      print_child(*n.lhs, 2, out);
      out += n.op == Op::Mul ? "*" : "/";
      print_child(*n.rhs, 3, out);
      return;
    case Op::Neg:
      out += '-';
      print_child(*n.lhs, 3, out);
      return;
    case Op::Pow:
      print_child(*n.lhs, 4, out);
      out += '^';
      print_child(*n.rhs, 5, out);
      return;
    default:
      out += op_name(n.op);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
  }
}

}  // namespace

std::string Expression::to_string() const {
  std::string out;
  print(*node_, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

ParseError::ParseError(ParseDiagnostic d)
    : std::runtime_error("parse error at offset " + std::to_string(d.offset) + " near '" + d.token +
                         "': " + d.message),
      diag_(std::move(d)) {}

namespace {

struct Token {
  enum Kind { Number, Ident, Punct, End } kind = End;
  std::string text;
  double number = 0.0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : src_(s) { advance(); }

  const Token& peek() const { return current_; }
  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    current_ = Token{};
    current_.offset = pos_;
    if (pos_ >= src_.size()) return;
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) ++end;
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t exp_end = end + 1;
        if (exp_end < src_.size() && (src_[exp_end] == '+' || src_[exp_end] == '-')) ++exp_end;
        if (exp_end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[exp_end]))) {
          while (exp_end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[exp_end]))) ++exp_end;
          end = exp_end;
        }
      }
      current_.kind = Token::Number;
      current_.text = std::string(src_.substr(pos_, end - pos_));
      auto res = std::from_chars(src_.data() + pos_, src_.data() + end, current_.number);
      if (res.ec != std::errc() || res.ptr != src_.data() + end) {
        throw ParseError({pos_, current_.text, "malformed number"});
      }
      pos_ = end;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) ++end;
      current_.kind = Token::Ident;
      current_.text = std::string(src_.substr(pos_, end - pos_));
      pos_ = end;
      return;
    }
    if (std::string_view("+-*/^()").find(c) != std::string_view::npos) {
      current_.kind = Token::Punct;
      current_.text = std::string(1, c);
      ++pos_;
      return;
    }
    throw ParseError({pos_, std::string(1, c), "unexpected character"});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token current_;
};

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& opts) : lex_(text), opts_(opts) {}

  Expression parse() {
    Expression e = sum();
    if (lex_.peek().kind != Token::End) {
      const Token& t = lex_.peek();
      throw ParseError({t.offset, t.text, "unexpected token"});
    }
    return e;
  }

 private:
  bool accept(const char* p) {
    if (lex_.peek().kind == Token::Punct && lex_.peek().text == p) {
      lex_.take();
      return true;
    }
    return false;
  }

  void expect(const char* p) {
    if (!accept(p)) {
      const Token& t = lex_.peek();
      throw ParseError({t.offset, t.kind == Token::End ? "<end>" : t.text, std::string("expected '") + p + "'"});
    }
  }

  Expression sum() {
    Expression e = product();
    for (;;) {
      if (accept("+")) {
        e = e + product();
      } else if (accept("-")) {
        e = e - product();
      } else {
        return e;
      }
    }
  }

  Expression product() {
    Expression e = unary();
    for (;;) {
      if (accept("*")) {
        e = e * unary();
      } else if (accept("/")) {
        e = e / unary();
      } else {
        return e;
      }
    }
  }

  Expression unary() {
    if (accept("-")) return -unary();
    return power();
  }

  Expression power() {
    Expression e = primary();
    while (accept("^")) {
      if (accept("-")) {
        e = pow(e, -primary());
      } else {
        e = pow(e, primary());
      }
    }
    return e;
  }

  Expression primary() {
    Token t = lex_.take();
    switch (t.kind) {
      case Token::Number: return Expression::constant(t.number);
      case Token::Punct:
        if (t.text == "(") {
          Expression e = sum();
          expect(")");
          return e;
        }
        throw ParseError({t.offset, t.text, "expected an operand"});
      case Token::End: throw ParseError({t.offset, "<end>", "unexpected end of input"});
      case Token::Ident: return identifier(t);
    }
    throw ParseError({t.offset, t.text, "unexpected token"});
  }

  Expression identifier(const Token& t) {
    static const std::pair<const char*, Expression (*)(const Expression&)> functions[] = {
        {"sin", &finsler::sin}, {"cos", &finsler::cos}, {"tan", &finsler::tan},
        {"exp", &finsler::exp}, {"log", &finsler::log}, {"sqrt", &finsler::sqrt},
    };
    for (const auto& [name, fn] : functions) {
      if (t.text == name) {
        expect("(");
        Expression arg = sum();
        expect(")");
        return fn(arg);
      }
    }
    if (t.text == "abs") throw ParseError({t.offset, t.text, "abs is not smooth and is not supported"});
    if (std::find(opts_.parameters.begin(), opts_.parameters.end(), t.text) != opts_.parameters.end()) {
      return Expression::variable(Symbol::parameter(t.text));
    }
    if (t.text == "pi") return Expression::constant(std::numbers::pi);
    if (t.text.size() >= 2 && std::all_of(t.text.begin() + 1, t.text.end(), [](char c) {
          return std::isdigit(static_cast<unsigned char>(c));
        })) {
      const int idx = std::stoi(t.text.substr(1));
      auto indexed = [&](int limit, Symbol (*make)(int)) {
        if (idx < 1 || idx > limit) {
          throw ParseError({t.offset, t.text, "variable index out of range (limit " + std::to_string(limit) + ")"});
        }
        return Expression::variable(make(idx - 1));
      };
      switch (t.text[0]) {
        case 'x': return indexed(opts_.dim, &Symbol::position);
        case 'v': return indexed(opts_.dim, &Symbol::fiber);
        case 'a':
          if (opts_.flat_slots > 0 || opts_.factor_slots > 0) return indexed(opts_.flat_slots, &Symbol::flat_slot);
          break;
        case 's':
          if (opts_.flat_slots > 0 || opts_.factor_slots > 0) return indexed(opts_.factor_slots, &Symbol::factor_slot);
          break;
        default: break;
      }
    }
    throw ParseError({t.offset, t.text, "unknown identifier"});
  }

  Lexer lex_;
  const ParseOptions& opts_;
};

}  // namespace

Expression parse_expression(std::string_view text, int dim) {
  ParseOptions opts;
  opts.dim = dim;
  return parse_expression(text, opts);
}

Expression parse_expression(std::string_view text, const ParseOptions& options) {
  bool blank = std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (blank) throw ParseError({0, "", "empty expression"});
  Parser parser(text, options);
  return parser.parse();
}

// ---------------------------------------------------------------------------
// Differentiation and substitution

namespace {

class Differentiator {
 public:
  explicit Differentiator(const Symbol& var) : var_(var) {}

  Expression d(const Expression& e) {
    const Node* key = e.ptr().get();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Expression r = compute(e);
    memo_.emplace(key, r);
    return r;
  }

 private:
  Expression compute(const Expression& e) {
    const Node& n = e.node();
    switch (n.op) {
      case Op::Constant: return 0.0;
      case Op::Variable: return n.symbol == var_ ? 1.0 : 0.0;
      default: break;
    }
    const Expression a = e.lhs();
    const Expression da = d(a);
    switch (n.op) {
      case Op::Add: return da + d(e.rhs());
      case Op::Sub: return da - d(e.rhs());
      case Op::Mul: {
        const Expression b = e.rhs();
        return da * b + a * d(b);
      }
      case Op::Div: {
        const Expression b = e.rhs();
        const Expression db = d(b);
        return da / b - a * db / pow(b, 2.0);
      }
      case Op::Pow: {
        const Expression b = e.rhs();
        if (b.is_constant()) return b * pow(a, b.constant_value() - 1.0) * da;
        const Expression db = d(b);
        return e * (db * log(a) + b * da / a);
      }
      case Op::Neg: return -da;
      case Op::Sin: return cos(a) * da;
      case Op::Cos: return -(sin(a) * da);
      case Op::Tan: return da / pow(cos(a), 2.0);
      case Op::Exp: return e * da;
      case Op::Log: return da / a;
      case Op::Sqrt: return da / (2.0 * e);
      default: return 0.0;
    }
  }

  Symbol var_;
  std::unordered_map<const Node*, Expression> memo_;
};

class Substituter {
 public:
  Substituter(const std::map<Symbol, Expression>& repl, const std::map<Symbol, Expression>& squared)
      : repl_(repl), squared_(squared) {}

  Expression s(const Expression& e) {
    const Node* key = e.ptr().get();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Expression r = compute(e);
    memo_.emplace(key, r);
    return r;
  }

 private:
  Expression compute(const Expression& e) {
    const Node& n = e.node();
    switch (n.op) {
      case Op::Constant: return e;
      case Op::Variable: {
        auto it = repl_.find(n.symbol);
        return it == repl_.end() ? e : it->second;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        return make_node(n.op, s(e.lhs()), s(e.rhs()));
      case Op::Pow: {
        const Expression base = e.lhs();
        const Expression expo = e.rhs();
        if (base.op() == Op::Variable && expo.is_constant()) {
          const double k = expo.constant_value() / 2.0;
          auto it = squared_.find(base.node().symbol);
          if (it != squared_.end() && k > 0.0 && is_integer(k)) return pow(it->second, k);
        }
        return pow(s(base), s(expo));
      }
      default: return make_node(n.op, s(e.lhs()));
    }
  }

  const std::map<Symbol, Expression>& repl_;
  const std::map<Symbol, Expression>& squared_;
  std::unordered_map<const Node*, Expression> memo_;
};

}  // namespace

Expression differentiate(const Expression& e, const Symbol& var) {
  Differentiator diff(var);
  return diff.d(e);
}

Expression substitute(const Expression& e, const std::map<Symbol, Expression>& replacement,
                      const std::map<Symbol, Expression>& squared) {
  Substituter sub(replacement, squared);
  return sub.s(e);
}

// ---------------------------------------------------------------------------
// Evaluation

VariableLayout VariableLayout::chart(int n) {
  VariableLayout layout;
  for (int i = 0; i < n; ++i) layout.add(Symbol::position(i));
  for (int i = 0; i < n; ++i) layout.add(Symbol::fiber(i));
  return layout;
}

int VariableLayout::add(const Symbol& s) {
  if (auto it = slots_.find(s); it != slots_.end()) return it->second;
  const int slot = static_cast<int>(symbols_.size());
  symbols_.push_back(s);
  slots_.emplace(s, slot);
  return slot;
}

int VariableLayout::slot(const Symbol& s) const {
  auto it = slots_.find(s);
  return it == slots_.end() ? -1 : it->second;
}

Program::Program(std::span<const Expression> outputs, const VariableLayout& layout)
    : input_count_(layout.size()) {
  std::unordered_map<const Node*, std::int32_t> index;
  // Iterative post-order walk; expression DAGs from repeated
  // differentiation can be deep.
  struct Frame {
    const Node* node;
    bool expanded;
  };
  for (const Expression& out : outputs) {
    roots_.push_back(out.ptr());
    std::vector<Frame> stack{{out.ptr().get(), false}};
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      if (index.count(f.node)) continue;
      const Node& n = *f.node;
      if (!f.expanded && (n.lhs || n.rhs)) {
        stack.push_back({f.node, true});
        if (n.rhs && !index.count(n.rhs.get())) stack.push_back({n.rhs.get(), false});
        if (n.lhs && !index.count(n.lhs.get())) stack.push_back({n.lhs.get(), false});
        continue;
      }
      Instr ins{n.op, -1, -1, n.value, f.node};
      if (n.op == Op::Variable) {
        ins.a = layout.slot(n.symbol);
        if (ins.a < 0) throw EvalError("unbound variable " + n.symbol.to_string());
      }
      if (n.lhs) ins.a = index.at(n.lhs.get());
      if (n.rhs) ins.b = index.at(n.rhs.get());
      index.emplace(f.node, static_cast<std::int32_t>(tape_.size()));
      tape_.push_back(ins);
    }
    outputs_.push_back(index.at(out.ptr().get()));
  }
}

void Program::run(std::span<const double> inputs, std::span<double> outputs) const {
  if (inputs.size() < input_count_) throw EvalError("too few inputs for compiled program");
  if (outputs.size() < outputs_.size()) throw EvalError("output buffer too small");
  std::vector<double> reg(tape_.size());
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& ins = tape_[i];
    switch (ins.op) {
      case Op::Constant: reg[i] = ins.value; continue;
      case Op::Variable: reg[i] = inputs[static_cast<std::size_t>(ins.a)]; continue;
      case Op::Add: reg[i] = reg[ins.a] + reg[ins.b]; continue;
      case Op::Sub: reg[i] = reg[ins.a] - reg[ins.b]; continue;
      case Op::Mul: reg[i] = reg[ins.a] * reg[ins.b]; continue;
      case Op::Neg: reg[i] = -reg[ins.a]; continue;
      default: break;
    }
    const char* reason = nullptr;
    const double b = ins.b >= 0 ? reg[ins.b] : 0.0;
    if (!apply(ins.op, reg[ins.a], b, reg[i], reason)) {
      std::string text;
      print(*ins.node, text);
      if (text.size() > 160) text = text.substr(0, 157) + "...";
      throw EvalError(std::string("domain error: ") + reason + " in " + text);
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) outputs[k] = reg[outputs_[k]];
}

std::vector<double> Program::run(std::span<const double> inputs) const {
  std::vector<double> out(outputs_.size());
  run(inputs, out);
  return out;
}

double evaluate(const Expression& e, const Bindings& bindings) {
  VariableLayout layout;
  std::vector<double> inputs;
  for (const auto& [sym, value] : bindings) {
    layout.add(sym);
    inputs.push_back(value);
  }
  const Expression outs[] = {e};
  Program prog(outs, layout);
  return prog.run(inputs)[0];
}

}  // namespace finsler
