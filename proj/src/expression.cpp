#include "hydro/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace hydro {

struct Expression::Node {
  enum Kind { num, var, add, sub, mul, dv, pw, neg, fsin, fcos, fexp, fsqrt } kind;
  double value = 0.0;
  std::shared_ptr<const Node> a, b;

  double eval(double u) const {
    switch (kind) {
      case num: return value;
      case var: return u;
      case add: return a->eval(u) + b->eval(u);
      case sub: return a->eval(u) - b->eval(u);
      case mul: return a->eval(u) * b->eval(u);
      case dv: return a->eval(u) / b->eval(u);
      case pw: return std::pow(a->eval(u), b->eval(u));
      case neg: return -a->eval(u);
      case fsin: return std::sin(a->eval(u));
      case fcos: return std::cos(a->eval(u));
      case fexp: return std::exp(a->eval(u));
      case fsqrt: return std::sqrt(a->eval(u));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

NodePtr make(Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr, double v = 0.0) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  n->value = v;
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ExpressionError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(const std::string& tok) {
    skip();
    if (s_.compare(pos_, tok.size(), tok) == 0) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat("+")) {
        lhs = make(Node::add, lhs, term());
      } else if (eat("-")) {
        lhs = make(Node::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (eat("*") || eat("\xC2\xB7")) {
        lhs = make(Node::mul, lhs, unary());
      } else if (eat("/")) {
        lhs = make(Node::dv, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (eat("-")) return make(Node::neg, unary());
    if (eat("+")) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (eat("^")) return make(Node::pw, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(start, &end);
      if (end == start) fail("bad number");
      pos_ += static_cast<std::size_t>(end - start);
      return make(Node::num, nullptr, nullptr, v);
    }
    if (eat("(")) {
      NodePtr e = expr();
      if (!eat(")")) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t p = pos_;
      while (p < s_.size() && std::isalpha(static_cast<unsigned char>(s_[p]))) ++p;
      const std::string name = s_.substr(pos_, p - pos_);
      pos_ = p;
      if (name == "u") return make(Node::var);
      if (name == "pi") return make(Node::num, nullptr, nullptr, std::numbers::pi);
      if (name == "e") return make(Node::num, nullptr, nullptr, std::numbers::e);
      Node::Kind k;
      if (name == "sin") {
        k = Node::fsin;
      } else if (name == "cos") {
        k = Node::fcos;
      } else if (name == "exp") {
        k = Node::fexp;
      } else if (name == "sqrt") {
        k = Node::fsqrt;
      } else {
        fail("unknown identifier '" + name + "'");
      }
      if (!eat("(")) fail("expected '(' after " + name);
      NodePtr arg = expr();
      if (!eat(")")) fail("expected ')'");
      return make(k, arg);
    }
    fail("unexpected character");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  return e;
}

double Expression::operator()(double u) const { return root_->eval(u); }

}  // namespace hydro
