#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace hydro {

class ExpressionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Arithmetic in one variable u: numbers, u, pi, e, + - * / ^ (also the
// middle dot U+00B7 for *), parentheses, sin cos exp sqrt.
class Expression {
 public:
  static Expression parse(const std::string& text);
  double operator()(double u) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace hydro
