#pragma once

#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmce {

/// Whitelisted closed-form expressions for boundary data: sin, cos, ln, exp,
/// abs, the four arithmetic operators, numeric constants and pi, plus the
/// chart coordinate names. Nothing else parses.
class Expression {
 public:
  static Expression parse(const std::string& text,
                          const std::vector<std::string>& variables) {
    Expression e;
    e.vars_ = variables;
    Parser p{text, 0, &e};
    e.root_ = p.parse_sum();
    p.skip_ws();
    if (p.pos != text.size())
      throw std::invalid_argument("expression: trailing input at '" +
                                  text.substr(p.pos) + "'");
    return e;
  }

  double eval(const std::vector<double>& values) const {
    return eval_node(root_, values);
  }

 private:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Ln, Exp, Abs };
  struct Node {
    Op op;
    double value = 0;
    int var = -1;
    int a = -1, b = -1;
  };
  std::vector<Node> nodes_;
  std::vector<std::string> vars_;
  int root_ = -1;

  int add(Node n) {
    nodes_.push_back(n);
    return int(nodes_.size()) - 1;
  }

  double eval_node(int i, const std::vector<double>& v) const {
    const Node& n = nodes_[std::size_t(i)];
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return v[std::size_t(n.var)];
      case Op::Add: return eval_node(n.a, v) + eval_node(n.b, v);
      case Op::Sub: return eval_node(n.a, v) - eval_node(n.b, v);
      case Op::Mul: return eval_node(n.a, v) * eval_node(n.b, v);
      case Op::Div: return eval_node(n.a, v) / eval_node(n.b, v);
      case Op::Neg: return -eval_node(n.a, v);
      case Op::Sin: return std::sin(eval_node(n.a, v));
      case Op::Cos: return std::cos(eval_node(n.a, v));
      case Op::Ln: return std::log(eval_node(n.a, v));
      case Op::Exp: return std::exp(eval_node(n.a, v));
      case Op::Abs: return std::abs(eval_node(n.a, v));
    }
    return 0;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;
    Expression* e;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    int parse_sum() {
      int a = parse_term();
      for (;;) {
        if (eat('+')) a = e->add({Op::Add, 0, -1, a, parse_term()});
        else if (eat('-')) a = e->add({Op::Sub, 0, -1, a, parse_term()});
        else return a;
      }
    }
    int parse_term() {
      int a = parse_unary();
      for (;;) {
        if (eat('*')) a = e->add({Op::Mul, 0, -1, a, parse_unary()});
        else if (eat('/')) a = e->add({Op::Div, 0, -1, a, parse_unary()});
        else return a;
      }
    }
    int parse_unary() {
      if (eat('-')) return e->add({Op::Neg, 0, -1, parse_unary(), -1});
      return parse_primary();
    }
    int parse_primary() {
      skip_ws();
      if (pos >= s.size()) throw std::invalid_argument("expression: unexpected end");
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        const double v = std::stod(s.substr(pos), &used);
        pos += used;
        return e->add({Op::Const, v, -1, -1, -1});
      }
      if (c == '(') {
        ++pos;
        const int a = parse_sum();
        if (!eat(')')) throw std::invalid_argument("expression: missing ')'");
        return a;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t end = pos;
        while (end < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_'))
          ++end;
        const std::string name = s.substr(pos, end - pos);
        pos = end;
        skip_ws();
        if (pos < s.size() && s[pos] == '(') {
          ++pos;
          const int a = parse_sum();
          if (!eat(')')) throw std::invalid_argument("expression: missing ')'");
          Op op;
          if (name == "sin") op = Op::Sin;
          else if (name == "cos") op = Op::Cos;
          else if (name == "ln" || name == "log") op = Op::Ln;
          else if (name == "exp") op = Op::Exp;
          else if (name == "abs") op = Op::Abs;
          else
            throw std::invalid_argument("expression: unknown function '" + name + "'");
          return e->add({op, 0, -1, a, -1});
        }
        if (name == "pi")
          return e->add({Op::Const, std::numbers::pi, -1, -1, -1});
        for (std::size_t i = 0; i < e->vars_.size(); ++i)
          if (e->vars_[i] == name)
            return e->add({Op::Var, 0, int(i), -1, -1});
        throw std::invalid_argument("expression: unknown variable '" + name + "'");
      }
      throw std::invalid_argument(std::string("expression: unexpected character '") + c + "'");
    }
  };
};

}  // namespace tmce
