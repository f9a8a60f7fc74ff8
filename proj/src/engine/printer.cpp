#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "selfadapt/engine/parser.hpp"

namespace selfadapt::engine {

namespace {

constexpr std::int64_t kDefaultIntLo = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kDefaultIntHi = std::numeric_limits<std::int32_t>::max();

std::string real_literal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", std::fabs(v));
  std::string s(buf);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return v < 0 || std::signbit(v) ? "(-" + s + ")" : s;
}

std::string int_literal(std::int64_t v) {
  if (v == std::numeric_limits<std::int64_t>::min()) return "(-9223372036854775807-1)";
  return v < 0 ? "(-" + std::to_string(-v) + ")" : std::to_string(v);
}

std::string value_literal(const Value& v) { return v.is_real() ? real_literal(v.r) : int_literal(v.i); }

const char* op_text(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Ge: return ">=";
    case Op::Gt: return ">";
    case Op::And: return "&&";
    case Op::Or: return "||";
    case Op::Not: return "!";
    case Op::Neg: return "-";
  }
  return "?";
}

const char* builtin_name(BuiltinFn fn) {
  switch (fn) {
    case BuiltinFn::Floor: return "floor";
    case BuiltinFn::Ceil: return "ceil";
    case BuiltinFn::Round: return "round";
    case BuiltinFn::Abs: return "abs";
    case BuiltinFn::Min: return "min";
    case BuiltinFn::Max: return "max";
    case BuiltinFn::Sqrt: return "sqrt";
  }
  return "?";
}

class Printer {
 public:
  explicit Printer(const AutomatonNetwork& net) : net_(net) {}

  void expr(std::ostream& out, const Expr& e) const {
    switch (e.kind) {
      case ExprKind::IntConst: out << int_literal(e.int_value); return;
      case ExprKind::RealConst: out << real_literal(e.real_value); return;
      case ExprKind::Var:
        out << (e.var.scope == Scope::Local ? fn_->locals[static_cast<std::size_t>(e.var.index)].name
                                            : net_.variables[static_cast<std::size_t>(e.var.index)].name);
        return;
      case ExprKind::Index:
        out << net_.variables[static_cast<std::size_t>(e.var.index)].name << "[";
        expr(out, e.args[0]);
        out << "]";
        return;
      case ExprKind::Unary:
        out << "(" << op_text(e.op);
        expr(out, e.args[0]);
        out << ")";
        return;
      case ExprKind::Binary:
        out << "(";
        expr(out, e.args[0]);
        out << " " << op_text(e.op) << " ";
        expr(out, e.args[1]);
        out << ")";
        return;
      case ExprKind::Ternary:
        out << "(";
        expr(out, e.args[0]);
        out << " ? ";
        expr(out, e.args[1]);
        out << " : ";
        expr(out, e.args[2]);
        out << ")";
        return;
      case ExprKind::Call:
      case ExprKind::Builtin:
        out << (e.kind == ExprKind::Call ? net_.functions[static_cast<std::size_t>(e.callee)].name
                                         : builtin_name(e.builtin))
            << "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i > 0) out << ", ";
          expr(out, e.args[i]);
        }
        out << ")";
        return;
      case ExprKind::LocationTest: {
        const Automaton& a = net_.automata[static_cast<std::size_t>(e.automaton)];
        out << a.name << "." << a.locations[static_cast<std::size_t>(e.location)].name;
        return;
      }
    }
  }

  void variable(std::ostream& out, const VarDecl& d) const {
    if (d.is_const) out << "const ";
    if (d.type == Type::Real) {
      out << "real";
    } else if (d.lo == kDefaultIntLo && d.hi == kDefaultIntHi) {
      out << "int";
    } else {
      out << "int[" << int_literal(d.lo) << ", " << int_literal(d.hi) << "]";
    }
    out << " " << d.name;
    if (d.is_array) {
      out << "[" << d.size << "] = {";
      for (std::size_t i = 0; i < d.init.size(); ++i) out << (i > 0 ? ", " : "") << value_literal(d.init[i]);
      out << "};\n";
    } else {
      out << " = " << value_literal(d.init.front()) << ";\n";
    }
  }

  void function(std::ostream& out, const Function& fn) {
    fn_ = &fn;
    out << "\n" << type_name(fn.return_type) << " " << fn.name << "(";
    for (int i = 0; i < fn.param_count; ++i) {
      const LocalDecl& p = fn.locals[static_cast<std::size_t>(i)];
      out << (i > 0 ? ", " : "") << type_name(p.type) << " " << p.name;
    }
    out << ") ";
    stmt(out, fn.body, 0);
    fn_ = nullptr;
  }

  void automaton(std::ostream& out, const Automaton& a) const {
    out << "\nautomaton " << a.name << " {\n";
    for (const Location& l : a.locations) {
      out << "  location " << l.name;
      if (l.initial) out << " initial";
      if (l.committed) out << " committed";
      out << ";\n";
    }
    for (const Edge& e : a.edges) {
      out << "  edge " << a.locations[static_cast<std::size_t>(e.source)].name << " -> "
          << a.locations[static_cast<std::size_t>(e.target)].name;
      if (!e.guard && e.sync.kind == SyncKind::None && !e.weight && e.updates.empty()) {
        out << ";\n";
        continue;
      }
      out << " {\n";
      if (e.guard) {
        out << "    guard ";
        expr(out, *e.guard);
        out << ";\n";
      }
      if (e.sync.kind != SyncKind::None) {
        out << "    sync " << net_.channels[static_cast<std::size_t>(e.sync.channel)].name
            << (e.sync.kind == SyncKind::Send ? "!" : "?") << ";\n";
      }
      if (e.weight) {
        out << "    weight ";
        expr(out, *e.weight);
        out << ";\n";
      }
      if (!e.updates.empty()) {
        out << "    update ";
        for (std::size_t i = 0; i < e.updates.size(); ++i) {
          const Assignment& u = e.updates[i];
          if (i > 0) out << ", ";
          out << net_.variables[static_cast<std::size_t>(u.variable)].name;
          if (u.index) {
            out << "[";
            expr(out, *u.index);
            out << "]";
          }
          out << " = ";
          expr(out, u.value);
        }
        out << ";\n";
      }
      out << "  }\n";
    }
    out << "}\n";
  }

 private:
  static const char* type_name(Type t) { return t == Type::Real ? "real" : "int"; }

  void stmt(std::ostream& out, const Stmt& s, int indent) const {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (s.kind) {
      case StmtKind::Block:
        out << "{\n";
        for (const Stmt& inner : s.body) {
          out << pad << "  ";
          stmt(out, inner, indent + 1);
        }
        out << pad << "}\n";
        return;
      case StmtKind::Local: {
        const LocalDecl& l = fn_->locals[static_cast<std::size_t>(s.target.index)];
        out << type_name(l.type) << " " << l.name << " = ";
        expr(out, s.exprs[0]);
        out << ";\n";
        return;
      }
      case StmtKind::Assign:
        out << fn_->locals[static_cast<std::size_t>(s.target.index)].name << " = ";
        expr(out, s.exprs[0]);
        out << ";\n";
        return;
      case StmtKind::If:
        out << "if (";
        expr(out, s.exprs[0]);
        out << ") ";
        stmt(out, s.body[0], indent);
        if (!s.else_body.empty()) {
          out << pad << "else ";
          stmt(out, s.else_body[0], indent);
        }
        return;
      case StmtKind::For:
        out << "for (" << fn_->locals[static_cast<std::size_t>(s.target.index)].name << " : ";
        expr(out, s.exprs[0]);
        out << " .. ";
        expr(out, s.exprs[1]);
        out << ") ";
        stmt(out, s.body[0], indent);
        return;
      case StmtKind::Return:
        out << "return ";
        expr(out, s.exprs[0]);
        out << ";\n";
        return;
    }
  }

  const AutomatonNetwork& net_;
  const Function* fn_ = nullptr;
};

}  // namespace

std::string to_source(const AutomatonNetwork& net) {
  std::ostringstream out;
  Printer printer(net);
  for (const VarDecl& d : net.variables) printer.variable(out, d);
  for (const Channel& c : net.channels) out << (c.broadcast ? "broadcast chan " : "chan ") << c.name << ";\n";
  for (const Function& f : net.functions) printer.function(out, f);
  for (const Automaton& a : net.automata) printer.automaton(out, a);
  return out.str();
}

std::string to_source(const AutomatonNetwork& net, const Expr& expr) {
  std::ostringstream out;
  Printer(net).expr(out, expr);
  return out.str();
}

}  // namespace selfadapt::engine
