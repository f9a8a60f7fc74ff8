#include "selfadapt/engine/interpreter.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "eval.hpp"
#include "selfadapt/engine/parser.hpp"

namespace selfadapt::engine {

namespace detail {

namespace {

template <typename F>
std::int64_t checked(F op, std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (op(a, b, &out)) throw RuntimeError("integer overflow");
  return out;
}

double finite(double v) {
  if (!std::isfinite(v)) throw RuntimeError("non-finite real result");
  return v;
}

std::int64_t to_int(double v, const char* fn) {
  if (!std::isfinite(v) || v < -9.2e18 || v > 9.2e18) {
    throw RuntimeError(std::string(fn) + ": argument out of integer range");
  }
  return static_cast<std::int64_t>(v);
}

Value coerce(Value v, Type t) {
  if (t == Type::Real && !v.is_real()) return Value::of_real(static_cast<double>(v.i));
  return v;
}

struct Frame {
  const EvalContext& ctx;
  std::span<Value> locals;
};

Value eval(const Frame& f, const Expr& e);

Value element(const Frame& f, const Expr& e) {
  const VarDecl& d = f.ctx.net.variables[static_cast<std::size_t>(e.var.index)];
  const Value idx = eval(f, e.args[0]);
  if (idx.i < 0 || idx.i >= d.size) {
    throw RuntimeError("index " + std::to_string(idx.i) + " out of range for '" + d.name + "[" +
                       std::to_string(d.size) + "]'");
  }
  return f.ctx.globals[static_cast<std::size_t>(d.offset + idx.i)];
}

Value binary(const Frame& f, const Expr& e) {
  if (e.op == Op::And) {
    return Value::of_int(eval(f, e.args[0]).truthy() && eval(f, e.args[1]).truthy() ? 1 : 0);
  }
  if (e.op == Op::Or) {
    return Value::of_int(eval(f, e.args[0]).truthy() || eval(f, e.args[1]).truthy() ? 1 : 0);
  }
  const Value a = eval(f, e.args[0]);
  const Value b = eval(f, e.args[1]);
  const bool real = a.is_real() || b.is_real();
  switch (e.op) {
    case Op::Lt: return Value::of_int(real ? a.as_real() < b.as_real() : a.i < b.i);
    case Op::Le: return Value::of_int(real ? a.as_real() <= b.as_real() : a.i <= b.i);
    case Op::Gt: return Value::of_int(real ? a.as_real() > b.as_real() : a.i > b.i);
    case Op::Ge: return Value::of_int(real ? a.as_real() >= b.as_real() : a.i >= b.i);
    case Op::Eq: return Value::of_int(real ? a.as_real() == b.as_real() : a.i == b.i);
    case Op::Ne: return Value::of_int(real ? a.as_real() != b.as_real() : a.i != b.i);
    default: break;
  }
  if (real || e.type == Type::Real) {
    const double x = a.as_real(), y = b.as_real();
    switch (e.op) {
      case Op::Add: return Value::of_real(finite(x + y));
      case Op::Sub: return Value::of_real(finite(x - y));
      case Op::Mul: return Value::of_real(finite(x * y));
      case Op::Div:
        if (y == 0.0) throw RuntimeError("division by zero");
        return Value::of_real(finite(x / y));
      default: throw RuntimeError("invalid real operator");
    }
  }
  using I = std::int64_t;
  switch (e.op) {
    case Op::Add: return Value::of_int(checked([](I x, I y, I* r) { return __builtin_add_overflow(x, y, r); }, a.i, b.i));
    case Op::Sub: return Value::of_int(checked([](I x, I y, I* r) { return __builtin_sub_overflow(x, y, r); }, a.i, b.i));
    case Op::Mul: return Value::of_int(checked([](I x, I y, I* r) { return __builtin_mul_overflow(x, y, r); }, a.i, b.i));
    case Op::Div:
    case Op::Mod:
      if (b.i == 0) throw RuntimeError("division by zero");
      if (a.i == std::numeric_limits<std::int64_t>::min() && b.i == -1) throw RuntimeError("integer overflow");
      return Value::of_int(e.op == Op::Div ? a.i / b.i : a.i % b.i);
    default: throw RuntimeError("invalid integer operator");
  }
}

Value builtin(const Frame& f, const Expr& e) {
  const Value a = eval(f, e.args[0]);
  switch (e.builtin) {
    case BuiltinFn::Floor: return Value::of_int(a.is_real() ? to_int(std::floor(a.r), "floor") : a.i);
    case BuiltinFn::Ceil: return Value::of_int(a.is_real() ? to_int(std::ceil(a.r), "ceil") : a.i);
    case BuiltinFn::Round: return Value::of_int(a.is_real() ? to_int(std::round(a.r), "round") : a.i);
    case BuiltinFn::Abs:
      if (a.is_real()) return Value::of_real(std::fabs(a.r));
      if (a.i == std::numeric_limits<std::int64_t>::min()) throw RuntimeError("integer overflow");
      return Value::of_int(a.i < 0 ? -a.i : a.i);
    case BuiltinFn::Sqrt:
      if (a.as_real() < 0.0) throw RuntimeError("sqrt of negative value");
      return Value::of_real(std::sqrt(a.as_real()));
    case BuiltinFn::Min:
    case BuiltinFn::Max: {
      const Value b = eval(f, e.args[1]);
      const bool take_a = e.builtin == BuiltinFn::Min ? a.as_real() <= b.as_real() : a.as_real() >= b.as_real();
      return coerce(take_a ? a : b, e.type);
    }
  }
  throw RuntimeError("unknown builtin");
}

std::optional<Value> exec(const Frame& f, const Stmt& s) {
  switch (s.kind) {
    case StmtKind::Block:
      for (const Stmt& inner : s.body) {
        if (auto r = exec(f, inner)) return r;
      }
      return std::nullopt;
    case StmtKind::Local:
    case StmtKind::Assign: {
      auto& slot = f.locals[static_cast<std::size_t>(s.target.index)];
      const Type t = slot.type;
      slot = coerce(eval(f, s.exprs[0]), t);
      return std::nullopt;
    }
    case StmtKind::If:
      if (eval(f, s.exprs[0]).truthy()) return exec(f, s.body[0]);
      if (!s.else_body.empty()) return exec(f, s.else_body[0]);
      return std::nullopt;
    case StmtKind::For: {
      const std::int64_t from = eval(f, s.exprs[0]).i;
      const std::int64_t to = eval(f, s.exprs[1]).i;
      for (std::int64_t i = from; i <= to; ++i) {
        f.locals[static_cast<std::size_t>(s.target.index)] = Value::of_int(i);
        if (auto r = exec(f, s.body[0])) return r;
      }
      return std::nullopt;
    }
    case StmtKind::Return:
      return eval(f, s.exprs[0]);
  }
  return std::nullopt;
}

Value call(const Frame& f, const Expr& e) {
  const Function& fn = f.ctx.net.functions[static_cast<std::size_t>(e.callee)];
  std::vector<Value> locals(fn.locals.size());
  for (std::size_t i = 0; i < fn.locals.size(); ++i) {
    locals[i] = fn.locals[i].type == Type::Real ? Value::of_real(0.0) : Value::of_int(0);
  }
  for (int i = 0; i < fn.param_count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    locals[k] = coerce(eval(f, e.args[k]), fn.locals[k].type);
  }
  const Frame inner{f.ctx, locals};
  const std::optional<Value> r = exec(inner, fn.body);
  if (!r) throw RuntimeError("function '" + fn.name + "' ended without return");
  return coerce(*r, fn.return_type);
}

Value eval(const Frame& f, const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntConst: return Value::of_int(e.int_value);
    case ExprKind::RealConst: return Value::of_real(e.real_value);
    case ExprKind::Var:
      if (e.var.scope == Scope::Local) return f.locals[static_cast<std::size_t>(e.var.index)];
      return f.ctx.globals[static_cast<std::size_t>(f.ctx.net.variables[static_cast<std::size_t>(e.var.index)].offset)];
    case ExprKind::Index: return element(f, e);
    case ExprKind::Unary: {
      const Value a = eval(f, e.args[0]);
      if (e.op == Op::Not) return Value::of_int(a.truthy() ? 0 : 1);
      if (a.is_real()) return Value::of_real(-a.r);
      if (a.i == std::numeric_limits<std::int64_t>::min()) throw RuntimeError("integer overflow");
      return Value::of_int(-a.i);
    }
    case ExprKind::Binary: return binary(f, e);
    case ExprKind::Ternary:
      return coerce(eval(f, eval(f, e.args[0]).truthy() ? e.args[1] : e.args[2]), e.type);
    case ExprKind::Builtin: return builtin(f, e);
    case ExprKind::Call: return call(f, e);
    case ExprKind::LocationTest:
      if (f.ctx.locations.empty()) throw RuntimeError("location test outside a running network");
      return Value::of_int(f.ctx.locations[static_cast<std::size_t>(e.automaton)] == e.location ? 1 : 0);
  }
  throw RuntimeError("unknown expression kind");
}

}  // namespace

Value evaluate(const EvalContext& ctx, const Expr& expr, std::span<Value> locals) {
  const Frame f{ctx, locals};
  return eval(f, expr);
}

void store_global(const AutomatonNetwork& net, std::span<Value> globals, int var, std::int64_t element, Value value) {
  const VarDecl& d = net.variables[static_cast<std::size_t>(var)];
  if (element < 0 || element >= d.size) {
    throw RuntimeError("index " + std::to_string(element) + " out of range for '" + d.name + "[" +
                       std::to_string(d.size) + "]'");
  }
  Value& slot = globals[static_cast<std::size_t>(d.offset + element)];
  if (d.type == Type::Int) {
    if (value.is_real()) throw RuntimeError("cannot store real into int '" + d.name + "'");
    if (value.i < d.lo || value.i > d.hi) {
      throw RuntimeError("bound violation: " + d.name + " = " + std::to_string(value.i) + " outside [" +
                         std::to_string(d.lo) + "," + std::to_string(d.hi) + "]");
    }
    slot = value;
  } else {
    slot = Value::of_real(finite(value.as_real()));
  }
}

}  // namespace detail

namespace {

detail::EvalContext context(const AutomatonNetwork& net, const NetState& state) {
  return detail::EvalContext{net, state.store, state.locations};
}

bool guard_holds(const AutomatonNetwork& net, const NetState& state, const Edge& edge) {
  return !edge.guard || detail::evaluate(context(net, state), *edge.guard, {}).truthy();
}

struct Part {
  int automaton;
  int group;
};

struct Candidate {
  StepKind kind;
  int channel;
  std::vector<Part> parts;
};

std::vector<Candidate> enumerate(const AutomatonNetwork& net, const NetState& state) {
  const std::size_t nch = net.channels.size();
  std::vector<std::vector<Part>> senders(nch), receivers(nch);
  std::vector<Candidate> out;
  bool committed = false;
  for (std::size_t a = 0; a < net.automata.size(); ++a) {
    const Automaton& aut = net.automata[a];
    const int loc = state.locations[a];
    committed = committed || aut.locations[static_cast<std::size_t>(loc)].committed;
    for (std::size_t g = 0; g < aut.groups.size(); ++g) {
      const BranchGroup& group = aut.groups[g];
      if (group.source != loc) continue;
      const Edge& first = aut.edges[static_cast<std::size_t>(group.edges.front())];
      if (!guard_holds(net, state, first)) continue;
      const Part part{static_cast<int>(a), static_cast<int>(g)};
      switch (first.sync.kind) {
        case SyncKind::None: out.push_back({StepKind::Internal, -1, {part}}); break;
        case SyncKind::Send: senders[static_cast<std::size_t>(first.sync.channel)].push_back(part); break;
        case SyncKind::Receive: receivers[static_cast<std::size_t>(first.sync.channel)].push_back(part); break;
      }
    }
  }
  for (std::size_t c = 0; c < nch; ++c) {
    const int ch = static_cast<int>(c);
    if (!net.channels[c].broadcast) {
      for (const Part& s : senders[c]) {
        for (const Part& r : receivers[c]) {
          if (r.automaton != s.automaton) out.push_back({StepKind::Binary, ch, {s, r}});
        }
      }
      continue;
    }
    for (const Part& s : senders[c]) {
      // Receivers grouped per automaton; one receiving group per automaton.
      std::vector<std::vector<Part>> per_automaton;
      for (const Part& r : receivers[c]) {
        if (r.automaton == s.automaton) continue;
        if (per_automaton.empty() || per_automaton.back().front().automaton != r.automaton) per_automaton.emplace_back();
        per_automaton.back().push_back(r);
      }
      std::vector<std::size_t> pick(per_automaton.size(), 0);
      for (;;) {
        Candidate cand{StepKind::Broadcast, ch, {s}};
        for (std::size_t k = 0; k < per_automaton.size(); ++k) cand.parts.push_back(per_automaton[k][pick[k]]);
        out.push_back(std::move(cand));
        std::size_t k = 0;
        for (; k < pick.size(); ++k) {
          if (++pick[k] < per_automaton[k].size()) break;
          pick[k] = 0;
        }
        if (k == pick.size()) break;
      }
    }
  }
  if (committed) {
    std::erase_if(out, [&](const Candidate& cand) {
      for (const Part& p : cand.parts) {
        const Automaton& aut = net.automata[static_cast<std::size_t>(p.automaton)];
        if (aut.locations[static_cast<std::size_t>(state.locations[static_cast<std::size_t>(p.automaton)])].committed) {
          return false;
        }
      }
      return true;
    });
  }
  return out;
}

/// Weights of each edge in a group, evaluated in the pre-transition state.
std::vector<std::int64_t> weights(const AutomatonNetwork& net, const NetState& state, const Part& part) {
  const Automaton& aut = net.automata[static_cast<std::size_t>(part.automaton)];
  const BranchGroup& group = aut.groups[static_cast<std::size_t>(part.group)];
  std::vector<std::int64_t> w;
  if (!group.weighted) {
    w.push_back(1);
    return w;
  }
  std::int64_t total = 0;
  for (const int e : group.edges) {
    const Value v = detail::evaluate(context(net, state), *aut.edges[static_cast<std::size_t>(e)].weight, {});
    if (v.i < 0) {
      throw RuntimeError("negative branch weight on edge " + aut.name + "." +
                         aut.locations[static_cast<std::size_t>(group.source)].name);
    }
    if (__builtin_add_overflow(total, v.i, &total)) throw RuntimeError("branch weight overflow");
    w.push_back(v.i);
  }
  if (total <= 0) {
    throw RuntimeError("branch weights sum to zero in " + aut.name + " at location " +
                       aut.locations[static_cast<std::size_t>(group.source)].name);
  }
  return w;
}

void fire(const AutomatonNetwork& net, NetState& state, int automaton, int edge_index) {
  const Automaton& aut = net.automata[static_cast<std::size_t>(automaton)];
  const Edge& edge = aut.edges[static_cast<std::size_t>(edge_index)];
  for (const Assignment& a : edge.updates) {
    try {
      std::int64_t element = 0;
      if (a.index) element = detail::evaluate(context(net, state), *a.index, {}).i;
      const Value v = detail::evaluate(context(net, state), a.value, {});
      detail::store_global(net, state.store, a.variable, element, v);
    } catch (const RuntimeError& err) {
      throw RuntimeError(std::string(err.what()) + " (edge " + aut.name + "." +
                         aut.locations[static_cast<std::size_t>(edge.source)].name + " -> " +
                         aut.locations[static_cast<std::size_t>(edge.target)].name + ")");
    }
  }
  state.locations[static_cast<std::size_t>(automaton)] = edge.target;
}

}  // namespace

NetState initial_state(const AutomatonNetwork& net) {
  NetState s;
  for (const Automaton& a : net.automata) s.locations.push_back(a.initial);
  s.store.reserve(static_cast<std::size_t>(net.store_size));
  for (const VarDecl& d : net.variables) {
    for (const Value& v : d.init) s.store.push_back(v);
  }
  return s;
}

Value eval_expr(const AutomatonNetwork& net, const Expr& expr, const NetState& state) {
  return detail::evaluate(context(net, state), expr, {});
}

void assign(const AutomatonNetwork& net, NetState& state, const std::string& name, Value value, int index) {
  const int v = net.variable_index(name);
  if (v < 0) throw RuntimeError("unknown variable '" + name + "'");
  detail::store_global(net, state.store, v, index, value);
}

void assign(const AutomatonNetwork& net, NetState& state, const std::string& name, std::span<const double> values) {
  const int v = net.variable_index(name);
  if (v < 0) throw RuntimeError("unknown variable '" + name + "'");
  const VarDecl& d = net.variables[static_cast<std::size_t>(v)];
  if (static_cast<int>(values.size()) > d.size) throw RuntimeError("too many values for '" + name + "'");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Value val = d.type == Type::Real ? Value::of_real(values[i])
                                           : Value::of_int(static_cast<std::int64_t>(std::llround(values[i])));
    detail::store_global(net, state.store, v, static_cast<std::int64_t>(i), val);
  }
}

Value read(const AutomatonNetwork& net, const NetState& state, const std::string& name, int index) {
  const int v = net.variable_index(name);
  if (v < 0) throw RuntimeError("unknown variable '" + name + "'");
  const VarDecl& d = net.variables[static_cast<std::size_t>(v)];
  if (index < 0 || index >= d.size) throw RuntimeError("index out of range for '" + name + "'");
  return state.store[static_cast<std::size_t>(d.offset + index)];
}

bool in_location(const AutomatonNetwork& net, const NetState& state, const std::string& automaton,
                 const std::string& location) {
  const int a = net.automaton_index(automaton);
  if (a < 0) throw RuntimeError("unknown automaton '" + automaton + "'");
  const int l = net.automata[static_cast<std::size_t>(a)].location_index(location);
  if (l < 0) throw RuntimeError("unknown location '" + automaton + "." + location + "'");
  return state.locations[static_cast<std::size_t>(a)] == l;
}

StepReport step(const AutomatonNetwork& net, NetState& state, Rng& rng) {
  const std::vector<Candidate> cands = enumerate(net, state);
  ++state.steps;
  if (cands.empty()) {
    ++state.ticks;
    return StepReport{};
  }
  const Candidate& chosen = cands.size() == 1 ? cands.front() : cands[rng.uniform_int(cands.size())];

  // Resolve every branch before any update runs.
  std::vector<int> edges;
  for (const Part& p : chosen.parts) {
    const BranchGroup& group =
        net.automata[static_cast<std::size_t>(p.automaton)].groups[static_cast<std::size_t>(p.group)];
    const std::vector<std::int64_t> w = weights(net, state, p);
    std::size_t pick = 0;
    if (w.size() > 1) {
      std::int64_t total = 0;
      for (const std::int64_t x : w) total += x;
      auto r = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(total)));
      while (r >= w[pick]) r -= w[pick++];
    }
    edges.push_back(group.edges[pick]);
  }
  StepReport report{chosen.kind, chosen.channel, {}};
  for (std::size_t k = 0; k < chosen.parts.size(); ++k) {
    fire(net, state, chosen.parts[k].automaton, edges[k]);
    report.fired.push_back(Firing{chosen.parts[k].automaton, edges[k]});
  }
  return report;
}

std::vector<std::pair<StepReport, NetState>> successors(const AutomatonNetwork& net, const NetState& state) {
  std::vector<std::pair<StepReport, NetState>> out;
  const std::vector<Candidate> cands = enumerate(net, state);
  if (cands.empty()) {
    NetState next = state;
    ++next.steps;
    ++next.ticks;
    out.emplace_back(StepReport{}, std::move(next));
    return out;
  }
  for (const Candidate& cand : cands) {
    std::vector<std::vector<int>> options;
    for (const Part& p : cand.parts) {
      const BranchGroup& group =
          net.automata[static_cast<std::size_t>(p.automaton)].groups[static_cast<std::size_t>(p.group)];
      const std::vector<std::int64_t> w = weights(net, state, p);
      std::vector<int> live;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k] > 0) live.push_back(group.edges[k]);
      }
      options.push_back(std::move(live));
    }
    std::vector<std::size_t> pick(options.size(), 0);
    for (;;) {
      NetState next = state;
      ++next.steps;
      StepReport report{cand.kind, cand.channel, {}};
      for (std::size_t k = 0; k < cand.parts.size(); ++k) {
        const int e = options[k][pick[k]];
        fire(net, next, cand.parts[k].automaton, e);
        report.fired.push_back(Firing{cand.parts[k].automaton, e});
      }
      out.emplace_back(std::move(report), std::move(next));
      std::size_t k = 0;
      for (; k < pick.size(); ++k) {
        if (++pick[k] < options[k].size()) break;
        pick[k] = 0;
      }
      if (k == pick.size()) break;
    }
  }
  return out;
}

Trace simulate(const AutomatonNetwork& net, NetState start, std::uint64_t horizon, const StopPredicate& stop,
               Rng& rng) {
  Trace trace;
  trace.states.push_back(std::move(start));
  for (std::uint64_t k = 0; k < horizon; ++k) {
    if (stop && stop(trace.states.back())) break;
    NetState next = trace.states.back();
    trace.reports.push_back(step(net, next, rng));
    trace.states.push_back(std::move(next));
  }
  return trace;
}

NetState run(const AutomatonNetwork& net, NetState start, std::uint64_t horizon, const StopPredicate& stop,
             Rng& rng) {
  for (std::uint64_t k = 0; k < horizon; ++k) {
    if (stop && stop(start)) break;
    step(net, start, rng);
  }
  return start;
}

StopPredicate make_predicate(const AutomatonNetwork& net, const std::string& expression) {
  Expr e = parse_expression(net, expression);
  return [&net, e = std::move(e)](const NetState& s) { return eval_expr(net, e, s).truthy(); };
}

std::string describe(const AutomatonNetwork& net, const StepReport& report) {
  if (report.kind == StepKind::Tick) return "tick";
  std::ostringstream out;
  for (std::size_t k = 0; k < report.fired.size(); ++k) {
    const Automaton& a = net.automata[static_cast<std::size_t>(report.fired[k].automaton)];
    const Edge& e = a.edges[static_cast<std::size_t>(report.fired[k].edge)];
    if (k > 0) out << " | ";
    out << a.name << "." << a.locations[static_cast<std::size_t>(e.source)].name << " -> "
        << a.locations[static_cast<std::size_t>(e.target)].name;
    if (e.sync.kind != SyncKind::None) {
      out << " [" << net.channels[static_cast<std::size_t>(e.sync.channel)].name
          << (e.sync.kind == SyncKind::Send ? "!" : "?") << "]";
    }
  }
  return out.str();
}

}  // namespace selfadapt::engine
