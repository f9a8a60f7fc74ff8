#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfadapt::engine {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or static-semantics error, with 1-based source position.
class ParseError : public ModelError {
 public:
  ParseError(const std::string& message, int line, int column)
      : ModelError(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        message_(message), line_(line), column_(column) {}

  [[nodiscard]] const std::string& message() const noexcept { return message_; }
  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] int column() const noexcept { return column_; }

 private:
  std::string message_;
  int line_;
  int column_;
};

/// Error raised while evaluating or executing a model.
class RuntimeError : public ModelError {
 public:
  using ModelError::ModelError;
};

enum class Type { Int, Real };

/// Dynamically tagged scalar.
struct Value {
  Type type = Type::Int;
  std::int64_t i = 0;
  double r = 0.0;

  static Value of_int(std::int64_t v) noexcept { return {Type::Int, v, 0.0}; }
  static Value of_real(double v) noexcept { return {Type::Real, 0, v}; }

  [[nodiscard]] bool is_real() const noexcept { return type == Type::Real; }
  [[nodiscard]] double as_real() const noexcept { return is_real() ? r : static_cast<double>(i); }
  [[nodiscard]] bool truthy() const noexcept { return is_real() ? r != 0.0 : i != 0; }

  friend bool operator==(const Value&, const Value&) = default;
};

enum class Scope { Global, Local };

struct VarRef {
  Scope scope = Scope::Global;
  int index = -1;
  friend bool operator==(const VarRef&, const VarRef&) = default;
};

enum class ExprKind { IntConst, RealConst, Var, Index, Unary, Binary, Ternary, Call, Builtin, LocationTest };

enum class Op { Add, Sub, Mul, Div, Mod, Lt, Le, Eq, Ne, Ge, Gt, And, Or, Not, Neg };

enum class BuiltinFn { Floor, Ceil, Round, Abs, Min, Max, Sqrt };

/// Expression tree node. `type` is the static result type computed by the
/// parser; evaluation coerces results to it.
struct Expr {
  ExprKind kind = ExprKind::IntConst;
  Type type = Type::Int;
  Op op = Op::Add;
  std::int64_t int_value = 0;
  double real_value = 0.0;
  VarRef var;
  int callee = -1;  // function index for Call
  BuiltinFn builtin = BuiltinFn::Floor;
  int automaton = -1;  // LocationTest
  int location = -1;   // LocationTest
  std::vector<Expr> args;

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct VarDecl {
  std::string name;
  Type type = Type::Int;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool is_const = false;
  bool is_array = false;
  int size = 1;
  int offset = 0;  // first slot in the variable store
  std::vector<Value> init;

  friend bool operator==(const VarDecl&, const VarDecl&) = default;
};

enum class StmtKind { Block, Local, Assign, If, For, Return };

struct Stmt {
  StmtKind kind = StmtKind::Block;
  VarRef target;                  // Local (declared slot), Assign, For (loop variable)
  std::vector<Expr> exprs;        // Local: [init]; Assign: [value] or [index, value];
                                  // If: [cond]; For: [from, to]; Return: [value]
  std::vector<Stmt> body;         // Block statements, If-then, For body
  std::vector<Stmt> else_body;

  friend bool operator==(const Stmt&, const Stmt&) = default;
};

struct LocalDecl {
  std::string name;
  Type type = Type::Int;
  friend bool operator==(const LocalDecl&, const LocalDecl&) = default;
};

/// Pure helper function. Parameters occupy the first locals.
struct Function {
  std::string name;
  Type return_type = Type::Int;
  int param_count = 0;
  std::vector<LocalDecl> locals;
  Stmt body;

  friend bool operator==(const Function&, const Function&) = default;
};

struct Channel {
  std::string name;
  bool broadcast = false;
  friend bool operator==(const Channel&, const Channel&) = default;
};

struct Location {
  std::string name;
  bool initial = false;
  bool committed = false;
  friend bool operator==(const Location&, const Location&) = default;
};

enum class SyncKind { None, Send, Receive };

struct Sync {
  SyncKind kind = SyncKind::None;
  int channel = -1;
  friend bool operator==(const Sync&, const Sync&) = default;
};

/// Assignment to a global variable; `index` is empty for scalars.
struct Assignment {
  int variable = -1;
  std::optional<Expr> index;
  Expr value;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Edge {
  int source = -1;
  int target = -1;
  std::optional<Expr> guard;
  Sync sync;
  std::optional<Expr> weight;
  std::vector<Assignment> updates;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Edges leaving the same location that share guard and sync. A weighted
/// group is one probabilistic choice; an unweighted group holds one edge.
struct BranchGroup {
  int source = -1;
  bool weighted = false;
  std::vector<int> edges;
  friend bool operator==(const BranchGroup&, const BranchGroup&) = default;
};

struct Automaton {
  std::string name;
  std::vector<Location> locations;
  std::vector<Edge> edges;
  std::vector<BranchGroup> groups;  // derived from edges
  int initial = -1;

  [[nodiscard]] int location_index(const std::string& location) const;

  friend bool operator==(const Automaton&, const Automaton&) = default;
};

/// Parsed, validated network. Immutable after parsing.
struct AutomatonNetwork {
  std::vector<VarDecl> variables;  // constants and variables, declaration order
  std::vector<Channel> channels;
  std::vector<Function> functions;
  std::vector<Automaton> automata;
  int store_size = 0;

  [[nodiscard]] int variable_index(const std::string& name) const;
  [[nodiscard]] int automaton_index(const std::string& name) const;
  [[nodiscard]] int channel_index(const std::string& name) const;
  [[nodiscard]] int function_index(const std::string& name) const;
  [[nodiscard]] std::size_t edge_count() const;

  friend bool operator==(const AutomatonNetwork&, const AutomatonNetwork&) = default;
};

/// Per-run mutable state. `steps` counts fired transitions and ticks,
/// `ticks` counts only time ticks.
struct NetState {
  std::vector<int> locations;
  std::vector<Value> store;
  std::uint64_t steps = 0;
  std::uint64_t ticks = 0;

  friend bool operator==(const NetState&, const NetState&) = default;
};

}  // namespace selfadapt::engine
