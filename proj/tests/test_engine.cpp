#include <cmath>
#include <string>

#include "doctest.h"
#include "selfadapt/engine/interpreter.hpp"
#include "selfadapt/engine/parser.hpp"

using namespace selfadapt;
using namespace selfadapt::engine;

namespace {

Value eval_in(const std::string& decls, const std::string& expr) {
  const AutomatonNetwork net = parse_model(decls);
  return eval_expr(net, parse_expression(net, expr), initial_state(net));
}

std::string parse_error(const std::string& src) {
  try {
    parse_model(src);
  } catch (const ParseError& e) {
    return e.message();
  }
  return "";
}

const char* kCoin = R"(
int heads = 0;
int tails = 0;
automaton Coin {
  location Flip initial;
  edge Flip -> Flip { weight 1; update heads = heads + 1; }
  edge Flip -> Flip { weight 1; update tails = tails + 1; }
}
)";

}  // namespace

TEST_CASE("arithmetic follows usual precedence") {
  CHECK(eval_in("", "1 + 2 * 3") == Value::of_int(7));
  CHECK(eval_in("", "(1 + 2) * 3") == Value::of_int(9));
  CHECK(eval_in("", "7 / 2") == Value::of_int(3));
  CHECK(eval_in("", "-7 % 3") == Value::of_int(-1));
  CHECK(eval_in("", "7 / 2.0") == Value::of_real(3.5));
  CHECK(eval_in("", "1 < 2 && 2 < 3 || 0") == Value::of_int(1));
  CHECK(eval_in("", "!0 == 1") == Value::of_int(1));
}

TEST_CASE("ternary over a real expression") {
  CHECK(eval_in("int x = -10;", "x >= 0 ? 0 : -x / 20.0").as_real() == doctest::Approx(0.5));
  CHECK(eval_in("int x = 4;", "x >= 0 ? 0 : -x / 20.0").as_real() == 0.0);
}

TEST_CASE("array indexing and builtins") {
  CHECK(eval_in("int a[3] = {4, 5, 6};", "a[2]") == Value::of_int(6));
  CHECK(eval_in("", "floor(2.7) + ceil(2.1) + round(2.5)") == Value::of_int(8));
  CHECK(eval_in("", "min(3, 2.5)") == Value::of_real(2.5));
  CHECK(eval_in("", "max(3, 2)") == Value::of_int(3));
  CHECK(eval_in("", "abs(-4)") == Value::of_int(4));
  CHECK(eval_in("", "sqrt(16)") == Value::of_real(4.0));
}

TEST_CASE("functions with loops") {
  const std::string src = R"(
const int N = 4;
int w[N] = {3, 1, 4, 1};
int sum_to(int n) { int s = 0; for (i : 1 .. n) { s = s + w[i - 1]; } return s; }
real avg() { return sum_to(N) / (1.0 * N); }
)";
  CHECK(eval_in(src, "sum_to(3)") == Value::of_int(8));
  CHECK(eval_in(src, "avg()") == Value::of_real(2.25));
}

TEST_CASE("static errors carry positions") {
  CHECK(parse_error("int[0,5] x = 7;") == "initializer out of bounds");
  CHECK(parse_error("int x = 1 / 0;").find("division by zero") != std::string::npos);
  CHECK(parse_error("int x; int x;").find("duplicate") != std::string::npos);
  CHECK(parse_error("int x = y;").find("undeclared") != std::string::npos);
  CHECK(parse_error("int x; int f() { x = 1; return 0; }").find("pure") != std::string::npos);
  CHECK(parse_error("automaton A { location L; }").find("no initial") != std::string::npos);
  CHECK(parse_error("int x = 1.5;").find("real initializer") != std::string::npos);
  CHECK(parse_error("int x = 1 % 2.0;").find("'%'") != std::string::npos);
  try {
    parse_model("int x;\nint y = z;");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 9);
  }
}

TEST_CASE("parser is total on mangled input") {
  const std::string base = std::string(kCoin) + "chan c; broadcast chan b; real r = 1e-3;";
  Rng rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text = base;
    const int edits = 1 + static_cast<int>(rng.uniform_int(4));
    for (int k = 0; k < edits; ++k) {
      const auto pos = static_cast<std::size_t>(rng.uniform_int(text.size()));
      switch (rng.uniform_int(3)) {
        case 0: text.erase(pos, 1 + rng.uniform_int(5)); break;
        case 1: text.insert(pos, 1, static_cast<char>(rng.uniform_int(256))); break;
        default: text[pos] = "{}();,.![]-+*/%=<>?:&|0123456789ex \n"[rng.uniform_int(37)]; break;
      }
    }
    try {
      const AutomatonNetwork net = parse_model(text);
      CHECK(parse_model(to_source(net)) == net);
    } catch (const ParseError&) {
    }
  }
  std::string deep(10000, '(');
  CHECK_THROWS_AS(parse_model("int x = " + deep + ";"), ParseError);
}

TEST_CASE("printer round-trips") {
  const std::string src = R"(
const int K = 3;
int[-5, 5] lo = -5;
real r[2] = {0.1, -2e-300};
bool flag = true;
int big = 2147483647;
chan go;
broadcast chan all;
real f(int a, real b) { if (a > 0) { return b * a; } else if (a == 0) return 0.0; return -b; }
automaton A {
  location S initial;
  location C committed;
  edge S -> C { guard lo < K && A.S; sync go!; update lo = lo + 1, r[0] = f(lo, r[1]); }
  edge C -> S { weight K; }
  edge C -> S { weight 1; update flag = !flag; }
}
automaton B {
  location W init;
  edge W -> W { sync go?; }
  edge W -> W { guard A.C; sync all!; }
}
)";
  const AutomatonNetwork net = parse_model(src);
  const std::string printed = to_source(net);
  CHECK(parse_model(printed) == net);
  CHECK(to_source(parse_model(printed)) == printed);
}

TEST_CASE("weighted branches follow their weights") {
  const AutomatonNetwork net = parse_model(kCoin);
  Rng rng(7);
  const NetState end = run(net, initial_state(net), 10000, nullptr, rng);
  const double heads = static_cast<double>(read(net, end, "heads").i) / 10000.0;
  CHECK(std::fabs(heads - 0.5) <= 0.02);
  CHECK(read(net, end, "heads").i + read(net, end, "tails").i == 10000);
}

TEST_CASE("weights evaluated on the pre-state") {
  const AutomatonNetwork net = parse_model(R"(
int[0, 3] n = 0;
automaton A {
  location L initial;
  edge L -> L { weight 3 - n; update n = n + 1; }
  edge L -> L { weight n; update n = n - 1; }
}
)");
  Rng rng(3);
  NetState s = initial_state(net);
  step(net, s, rng);  // weight 3 vs 0: must increment
  CHECK(read(net, s, "n").i == 1);
  for (int k = 0; k < 500; ++k) step(net, s, rng);
  CHECK(read(net, s, "n").i >= 0);
}

TEST_CASE("zero total weight is a runtime error") {
  const AutomatonNetwork net = parse_model(R"(
int w = 0;
automaton A { location L initial; edge L -> L { weight w; } edge L -> L { weight w; } }
)");
  Rng rng(1);
  NetState s = initial_state(net);
  CHECK_THROWS_AS(step(net, s, rng), RuntimeError);
}

TEST_CASE("bound violation is reported") {
  const AutomatonNetwork net = parse_model(R"(
int[0, 2] n = 0;
automaton A { location L initial; edge L -> L { update n = n + 1; } }
)");
  Rng rng(1);
  NetState s = initial_state(net);
  step(net, s, rng);
  step(net, s, rng);
  try {
    step(net, s, rng);
    FAIL("expected RuntimeError");
  } catch (const RuntimeError& e) {
    CHECK(std::string(e.what()).find("bound violation") != std::string::npos);
  }
}

TEST_CASE("binary and broadcast synchronisation") {
  const AutomatonNetwork net = parse_model(R"(
int got = 0;
chan c;
broadcast chan b;
automaton S {
  location A initial; location B; location C;
  edge A -> B { sync c!; update got = got + 1; }
  edge B -> C { sync b!; }
}
automaton R1 { location X initial; location Y; location Z;
  edge X -> Y { sync c?; update got = got * 10; }
  edge Y -> Z { sync b?; }
}
automaton R2 { location X initial; location Y; edge X -> Y { sync b?; } }
)");
  Rng rng(5);
  NetState s = initial_state(net);
  StepReport r = step(net, s, rng);
  CHECK(r.kind == StepKind::Binary);
  CHECK(read(net, s, "got").i == 10);  // sender update runs first
  r = step(net, s, rng);
  CHECK(r.kind == StepKind::Broadcast);
  CHECK(r.fired.size() == 3);
  CHECK(in_location(net, s, "R2", "Y"));
  r = step(net, s, rng);
  CHECK(r.kind == StepKind::Tick);
  CHECK(s.ticks == 1);
  CHECK(s.steps == 3);
}

TEST_CASE("committed locations take priority") {
  const AutomatonNetwork net = parse_model(R"(
int order = 0;
automaton A { location P initial committed; location Q;
  edge P -> Q { update order = order * 10 + 1; } }
automaton B { location P initial; location Q;
  edge P -> Q { update order = order * 10 + 2; } }
)");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const NetState end = run(net, initial_state(net), 2, nullptr, rng);
    CHECK(read(net, end, "order").i == 12);
  }
}

TEST_CASE("horizon and stop predicates") {
  const AutomatonNetwork net = parse_model(kCoin);
  Rng rng(11);
  CHECK(simulate(net, initial_state(net), 0, nullptr, rng).states.size() == 1);
  const Trace t = simulate(net, initial_state(net), 1000, make_predicate(net, "heads >= 5"), rng);
  CHECK(read(net, t.states.back(), "heads").i == 5);
  CHECK(t.reports.size() + 1 == t.states.size());
}

TEST_CASE("runs are reproducible per seed") {
  const AutomatonNetwork net = parse_model(kCoin);
  Rng a(42), b(42), c(43);
  const Trace ta = simulate(net, initial_state(net), 200, nullptr, a);
  const Trace tb = simulate(net, initial_state(net), 200, nullptr, b);
  const Trace tc = simulate(net, initial_state(net), 200, nullptr, c);
  CHECK(ta.states == tb.states);
  CHECK(ta.states != tc.states);
}

TEST_CASE("successors enumerate every branch") {
  const AutomatonNetwork net = parse_model(kCoin);
  const auto next = successors(net, initial_state(net));
  CHECK(next.size() == 2);
}

TEST_CASE("runtime arithmetic errors") {
  const AutomatonNetwork net = parse_model("int z = 0; int big = 2147483647;");
  const NetState s = initial_state(net);
  CHECK_THROWS_AS(eval_expr(net, parse_expression(net, "1 / z"), s), RuntimeError);
  CHECK_THROWS_AS(eval_expr(net, parse_expression(net, "1.0 / z"), s), RuntimeError);
  CHECK_THROWS_AS(eval_expr(net, parse_expression(net, "big * big * big * big"), s), RuntimeError);
  CHECK_THROWS_AS(eval_expr(net, parse_expression(net, "sqrt(-1)"), s), RuntimeError);
}
