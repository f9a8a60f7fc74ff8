#include "selfadapt/verify/verify.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "selfadapt/engine/parser.hpp"

namespace selfadapt::verify {

using engine::AutomatonNetwork;
using engine::NetState;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxSamples = 10;
constexpr std::size_t kMaxOptions = 6;
constexpr std::size_t kMaxQualities = 3;
constexpr std::size_t kMaxGoals = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw VerifyError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void merge_values(std::map<std::string, double>& into, const json& j) {
  for (const auto& [k, v] : j.items()) into[k] = v.get<double>();
}

void merge_option(OptionScript& o, const json& j) {
  if (j.contains("verified")) o.verified = j.at("verified").get<bool>();
  if (j.contains("hi")) merge_values(o.hi, j.at("hi"));
  if (j.contains("point")) merge_values(o.point, j.at("point"));
}

void merge_sample(StubSample& s, const json& j) {
  if (j.contains("measured")) merge_values(s.measured, j.at("measured"));
  if (!j.contains("options")) return;
  const json& opts = j.at("options");
  if (opts.is_array()) {
    s.options.clear();
    for (const json& o : opts) {
      OptionScript script;
      merge_option(script, o);
      s.options.push_back(script);
    }
    return;
  }
  for (const auto& [k, v] : opts.items()) {
    const std::size_t idx = std::stoul(k);
    if (idx >= s.options.size()) s.options.resize(idx + 1);
    merge_option(s.options[idx], v);
  }
}

void check_sample(const StubScenario& sc, const StubSample& s, std::size_t index) {
  const std::string where = "sample " + std::to_string(index);
  if (s.options.size() > kMaxOptions) throw VerifyError(where + ": more than 6 options");
  for (const std::string& q : sc.qualities) {
    if (s.measured.count(q) == 0) throw VerifyError(where + ": no measured value for '" + q + "'");
    for (std::size_t o = 0; o < s.options.size(); ++o) {
      if (s.options[o].verified && s.options[o].hi.count(q) == 0) {
        throw VerifyError(where + ", option " + std::to_string(o) + ": no estimate for '" + q + "'");
      }
    }
  }
}

std::string fmt_value(const engine::Value& v) {
  if (!v.is_real()) return std::to_string(v.i);
  std::ostringstream out;
  out << v.r;
  return out.str();
}

struct StateHash {
  std::size_t operator()(const NetState& s) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ULL; };
    for (int l : s.locations) mix(static_cast<std::uint64_t>(l));
    for (const engine::Value& v : s.store) {
      if (v.is_real()) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v.r, sizeof bits);
        mix(bits);
      } else {
        mix(static_cast<std::uint64_t>(v.i));
      }
    }
    return static_cast<std::size_t>(h);
  }
};

// Exploration keys ignore the step/tick counters.
NetState key_of(NetState s) {
  s.steps = 0;
  s.ticks = 0;
  return s;
}

std::string describe_state(const AutomatonNetwork& net, const NetState& s) {
  std::string out;
  for (std::size_t a = 0; a < net.automata.size(); ++a) {
    const auto& aut = net.automata[a];
    out += (a > 0 ? " " : "") + aut.name + "." + aut.locations[static_cast<std::size_t>(s.locations[a])].name;
  }
  return out;
}

std::string describe_changes(const AutomatonNetwork& net, const NetState& before, const NetState& after) {
  std::string out;
  for (const auto& d : net.variables) {
    if (d.is_const) continue;
    for (int i = 0; i < d.size; ++i) {
      const auto k = static_cast<std::size_t>(d.offset + i);
      if (before.store[k] == after.store[k]) continue;
      out += (out.empty() ? "" : ", ") + d.name + (d.is_array ? "[" + std::to_string(i) + "]" : "") + "=" +
             fmt_value(after.store[k]);
    }
  }
  return out;
}

struct Graph {
  std::vector<NetState> states;
  std::vector<std::int64_t> parent;
  std::vector<engine::StepReport> via;
  std::vector<std::vector<std::uint32_t>> succ;
};

std::vector<std::string> path_lines(const AutomatonNetwork& net, const Graph& g, std::uint32_t target) {
  std::vector<std::uint32_t> chain;
  for (std::int64_t id = target; id >= 0; id = g.parent[static_cast<std::size_t>(id)]) {
    chain.push_back(static_cast<std::uint32_t>(id));
  }
  std::reverse(chain.begin(), chain.end());
  std::vector<std::string> lines;
  lines.push_back("0: " + describe_state(net, g.states[chain[0]]));
  for (std::size_t k = 1; k < chain.size(); ++k) {
    const NetState& prev = g.states[chain[k - 1]];
    const NetState& cur = g.states[chain[k]];
    std::string line = std::to_string(k) + ": " + engine::describe(net, g.via[chain[k]]);
    const std::string changes = describe_changes(net, prev, cur);
    if (!changes.empty()) line += " {" + changes + "}";
    lines.push_back(line);
  }
  return lines;
}

engine::StopPredicate compile(const AutomatonNetwork& net, const std::string& expr) {
  try {
    return engine::make_predicate(net, expr);
  } catch (const engine::ParseError& e) {
    throw VerifyError("bad property expression '" + expr + "': " + e.what());
  }
}

const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& faults() {
  static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> table = {
      {"planner-max-energy", {{"return a < b;", "return a > b;"}}},
      {"planner-ignores-goals", {{"if (compliant(o) == 1) {", "if (1 == 1) {"}}},
      {"analyzer-never-adapts", {{"guard violated() == 1;", "guard violated() == 2;"}}},
  };
  return table;
}

}  // namespace

StubScenario parse_stub_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw VerifyError(std::string("malformed stub scenario: ") + e.what());
  }
  StubScenario sc;
  try {
    sc.name = doc.value("name", "stub");
    sc.rounds = doc.value("rounds", 1);
    sc.qualities = doc.at("qualities").get<std::vector<std::string>>();
    StubSample base;
    if (doc.contains("base")) merge_sample(base, doc.at("base"));
    for (const json& m : doc.value("samples", json::array())) {
      StubSample s = base;
      merge_sample(s, m);
      for (auto& o : s.options) {
        for (const auto& [q, v] : o.hi) o.point.emplace(q, v);
      }
      sc.samples.push_back(std::move(s));
    }
    if (doc.contains("goals")) sc.goals = mape::parse_goals(json{{"goals", doc.at("goals")}}.dump());
  } catch (const json::exception& e) {
    throw VerifyError(std::string("malformed stub scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw VerifyError(std::string("malformed stub scenario: ") + e.what());
  }
  if (sc.samples.size() > kMaxSamples) throw VerifyError("stub scenario holds at most 10 samples");
  if (sc.samples.empty() && sc.rounds > 0) throw VerifyError("rounds > 0 needs at least one sample");
  if (sc.rounds < 0 || sc.rounds > static_cast<int>(kMaxSamples)) throw VerifyError("rounds must be in 0..10");
  if (sc.qualities.empty() || sc.qualities.size() > kMaxQualities) throw VerifyError("stub scenario needs 1 to 3 qualities");
  for (std::size_t i = 0; i < sc.samples.size(); ++i) check_sample(sc, sc.samples[i], i);
  return sc;
}

StubScenario load_stub_scenario(const std::string& path) { return parse_stub_scenario(read_file(path)); }

std::vector<Property> parse_properties(const std::string& text) {
  std::vector<Property> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw VerifyError("line " + std::to_string(lineno) + ": expected 'never:' or 'leadsto:'");
    const std::string kind = trim(line.substr(0, colon));
    std::string body = trim(line.substr(colon + 1));
    Property p;
    p.text = line;
    if (kind == "never") {
      p.kind = PropertyKind::NeverReach;
      p.premise = body;
    } else if (kind == "leadsto") {
      p.kind = PropertyKind::LeadsTo;
      const auto arrow = body.find("-->");
      if (arrow == std::string::npos) throw VerifyError("line " + std::to_string(lineno) + ": leadsto needs '-->'");
      p.premise = trim(body.substr(0, arrow));
      std::string rest = trim(body.substr(arrow + 3));
      if (const auto w = rest.rfind(" within "); w != std::string::npos) {
        const std::string n = trim(rest.substr(w + 8));
        char* end = nullptr;
        const unsigned long long v = std::strtoull(n.c_str(), &end, 10);
        if (n.empty() || *end != '\0') throw VerifyError("line " + std::to_string(lineno) + ": bad bound '" + n + "'");
        p.bound = v;
        rest = trim(rest.substr(0, w));
      }
      p.conclusion = rest;
    } else {
      throw VerifyError("line " + std::to_string(lineno) + ": unknown property kind '" + kind + "'");
    }
    if (p.premise.empty() || (p.kind == PropertyKind::LeadsTo && p.conclusion.empty())) {
      throw VerifyError("line " + std::to_string(lineno) + ": empty expression");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Property> load_properties(const std::string& path) { return parse_properties(read_file(path)); }

std::vector<mape::Goal> default_stub_goals() { return mape::default_iot_goals(); }

NetState instantiate(const AutomatonNetwork& net, const StubScenario& s, const std::vector<mape::Goal>& goals_in) {
  const std::vector<mape::Goal> goals = mape::normalize_goals(goals_in);
  if (goals.size() > kMaxGoals) throw VerifyError("the loop model holds at most 3 goals");
  auto slot = [&](const std::string& q) {
    const auto it = std::find(s.qualities.begin(), s.qualities.end(), q);
    if (it == s.qualities.end()) throw VerifyError("goal quality '" + q + "' is not scripted in " + s.name);
    return static_cast<std::size_t>(it - s.qualities.begin());
  };
  NetState st = engine::initial_state(net);
  std::vector<double> gq(kMaxGoals, 0.0), gk(kMaxGoals, 0.0), gt(kMaxGoals, 0.0);
  for (std::size_t g = 0; g < goals.size(); ++g) {
    gq[g] = static_cast<double>(slot(goals[g].quality));
    if (goals[g].kind == mape::GoalKind::Satisfaction) {
      if (goals[g].comparator != mape::Comparator::Less) throw VerifyError("the loop model supports '<' goals only");
      gk[g] = 0;
      gt[g] = goals[g].threshold;
    } else {
      gk[g] = goals[g].direction == mape::Direction::Minimize ? 1 : 2;
    }
  }
  const std::size_t nq = kMaxQualities, no = kMaxOptions;
  std::vector<double> quality(kMaxSamples * nq, 0.0), count(kMaxSamples, 0.0), verified(kMaxSamples * no, 0.0),
      hi(kMaxSamples * no * nq, 0.0), point(kMaxSamples * no * nq, 0.0);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const StubSample& smp = s.samples[i];
    count[i] = static_cast<double>(smp.options.size());
    for (std::size_t q = 0; q < s.qualities.size(); ++q) quality[i * nq + q] = smp.measured.at(s.qualities[q]);
    for (std::size_t o = 0; o < smp.options.size(); ++o) {
      const OptionScript& os = smp.options[o];
      verified[i * no + o] = os.verified ? 1 : 0;
      if (!os.verified) continue;
      for (std::size_t q = 0; q < s.qualities.size(); ++q) {
        hi[(i * no + o) * nq + q] = os.hi.at(s.qualities[q]);
        point[(i * no + o) * nq + q] = os.point.at(s.qualities[q]);
      }
    }
  }
  try {
    engine::assign(net, st, "nGoals", engine::Value::of_int(static_cast<std::int64_t>(goals.size())));
    engine::assign(net, st, "goalQuality", gq);
    engine::assign(net, st, "goalKind", gk);
    engine::assign(net, st, "goalThreshold", gt);
    engine::assign(net, st, "nSamples", engine::Value::of_int(static_cast<std::int64_t>(s.samples.size())));
    engine::assign(net, st, "rounds", engine::Value::of_int(s.rounds));
    engine::assign(net, st, "sampleQuality", quality);
    engine::assign(net, st, "sampleOptions", count);
    engine::assign(net, st, "sampleVerified", verified);
    engine::assign(net, st, "sampleHi", hi);
    engine::assign(net, st, "samplePoint", point);
  } catch (const engine::RuntimeError& e) {
    throw VerifyError(std::string("model does not fit the stub interface: ") + e.what());
  }
  return st;
}

Exploration explore(const AutomatonNetwork& net, const NetState& start, const std::vector<Property>& properties,
                    const ExploreOptions& opts) {
  std::vector<engine::StopPredicate> premise, conclusion;
  for (const Property& p : properties) {
    premise.push_back(compile(net, p.premise));
    conclusion.push_back(p.kind == PropertyKind::LeadsTo ? compile(net, p.conclusion) : engine::StopPredicate{});
  }

  Exploration out;
  Graph g;
  std::unordered_map<NetState, std::uint32_t, StateHash> index;
  std::vector<std::uint64_t> depth;
  std::vector<std::vector<bool>> loc_seen(net.automata.size()), edge_seen(net.automata.size());
  for (std::size_t a = 0; a < net.automata.size(); ++a) {
    loc_seen[a].assign(net.automata[a].locations.size(), false);
    edge_seen[a].assign(net.automata[a].edges.size(), false);
  }

  auto add = [&](NetState s, std::int64_t parent, engine::StepReport via, std::uint64_t d) -> std::int64_t {
    s = key_of(std::move(s));
    if (auto it = index.find(s); it != index.end()) return it->second;
    if (g.states.size() >= opts.max_states) return -1;
    const auto id = static_cast<std::uint32_t>(g.states.size());
    for (std::size_t a = 0; a < s.locations.size(); ++a) loc_seen[a][static_cast<std::size_t>(s.locations[a])] = true;
    index.emplace(s, id);
    g.states.push_back(std::move(s));
    g.parent.push_back(parent);
    g.via.push_back(std::move(via));
    g.succ.emplace_back();
    depth.push_back(d);
    return id;
  };

  add(start, -1, {}, 0);
  try {
    for (std::size_t id = 0; id < g.states.size() && !out.budget_exceeded; ++id) {
      if (opts.depth && depth[id] >= *opts.depth) continue;
      const NetState current = g.states[id];
      for (auto& [report, next] : engine::successors(net, current)) {
        for (const engine::Firing& f : report.fired) {
          edge_seen[static_cast<std::size_t>(f.automaton)][static_cast<std::size_t>(f.edge)] = true;
        }
        const std::int64_t nid = add(std::move(next), static_cast<std::int64_t>(id), report, depth[id] + 1);
        if (nid < 0) {
          out.budget_exceeded = true;
          break;
        }
        g.succ[id].push_back(static_cast<std::uint32_t>(nid));
        ++out.transitions;
      }
    }
  } catch (const engine::RuntimeError& e) {
    throw VerifyError(std::string("model error during exploration: ") + e.what());
  }
  out.states = g.states.size();

  const std::size_t n = g.states.size();
  for (std::size_t p = 0; p < properties.size(); ++p) {
    Verdict v;
    v.property = properties[p];
    std::vector<bool> in_premise(n, false);
    for (std::size_t i = 0; i < n; ++i) in_premise[i] = premise[p](g.states[i]);
    if (properties[p].kind == PropertyKind::NeverReach) {
      const auto bad = std::find(in_premise.begin(), in_premise.end(), true);
      v.holds = bad == in_premise.end();
      v.decided = !v.holds || !out.budget_exceeded;
      if (!v.holds) v.counterexample = path_lines(net, g, static_cast<std::uint32_t>(bad - in_premise.begin()));
      out.verdicts.push_back(std::move(v));
      continue;
    }
    // rank[i]: every path from i reaches the conclusion within rank[i] steps
    constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::uint64_t> rank(n, kNever);
    std::vector<std::size_t> pending(n, 0);
    std::vector<std::vector<std::uint32_t>> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      pending[i] = g.succ[i].size();
      for (std::uint32_t s : g.succ[i]) pred[s].push_back(static_cast<std::uint32_t>(i));
    }
    std::deque<std::uint32_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
      if (conclusion[p](g.states[i])) {
        rank[i] = 0;
        queue.push_back(static_cast<std::uint32_t>(i));
      }
    }
    while (!queue.empty()) {
      const std::uint32_t s = queue.front();
      queue.pop_front();
      for (std::uint32_t q : pred[s]) {
        if (rank[q] != kNever || pending[q] == 0) continue;
        // leaves cut off by depth or budget never count as reaching the goal
        if (--pending[q] == 0 && !(opts.depth && depth[q] >= *opts.depth)) {
          rank[q] = rank[s] + 1;
          queue.push_back(q);
        }
      }
    }
    const std::uint64_t bound = properties[p].bound.value_or(kNever - 1);
    v.holds = true;
    for (std::size_t i = 0; i < n && v.holds; ++i) {
      if (!in_premise[i] || rank[i] <= bound) continue;
      v.holds = false;
      v.counterexample = path_lines(net, g, static_cast<std::uint32_t>(i));
      v.counterexample.push_back("-- premise holds; a continuation avoids the conclusion:");
      std::uint32_t cur = static_cast<std::uint32_t>(i);
      std::set<std::uint32_t> seen{cur};
      for (std::uint64_t k = 0; k < std::min<std::uint64_t>(bound, 64); ++k) {
        std::optional<std::uint32_t> next;
        for (std::uint32_t s : g.succ[cur]) {
          if (rank[s] == kNever || rank[s] > bound - k - 1) {
            next = s;
            break;
          }
        }
        if (!next) break;
        std::string line = "+" + std::to_string(k + 1) + ": " + engine::describe(net, g.via[*next]);
        if (g.parent[*next] != static_cast<std::int64_t>(cur)) {
          line = "+" + std::to_string(k + 1) + ": -> " + describe_state(net, g.states[*next]);
        }
        v.counterexample.push_back(line);
        if (!seen.insert(*next).second) {
          v.counterexample.push_back("(cycle)");
          break;
        }
        cur = *next;
      }
    }
    v.decided = !v.holds || !out.budget_exceeded;
    out.verdicts.push_back(std::move(v));
  }

  for (std::size_t a = 0; a < net.automata.size(); ++a) {
    AutomatonCoverage c;
    c.name = net.automata[a].name;
    c.locations_total = loc_seen[a].size();
    c.edges_total = edge_seen[a].size();
    for (std::size_t l = 0; l < loc_seen[a].size(); ++l) {
      if (loc_seen[a][l]) {
        ++c.locations_visited;
      } else {
        c.missed_locations.push_back(net.automata[a].locations[l].name);
      }
    }
    for (std::size_t e = 0; e < edge_seen[a].size(); ++e) {
      if (edge_seen[a][e]) {
        ++c.edges_visited;
      } else {
        c.missed_edges.push_back(e);
      }
    }
    out.coverage.push_back(std::move(c));
  }
  if (opts.keep_states) out.visited = std::move(g.states);
  return out;
}

std::string coverage_report(const Exploration& e) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  for (const AutomatonCoverage& c : e.coverage) {
    const double lp = c.locations_total == 0 ? 100.0 : 100.0 * c.locations_visited / c.locations_total;
    const double ep = c.edges_total == 0 ? 100.0 : 100.0 * c.edges_visited / c.edges_total;
    out << c.name << ": locations " << c.locations_visited << "/" << c.locations_total << " (" << lp << "%), edges "
        << c.edges_visited << "/" << c.edges_total << " (" << ep << "%)\n";
  }
  return out.str();
}

std::vector<AutomatonCoverage> merge_coverage(const AutomatonNetwork& net, const std::vector<Exploration>& runs) {
  std::vector<AutomatonCoverage> out;
  for (std::size_t a = 0; a < net.automata.size(); ++a) {
    const auto& aut = net.automata[a];
    std::set<std::string> missed;
    for (const auto& l : aut.locations) missed.insert(l.name);
    std::set<std::size_t> missed_edges;
    for (std::size_t e = 0; e < aut.edges.size(); ++e) missed_edges.insert(e);
    for (const Exploration& run : runs) {
      const AutomatonCoverage& rc = run.coverage.at(a);
      const std::set<std::string> m(rc.missed_locations.begin(), rc.missed_locations.end());
      const std::set<std::size_t> me(rc.missed_edges.begin(), rc.missed_edges.end());
      std::erase_if(missed, [&](const std::string& x) { return m.count(x) == 0; });
      std::erase_if(missed_edges, [&](std::size_t x) { return me.count(x) == 0; });
    }
    AutomatonCoverage c;
    c.name = aut.name;
    c.locations_total = aut.locations.size();
    c.edges_total = aut.edges.size();
    c.missed_locations.assign(missed.begin(), missed.end());
    c.missed_edges.assign(missed_edges.begin(), missed_edges.end());
    c.locations_visited = c.locations_total - missed.size();
    c.edges_visited = c.edges_total - missed_edges.size();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> fault_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : faults()) out.push_back(name);
  return out;
}

std::string inject_fault(const std::string& model_source, const std::string& fault) {
  const auto it = faults().find(fault);
  if (it == faults().end()) throw VerifyError("unknown fault '" + fault + "'");
  std::string out = model_source;
  for (const auto& [from, to] : it->second) {
    const auto pos = out.find(from);
    if (pos == std::string::npos) throw VerifyError("fault '" + fault + "' does not apply to this model");
    out.replace(pos, from.size(), to);
  }
  return out;
}

std::vector<std::string> planner_differential(const AutomatonNetwork& net, const StubScenario& s,
                                              const std::vector<mape::Goal>& goals) {
  std::vector<std::string> out;
  const NetState base = instantiate(net, s, goals);
  const engine::Expr select = engine::parse_expression(net, "selectOption()");
  const std::vector<mape::Goal> sorted = mape::normalize_goals(goals);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    NetState st = base;
    engine::assign(net, st, "sample", engine::Value::of_int(static_cast<std::int64_t>(i)));
    const std::int64_t model = engine::eval_expr(net, select, st).i;
    std::vector<mape::Results> results;
    for (const OptionScript& o : s.samples[i].options) {
      mape::Results r;
      if (o.verified) {
        for (const std::string& q : s.qualities) {
          smc::Estimate e;
          e.point = o.point.at(q);
          e.hi = o.hi.at(q);
          e.lo = e.point - (e.hi - e.point);
          e.runs = 1;
          r[q] = e;
        }
      }
      results.push_back(std::move(r));
    }
    const mape::Selection sel = mape::select_option(sorted, results);
    const std::int64_t native = sel.chosen ? static_cast<std::int64_t>(*sel.chosen) : -1;
    if (native != model) {
      out.push_back(s.name + " sample " + std::to_string(i) + ": model chose " + std::to_string(model) +
                    ", native chose " + std::to_string(native));
    }
  }
  return out;
}

}  // namespace selfadapt::verify
