#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selfadapt/engine/model.hpp"
#include "selfadapt/rng.hpp"

namespace selfadapt::engine {

NetState initial_state(const AutomatonNetwork& net);

/// Evaluates an expression against the globals and locations of `state`.
Value eval_expr(const AutomatonNetwork& net, const Expr& expr, const NetState& state);

/// Writes element `index` of global `name`, enforcing declared bounds.
/// Integer values are converted for real variables; the reverse is an error.
void assign(const AutomatonNetwork& net, NetState& state, const std::string& name, Value value,
            int index = 0);
void assign(const AutomatonNetwork& net, NetState& state, const std::string& name,
            std::span<const double> values);

Value read(const AutomatonNetwork& net, const NetState& state, const std::string& name, int index = 0);

bool in_location(const AutomatonNetwork& net, const NetState& state, const std::string& automaton,
                 const std::string& location);

struct Firing {
  int automaton = -1;
  int edge = -1;
  friend bool operator==(const Firing&, const Firing&) = default;
};

enum class StepKind { Internal, Binary, Broadcast, Tick };

/// What happened in one step. Firings are listed in execution order:
/// sender first, then receivers by automaton index.
struct StepReport {
  StepKind kind = StepKind::Tick;
  int channel = -1;
  std::vector<Firing> fired;
  friend bool operator==(const StepReport&, const StepReport&) = default;
};

/// Fires one transition (or ticks) and advances `state` in place.
StepReport step(const AutomatonNetwork& net, NetState& state, Rng& rng);

/// Every possible outcome of one step from `state`: each enabled
/// transition combined with each positive-weight branch choice.
/// Probabilities are dropped, so this is the nondeterministic closure
/// used by exhaustive exploration.
std::vector<std::pair<StepReport, NetState>> successors(const AutomatonNetwork& net,
                                                        const NetState& state);

using StopPredicate = std::function<bool(const NetState&)>;

struct Trace {
  std::vector<NetState> states;    // states.size() == reports.size() + 1
  std::vector<StepReport> reports;
};

/// Runs `step` until `stop` holds or `horizon` steps have been taken.
Trace simulate(const AutomatonNetwork& net, NetState start, std::uint64_t horizon,
               const StopPredicate& stop, Rng& rng);

/// Like simulate, but keeps only the final state.
NetState run(const AutomatonNetwork& net, NetState start, std::uint64_t horizon,
             const StopPredicate& stop, Rng& rng);

/// Predicate from an expression source, e.g. "Network.PacketLoss || done".
StopPredicate make_predicate(const AutomatonNetwork& net, const std::string& expression);

std::string describe(const AutomatonNetwork& net, const StepReport& report);

}  // namespace selfadapt::engine
