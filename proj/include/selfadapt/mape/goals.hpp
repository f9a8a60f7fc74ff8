#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfadapt/smc/smc.hpp"

namespace selfadapt::mape {

class GoalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GoalKind { Satisfaction, Optimization };
enum class Comparator { Less, LessEqual, Greater, GreaterEqual };
enum class Direction { Minimize, Maximize };

struct Goal {
  GoalKind kind = GoalKind::Satisfaction;
  std::string quality;
  Comparator comparator = Comparator::Less;
  double threshold = 0.0;
  Direction direction = Direction::Minimize;
  int rank = 0;  // lower ranks are applied first
  friend bool operator==(const Goal&, const Goal&) = default;
};

/// Goals sorted by rank. Throws GoalError if empty, if ranks repeat, if a
/// threshold is not finite or if more than one optimization goal is given.
std::vector<Goal> normalize_goals(std::vector<Goal> goals);

/// {"goals": [{"quality", "type": "satisfaction"|"optimization",
///   "comparator": "<"|"<="|">"|">=", "threshold", "direction": "minimize"|"maximize", "rank"}]}
std::vector<Goal> parse_goals(const std::string& json_text);
/// Same format, entries in file order and not yet normalized.
std::vector<Goal> parse_goal_list(const std::string& json_text);
std::vector<Goal> load_goals(const std::string& path);
std::string goals_to_json(const std::vector<Goal>& goals);

/// Packet loss below 10 % (as a fraction), then minimal energy.
std::vector<Goal> default_iot_goals();
/// Latency below 5 % of the cycle time, ranked between the two defaults.
Goal latency_goal();

/// Verification results of one option, keyed by quality name.
using Results = std::map<std::string, smc::Estimate>;

/// Satisfaction test on the conservative side of the interval: the upper
/// bound for < and <=, the lower bound for > and >=.
bool satisfies(const Goal& g, const smc::Estimate& e);

/// Pairwise form of an optimization goal: true if `a` is strictly better.
bool better(const Goal& g, const smc::Estimate& a, const smc::Estimate& b);

struct Selection {
  std::optional<std::size_t> chosen;   // empty: no compliant option
  std::vector<std::size_t> compliant;  // indices passing every satisfaction goal
  std::string diagnostic;
};

/// Filters by every satisfaction goal in rank order, then picks the
/// optimization winner by point estimate (first in order on ties). An
/// option lacking a result for a goal's quality is not eligible. Without an
/// optimization goal the first compliant option wins.
Selection select_option(const std::vector<Goal>& goals, const std::vector<Results>& results);

}  // namespace selfadapt::mape
