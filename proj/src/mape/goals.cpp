#include "selfadapt/mape/goals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace selfadapt::mape {

using nlohmann::json;

namespace {

const char* comparator_text(Comparator c) {
  switch (c) {
    case Comparator::Less: return "<";
    case Comparator::LessEqual: return "<=";
    case Comparator::Greater: return ">";
    case Comparator::GreaterEqual: return ">=";
  }
  return "?";
}

Comparator parse_comparator(const std::string& s) {
  if (s == "<") return Comparator::Less;
  if (s == "<=") return Comparator::LessEqual;
  if (s == ">") return Comparator::Greater;
  if (s == ">=") return Comparator::GreaterEqual;
  throw GoalError("unknown comparator '" + s + "'");
}

// Thresholds may be written as strings so that "nan" and "inf" survive the
// round trip through JSON (and then fail validation).
double parse_threshold(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw GoalError("malformed threshold '" + s + "'");
    return v;
  }
  throw GoalError("malformed threshold");
}

}  // namespace

std::vector<Goal> normalize_goals(std::vector<Goal> goals) {
  if (goals.empty()) throw GoalError("no goals");
  std::set<int> ranks;
  int optimization = 0;
  for (const Goal& g : goals) {
    if (g.quality.empty()) throw GoalError("goal without quality");
    if (!ranks.insert(g.rank).second) throw GoalError("duplicate goal rank " + std::to_string(g.rank));
    if (g.kind == GoalKind::Satisfaction && !std::isfinite(g.threshold)) {
      throw GoalError("threshold of goal on '" + g.quality + "' is not finite");
    }
    if (g.kind == GoalKind::Optimization) ++optimization;
  }
  if (optimization > 1) throw GoalError("more than one optimization goal");
  std::sort(goals.begin(), goals.end(), [](const Goal& a, const Goal& b) { return a.rank < b.rank; });
  return goals;
}

std::vector<Goal> parse_goal_list(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw GoalError(std::string("malformed goals: ") + e.what());
  }
  std::vector<Goal> goals;
  try {
    for (const json& j : doc.at("goals")) {
      Goal g;
      g.quality = j.at("quality").get<std::string>();
      g.rank = j.at("rank").get<int>();
      const std::string type = j.at("type").get<std::string>();
      if (type == "satisfaction") {
        g.kind = GoalKind::Satisfaction;
        g.comparator = parse_comparator(j.at("comparator").get<std::string>());
        g.threshold = parse_threshold(j.at("threshold"));
      } else if (type == "optimization") {
        g.kind = GoalKind::Optimization;
        const std::string dir = j.value("direction", "minimize");
        if (dir != "minimize" && dir != "maximize") throw GoalError("unknown direction '" + dir + "'");
        g.direction = dir == "minimize" ? Direction::Minimize : Direction::Maximize;
      } else {
        throw GoalError("unknown goal type '" + type + "'");
      }
      goals.push_back(g);
    }
  } catch (const json::exception& e) {
    throw GoalError(std::string("malformed goal: ") + e.what());
  }
  return goals;
}

std::vector<Goal> parse_goals(const std::string& json_text) { return normalize_goals(parse_goal_list(json_text)); }

std::vector<Goal> load_goals(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GoalError("cannot open goals file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_goals(buf.str());
}

std::string goals_to_json(const std::vector<Goal>& goals) {
  json doc;
  doc["goals"] = json::array();
  for (const Goal& g : goals) {
    json j{{"quality", g.quality}, {"rank", g.rank}};
    if (g.kind == GoalKind::Satisfaction) {
      j["type"] = "satisfaction";
      j["comparator"] = comparator_text(g.comparator);
      if (std::isfinite(g.threshold)) {
        j["threshold"] = g.threshold;
      } else {
        j["threshold"] = std::isnan(g.threshold) ? "nan" : (g.threshold > 0 ? "inf" : "-inf");
      }
    } else {
      j["type"] = "optimization";
      j["direction"] = g.direction == Direction::Minimize ? "minimize" : "maximize";
    }
    doc["goals"].push_back(j);
  }
  return doc.dump(2);
}

std::vector<Goal> default_iot_goals() {
  Goal loss{GoalKind::Satisfaction, "packetLoss", Comparator::Less, 0.10, Direction::Minimize, 10};
  Goal energy{GoalKind::Optimization, "energy", Comparator::Less, 0.0, Direction::Minimize, 20};
  return {loss, energy};
}

Goal latency_goal() { return {GoalKind::Satisfaction, "latency", Comparator::Less, 5.0, Direction::Minimize, 15}; }

bool satisfies(const Goal& g, const smc::Estimate& e) {
  switch (g.comparator) {
    case Comparator::Less: return e.hi < g.threshold;
    case Comparator::LessEqual: return e.hi <= g.threshold;
    case Comparator::Greater: return e.lo > g.threshold;
    case Comparator::GreaterEqual: return e.lo >= g.threshold;
  }
  return false;
}

bool better(const Goal& g, const smc::Estimate& a, const smc::Estimate& b) {
  return g.direction == Direction::Minimize ? a.point < b.point : a.point > b.point;
}

Selection select_option(const std::vector<Goal>& goals, const std::vector<Results>& results) {
  Selection sel;
  for (std::size_t i = 0; i < results.size(); ++i) sel.compliant.push_back(i);
  const Goal* optimize = nullptr;
  for (const Goal& g : goals) {
    if (g.kind == GoalKind::Optimization) {
      optimize = &g;
      continue;
    }
    std::vector<std::size_t> kept;
    for (std::size_t i : sel.compliant) {
      const auto it = results[i].find(g.quality);
      if (it != results[i].end() && satisfies(g, it->second)) kept.push_back(i);
    }
    sel.compliant = std::move(kept);
  }
  if (optimize != nullptr) {
    std::vector<std::size_t> kept;
    for (std::size_t i : sel.compliant) {
      if (results[i].count(optimize->quality) != 0) kept.push_back(i);
    }
    sel.compliant = std::move(kept);
  }
  if (sel.compliant.empty()) {
    sel.diagnostic = results.empty() ? "no verified options" : "no option satisfies the goals";
    return sel;
  }
  std::size_t best = sel.compliant.front();
  if (optimize != nullptr) {
    for (std::size_t i : sel.compliant) {
      if (better(*optimize, results[i].at(optimize->quality), results[best].at(optimize->quality))) best = i;
    }
  }
  sel.chosen = best;
  return sel;
}

}  // namespace selfadapt::mape
