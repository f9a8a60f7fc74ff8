#include "selfadapt/evolve/evolve.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "selfadapt/engine/parser.hpp"
#include "selfadapt/models.hpp"

namespace selfadapt::evolve {

using nlohmann::json;

namespace {

struct CatalogEntry {
  qmodels::EstimatorKind kind;
  qmodels::IotModel (*make)();
};

const std::map<std::string, CatalogEntry>& catalog() {
  using qmodels::EstimatorKind;
  using qmodels::Form;
  static const std::map<std::string, CatalogEntry> table = {
      {"deltaiot-packet-loss", {EstimatorKind::Probability, [] { return qmodels::packet_loss_model(Form::Native); }}},
      {"deltaiot-packet-loss-dsl", {EstimatorKind::Probability, [] { return qmodels::packet_loss_model(Form::Dsl); }}},
      {"deltaiot-energy", {EstimatorKind::Mean, [] { return qmodels::energy_model(Form::Native); }}},
      {"deltaiot-energy-dsl", {EstimatorKind::Mean, [] { return qmodels::energy_model(Form::Dsl); }}},
      {"deltaiot-latency", {EstimatorKind::Mean, [] { return qmodels::latency_model(Form::Native); }}},
      {"deltaiot-latency-dsl", {EstimatorKind::Mean, [] { return qmodels::latency_model(Form::Dsl); }}},
  };
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EvolveError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kind_text(qmodels::EstimatorKind k) {
  return k == qmodels::EstimatorKind::Probability ? "probability" : "mean";
}

}  // namespace

std::vector<std::string> model_catalog() {
  std::vector<std::string> out;
  for (const auto& [id, _] : catalog()) out.push_back(id);
  return out;
}

UpdatePackage parse_package(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw EvolveError(std::string("malformed package: ") + e.what());
  }
  const std::filesystem::path base(base_dir);
  UpdatePackage pkg;
  try {
    pkg.name = doc.value("name", "update");
    if (doc.contains("goals")) pkg.goals = mape::parse_goal_list(json{{"goals", doc.at("goals")}}.dump());
    for (const json& q : doc.value("qualities", json::array())) {
      QualitySpec s;
      s.name = q.at("name").get<std::string>();
      s.model = q.at("model").get<std::string>();
      const std::string est = q.at("estimator").get<std::string>();
      if (est != "probability" && est != "mean") throw EvolveError("unknown estimator '" + est + "'");
      s.kind = est == "probability" ? qmodels::EstimatorKind::Probability : qmodels::EstimatorKind::Mean;
      pkg.qualities.push_back(s);
    }
    if (doc.contains("budgetTicks")) pkg.budget_ticks = doc.at("budgetTicks").get<std::uint64_t>();
    for (const json& p : doc.value("scenarios", json::array())) {
      pkg.scenarios.push_back(verify::load_stub_scenario((base / p.get<std::string>()).string()));
    }
    if (doc.contains("properties")) {
      pkg.properties = verify::load_properties((base / doc.at("properties").get<std::string>()).string());
    }
  } catch (const json::exception& e) {
    throw EvolveError(std::string("malformed package: ") + e.what());
  } catch (const mape::GoalError& e) {
    throw EvolveError(std::string("malformed package: ") + e.what());
  } catch (const verify::VerifyError& e) {
    throw EvolveError(std::string("malformed package: ") + e.what());
  }
  return pkg;
}

UpdatePackage load_package(const std::string& path) {
  return parse_package(read_file(path), std::filesystem::path(path).parent_path().string());
}

ValidationSuite load_suite(const std::string& stub_dir) {
  ValidationSuite s;
  const std::filesystem::path dir(stub_dir);
  for (const char* name : {"adaptation-needed", "no-adaptation", "failsafe", "partial"}) {
    s.scenarios.push_back(verify::load_stub_scenario((dir / (std::string(name) + ".json")).string()));
  }
  s.properties = verify::load_properties((dir / "mape.props").string());
  return s;
}

std::string ValidationReport::text() const {
  std::ostringstream out;
  for (const PropertyResult& r : results) {
    out << (r.holds ? "PASS " : "FAIL ") << r.scenario << ": " << r.property << "\n";
    for (const std::string& l : r.counterexample) out << "    " << l << "\n";
  }
  for (const std::string& d : diagnostics) out << "note " << d << "\n";
  out << (passed ? "validation passed" : "validation failed") << "\n";
  return out.str();
}

GoalManager::GoalManager(const deltaiot::Topology& topology, std::vector<mape::Goal> goals,
                         qmodels::IotRegistry registry, ValidationSuite suite)
    : topology_(&topology), goals_(std::move(goals)), registry_(std::move(registry)), suite_(std::move(suite)) {}

StagedHandle GoalManager::stage(UpdatePackage pkg) {
  if (pkg.empty()) throw EvolveError("empty update");
  for (const QualitySpec& q : pkg.qualities) {
    const auto it = catalog().find(q.model);
    if (q.name.empty()) throw EvolveError("quality without a name");
    if (it == catalog().end()) throw EvolveError("unknown quality model '" + q.model + "'");
    if (it->second.kind != q.kind) {
      throw EvolveError("model '" + q.model + "' is a " + kind_text(it->second.kind) + " estimator");
    }
  }
  std::lock_guard lock(mu_);
  if (staged_) throw EvolveError("another update is already staged");
  if (mailbox_) throw EvolveError("an activated update has not been applied yet");
  staged_ = Staged{next_id_++, std::move(pkg), std::nullopt};
  return {staged_->id};
}

GoalManager::Staged& GoalManager::staged_for(StagedHandle h) {
  if (!staged_ || staged_->id != h.id) throw EvolveError("no such staged update");
  return *staged_;
}

GoalManager::Update GoalManager::build(const UpdatePackage& pkg) const {
  Update u;
  u.name = pkg.name;
  u.goals = goals_;
  for (const mape::Goal& g : pkg.goals) {
    auto same = std::find_if(u.goals.begin(), u.goals.end(),
                             [&](const mape::Goal& live) { return live.quality == g.quality && live.kind == g.kind; });
    if (same != u.goals.end()) {
      *same = g;
    } else {
      u.goals.push_back(g);
    }
  }
  for (const auto& m : registry_.models()) {
    const bool replaced = std::any_of(pkg.qualities.begin(), pkg.qualities.end(),
                                      [&](const QualitySpec& q) { return q.name == m.name; });
    if (!replaced) u.registry.add(m);
  }
  for (const QualitySpec& q : pkg.qualities) {
    qmodels::IotModel m = catalog().at(q.model).make();
    m.name = q.name;
    u.registry.add(std::move(m));
  }
  u.budget_ticks = pkg.budget_ticks;
  return u;
}

ValidationReport GoalManager::validate(StagedHandle h, std::uint64_t seed) {
  UpdatePackage pkg;
  Update u;
  ValidationSuite suite;
  {
    std::lock_guard lock(mu_);
    pkg = staged_for(h).pkg;
    u = build(pkg);
    suite = suite_;
  }
  if (!pkg.scenarios.empty()) suite.scenarios = pkg.scenarios;
  if (pkg.properties) suite.properties = *pkg.properties;

  ValidationReport report;
  report.passed = true;
  auto fail = [&report](const std::string& why) {
    report.passed = false;
    report.diagnostics.push_back(why);
  };

  std::vector<mape::Goal> goals;
  try {
    goals = mape::normalize_goals(u.goals);
  } catch (const mape::GoalError& e) {
    fail(std::string("goals: ") + e.what());
  }
  for (const mape::Goal& g : goals) {
    if (!u.registry.contains(g.quality)) fail("goal on '" + g.quality + "' has no quality model");
  }
  if (u.budget_ticks && *u.budget_ticks == 0) fail("budget must be positive");
  if (suite.scenarios.empty()) fail("no validation scenarios");

  if (report.passed) {
    const engine::AutomatonNetwork net = engine::parse_model(embedded_model("mape_loop"));
    for (const verify::StubScenario& sc : suite.scenarios) {
      try {
        const verify::Exploration e = verify::explore(net, verify::instantiate(net, sc, goals), suite.properties);
        if (e.budget_exceeded) fail(sc.name + ": state budget exceeded");
        for (const verify::Verdict& v : e.verdicts) {
          report.results.push_back({sc.name, v.property.text, v.holds && v.decided, v.counterexample});
          if (!v.holds) report.passed = false;
        }
        for (const std::string& m : verify::planner_differential(net, sc, goals)) fail("planner differential: " + m);
      } catch (const verify::VerifyError& e) {
        fail(sc.name + ": " + e.what());
      }
    }
  }

  // Sandbox smoke run of each new model on the failsafe configuration.
  if (report.passed) {
    const qmodels::IotOption option{topology_, deltaiot::failsafe_settings(*topology_),
                                    deltaiot::nominal_uncertainty(*topology_)};
    for (const QualitySpec& q : pkg.qualities) {
      try {
        const smc::Estimate e =
            qmodels::verify_quality(u.registry.at(q.name), option, mape::default_verification(),
                                    mape::quality_seed(seed, q.name));
        if (!std::isfinite(e.point) || !std::isfinite(e.hi)) fail(q.name + ": model produced a non-finite estimate");
        std::ostringstream note;
        note << q.name << " on the failsafe configuration: " << e.point << " [" << e.lo << ", " << e.hi << "] after "
             << e.runs << " runs";
        report.diagnostics.push_back(note.str());
      } catch (const std::exception& e) {
        fail(q.name + ": sandbox run failed: " + e.what());
      }
    }
  }

  std::lock_guard lock(mu_);
  if (staged_ && staged_->id == h.id) staged_->validated = report.passed;
  return report;
}

void GoalManager::activate(StagedHandle h) {
  std::lock_guard lock(mu_);
  Staged& s = staged_for(h);
  if (!s.validated) throw EvolveError("update has not been validated");
  if (!*s.validated) throw EvolveError("update failed validation");
  mailbox_ = build(s.pkg);
  staged_.reset();
}

void GoalManager::discard(StagedHandle h) {
  std::lock_guard lock(mu_);
  staged_for(h);
  staged_.reset();
}

bool GoalManager::has_staged() const {
  std::lock_guard lock(mu_);
  return staged_.has_value();
}

bool GoalManager::has_pending() const {
  std::lock_guard lock(mu_);
  return mailbox_.has_value();
}

std::vector<mape::Goal> GoalManager::live_goals() const {
  std::lock_guard lock(mu_);
  return goals_;
}

std::string GoalManager::apply_pending(mape::Knowledge& k) {
  std::optional<Update> u;
  {
    std::lock_guard lock(mu_);
    if (!mailbox_) return "";
    u = std::move(mailbox_);
    mailbox_.reset();
    goals_ = u->goals;
    registry_ = u->registry;
  }
  k.goals = mape::normalize_goals(u->goals);
  k.registry = u->registry;
  if (u->budget_ticks) k.budget_ticks = *u->budget_ticks;
  // results verified under the old goals are dropped; the next cycle
  // analyzes afresh
  for (mape::AdaptationOption& o : k.options) o.verification.clear();
  k.current.reset();
  k.previous.reset();
  return "activated update '" + u->name + "'";
}

mape::FeedbackLoop::QuiescentHook GoalManager::hook() {
  return [this](mape::Knowledge& k) { return apply_pending(k); };
}

UpdatePackage latency_package() {
  UpdatePackage p;
  p.name = "latency";
  p.goals.push_back(mape::latency_goal());
  p.qualities.push_back({"latency", "deltaiot-latency", qmodels::EstimatorKind::Mean});
  return p;
}

}  // namespace selfadapt::evolve
