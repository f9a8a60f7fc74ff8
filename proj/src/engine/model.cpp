#include "selfadapt/engine/model.hpp"

namespace selfadapt::engine {

namespace {
template <typename Range>
int find_named(const Range& items, const std::string& name) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].name == name) return static_cast<int>(i);
  }
  return -1;
}
}  // namespace

int Automaton::location_index(const std::string& location) const { return find_named(locations, location); }

int AutomatonNetwork::variable_index(const std::string& name) const { return find_named(variables, name); }
int AutomatonNetwork::automaton_index(const std::string& name) const { return find_named(automata, name); }
int AutomatonNetwork::channel_index(const std::string& name) const { return find_named(channels, name); }
int AutomatonNetwork::function_index(const std::string& name) const { return find_named(functions, name); }

std::size_t AutomatonNetwork::edge_count() const {
  std::size_t n = 0;
  for (const Automaton& a : automata) n += a.edges.size();
  return n;
}

}  // namespace selfadapt::engine
