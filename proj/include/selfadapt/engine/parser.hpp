#pragma once

#include <string>
#include <string_view>

#include "selfadapt/engine/model.hpp"

namespace selfadapt::engine {

/// Parses and validates model source. Throws ParseError (never anything
/// else) on malformed input. The grammar is documented in
/// docs/model-format.md.
AutomatonNetwork parse_model(std::string_view text);

/// Parses a standalone expression in the global scope of `net`. Location
/// tests of the form `Automaton.Location` are allowed.
Expr parse_expression(const AutomatonNetwork& net, std::string_view text);

/// Canonical source form. parse_model(to_source(net)) == net.
std::string to_source(const AutomatonNetwork& net);

std::string to_source(const AutomatonNetwork& net, const Expr& expr);

}  // namespace selfadapt::engine
