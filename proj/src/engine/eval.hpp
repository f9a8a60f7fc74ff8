#pragma once

#include <span>

#include "selfadapt/engine/model.hpp"

namespace selfadapt::engine::detail {

struct EvalContext {
  const AutomatonNetwork& net;
  std::span<const Value> globals;
  std::span<const int> locations;  // empty while parsing
};

Value evaluate(const EvalContext& ctx, const Expr& expr, std::span<Value> locals);

/// Checks bounds/type and stores into element `element` of variable `var`.
void store_global(const AutomatonNetwork& net, std::span<Value> globals, int var, std::int64_t element,
                  Value value);

}  // namespace selfadapt::engine::detail
