#pragma once

#include <vector>

#include "flowrank/frontend/frontend.hpp"

namespace flowrank::frontend {

/// extract_units that also records where the placeholder call sits.
std::vector<AstUnit> extract_units_with_hole(const Module& module, Hole* hole);

}  // namespace flowrank::frontend
