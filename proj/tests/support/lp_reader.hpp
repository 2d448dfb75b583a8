#pragma once

// Test-harness reader for the LP dialect written by export_lp. Used to check
// that exported programs re-parse to coefficient-identical MIPs.

#include <string>

#include "ols/mip.hpp"

namespace ols::testing {

MixedIntegerProgram parse_lp(const std::string& text);

}  // namespace ols::testing
