#pragma once

#include "rmc/multimap.hpp"
#include "rmc/verify.hpp"

namespace testing_support {

using rmc::verify::random_invariant;

}  // namespace testing_support
