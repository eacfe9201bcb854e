#pragma once

#include "rmc/verify.hpp"

namespace testing_support {

using rmc::verify::random_tree;
using rmc::verify::random_tree_with_leaves;

}  // namespace testing_support
