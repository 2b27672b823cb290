#ifndef LSERC_LSERC_HPP
#define LSERC_LSERC_HPP

#include "lserc/ld_arith.hpp"
#include "lserc/taylor.hpp"
#include "lserc/expr.hpp"
#include "lserc/model.hpp"
#include "lserc/sensitivity.hpp"
#include "lserc/rank_test.hpp"

#endif  // LSERC_LSERC_HPP
