#include "doctest.h"
#include "cacaotk/util.hpp"

TEST_SUITE("util") {
  TEST_CASE("trim") { CHECK(cacaotk::trim("  a ") == "a"); }
}
