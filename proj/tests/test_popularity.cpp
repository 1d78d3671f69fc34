#include "doctest.h"
TEST_SUITE("popularity") {}
