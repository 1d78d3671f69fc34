#include "doctest.h"
TEST_SUITE("scoring") {}
