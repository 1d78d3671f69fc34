#include "doctest.h"
TEST_SUITE("experiment") {}
