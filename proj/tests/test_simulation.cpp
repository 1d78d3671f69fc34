#include "doctest.h"
TEST_SUITE("simulation") {}
