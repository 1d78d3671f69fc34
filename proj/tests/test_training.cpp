#include "doctest.h"
TEST_SUITE("training") {}
