#include <gtest/gtest.h>
TEST(Placeholder, test_manifest) { SUCCEED(); }
