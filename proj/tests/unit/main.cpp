#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "unimask/numkit/tensor.hpp"

int main(int argc, char** argv) {
  unimask::nk::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
