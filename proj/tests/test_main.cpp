// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "mambattn/runtime.hpp"

int main(int argc, char** argv) {
  mambattn::runtime::tune_allocator();
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
