#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "fieldfuse/common.hpp"

int main(int argc, char** argv) {
  fieldfuse::set_log_level(fieldfuse::LogLevel::Error);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
