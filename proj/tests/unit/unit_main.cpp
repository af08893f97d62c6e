#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>
#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
  // Expected warnings (rejected generations, failed cells) would otherwise clutter test output.
  spdlog::set_level(spdlog::level::err);
  return doctest::Context(argc, argv).run();
}
