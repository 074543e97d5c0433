#include <doctest.h>

#include <chrono>

#include "hpo/subprocess.hpp"

using namespace hpo;
using clock_type = std::chrono::steady_clock;

namespace {

clock_type::time_point in(double s) {
  return clock_type::now() + std::chrono::duration_cast<clock_type::duration>(std::chrono::duration<double>(s));
}

}  // namespace

TEST_CASE("line exchange with a child") {
  Subprocess cat({"/bin/cat"});
  cat.write_line("hello");
  CHECK(cat.read_line(in(5), 5) == "hello");
  cat.write_line(R"({"a": 1})");
  CHECK(cat.read_line(in(5), 5) == R"({"a": 1})");
  CHECK(cat.running());
}

TEST_CASE("partial final line and exit status") {
  Subprocess p({"/bin/sh", "-c", "printf 'no newline'"});
  CHECK(p.read_line(in(5), 5) == "no newline");

  Subprocess fail({"/bin/sh", "-c", "echo boom >&2; exit 3"});
  try {
    fail.read_line(in(5), 5);
    FAIL("expected ProcessError");
  } catch (const ProcessError& e) {
    CHECK(e.exit_code() == 3);
    CHECK(e.stderr_text().find("boom") != std::string::npos);
  }
}

TEST_CASE("timeouts kill the child within the bound") {
  Subprocess p({"/bin/sh", "-c", "while :; do :; done"});
  const auto start = clock_type::now();
  CHECK_THROWS_AS(p.read_line(in(0.5), 0.5), TimeoutError);
  p.kill();
  const double elapsed = std::chrono::duration<double>(clock_type::now() - start).count();
  CHECK(elapsed < 2.5);
  CHECK_FALSE(p.running());
}

TEST_CASE("missing executables surface as process errors") {
  CHECK_THROWS_AS(
      [] {
        Subprocess p({"/definitely/not/here"});
        p.read_line(in(5), 5);
      }(),
      ProcessError);
}

TEST_CASE("NDJSON channel") {
  NdjsonChannel ch({"/bin/cat"}, 5);
  CHECK_FALSE(ch.alive());
  const auto r = ch.request({{"type", "ping"}, {"n", 1}});
  CHECK(r["n"] == 1);
  CHECK(ch.alive());
  CHECK_THROWS_AS(ch.request(json::array()), ConfigError);
  CHECK_THROWS_AS(ch.request({{"no_type", 1}}), ConfigError);

  NdjsonChannel bad({"/bin/sh", "-c", "read line; echo not-json"}, 5);
  try {
    bad.request({{"type", "x"}});
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(e.raw_line() == "not-json");
  }

  NdjsonChannel slow({"/bin/sh", "-c", "read line; sleep 30"}, 0.3);
  CHECK_THROWS_AS(slow.request({{"type", "x"}}), TimeoutError);
  CHECK_FALSE(slow.alive());
  CHECK_THROWS_AS(slow.request({{"type", "x"}}), TimeoutError);
}
