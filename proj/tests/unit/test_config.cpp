#include <doctest.h>

#include <filesystem>

#include "generators.hpp"
#include "lipspline/checkpoint.hpp"
#include "lipspline/config.hpp"
#include "lipspline/error.hpp"
#include "lipspline/io.hpp"

using namespace lipspline;

TEST_SUITE("config") {
  TEST_CASE("parsing and typed getters") {
    Config c = Config::parse(
        "# comment\n"
        "\n"
        "a = 1.5\n"
        "net.widths = 1, 4, 1\n"
        "flag = yes\n"
        "  name =  hello world  \n"
        "n = -3\n");
    CHECK(c.get_double("a", 0.0) == 1.5);
    CHECK(c.get_sizes("net.widths", {}) == std::vector<std::size_t>{1, 4, 1});
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_string("name", "") == "hello world");
    CHECK(c.get_int("n", 0) == -3);
    CHECK(c.get_double("missing", 2.25) == 2.25);
  }

  TEST_CASE("malformed input is rejected") {
    CHECK_THROWS_AS(Config::parse("novalue\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("bad key = 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
    Config c = Config::parse("x = abc\nb = maybe\nw = 1, -2\n");
    CHECK_THROWS_AS(c.get_double("x", 0.0), ConfigError);
    CHECK_THROWS_AS(c.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(c.get_sizes("w", {}), ConfigError);
    CHECK_THROWS_AS(c.require_string("absent"), ConfigError);
  }

  TEST_CASE("unknown and unused keys") {
    Config c = Config::parse("a = 1\ntypo = 2\n");
    CHECK_THROWS_AS(c.reject_unknown({"a"}), ConfigError);
    CHECK_NOTHROW(c.reject_unknown({"a", "typo"}));
    c.get_int("a", 0);
    try {
      c.reject_unused();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("typo") != std::string::npos);
    }
    c.get_int("typo", 0);
    CHECK_NOTHROW(c.reject_unused());
  }

  TEST_CASE("resolved settings list defaults and overrides in sorted order") {
    Config c = Config::parse("b = 2\n");
    c.set("seed", "7");
    c.get_int("b", 0);
    c.get_double("a", 0.5);
    c.get_seed("seed", 0);
    CHECK(c.resolved() == "a = 0.5\nb = 2\nseed = 7\n");
  }

  TEST_CASE("CSV writer") {
    CsvWriter w({"x", "y"});
    w.cell(0.1).cell(std::size_t{3});
    w.end_row();
    w.blank().cell(std::string("s"));
    w.end_row();
    CHECK(w.str() == "x,y\n0.1,3\n,s\n");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CsvWriter short_row({"a", "b"});
    short_row.cell(1);
    CHECK_THROWS(short_row.end_row());
  }

  TEST_CASE("atomic file writes") {
    const auto dir = std::filesystem::temp_directory_path() / "lipspline_io_test";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "f.txt", "one");
    write_file_atomic(dir / "f.txt", "two");
    CHECK(read_file(dir / "f.txt") == "two");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    std::filesystem::remove_all(dir);
    CHECK_THROWS(read_file(dir / "missing"));
  }

  TEST_CASE("checkpoints round-trip bit-exactly") {
    for (auto kind : {ActivationKind::Lls, ActivationKind::PRelu, ActivationKind::Householder}) {
      NetworkSpec spec;
      spec.widths = {2, 6, 6, 1};
      spec.activation.kind = kind;
      spec.seed = 11;
      const Network net(spec);
      const std::string text = serialize_checkpoint(net, {{"command", "test"}});
      CheckpointMeta meta;
      const Network back = deserialize_checkpoint(text, &meta);
      CHECK(meta.at("command") == "test");
      CHECK(serialize_checkpoint(back, meta) == text);
      const Tensor x = lipspline::testing::Gen(12).tensor({5, 2});
      CHECK(back.freeze().apply(x) == net.freeze().apply(x));
    }
    CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint"), ConfigError);
  }
}
