#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "ssmpc/config.hpp"

using namespace ssmpc;

TEST_CASE("parse reads key = value lines, skipping comments and blanks") {
  const KvConfig cfg = KvConfig::parse(
      "# a comment\n"
      "\n"
      "train.lr = 0.001\n"
      "model.d_model=64\n"
      "  run.seed =  9  \n"
      "train.quiet = true\n");
  CHECK(cfg.get_double("train.lr", 0.0) == doctest::Approx(0.001));
  CHECK(cfg.get_int("model.d_model", 0) == 64);
  CHECK(cfg.get_u64("run.seed", 0) == 9);
  CHECK(cfg.get_bool("train.quiet", false));
  CHECK(cfg.has("train.lr"));
  CHECK_FALSE(cfg.has("absent.key"));
}

TEST_CASE("typed getters fall back to defaults for absent keys") {
  const KvConfig cfg;
  CHECK(cfg.get("x", "dflt") == "dflt");
  CHECK(cfg.get_int("x", 7) == 7);
  CHECK(cfg.get_double("x", 2.5) == doctest::Approx(2.5));
  CHECK(cfg.get_bool("x", true));
}

TEST_CASE("malformed lines report their line number") {
  try {
    KvConfig::parse("a = 1\nb = 2\nnot a pair\n");
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("type errors name the offending key") {
  const KvConfig cfg = KvConfig::parse("train.lr = fast\n");
  try {
    cfg.get_double("train.lr", 0.0);
    FAIL("expected a type error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("train.lr") != std::string::npos);
  }
  CHECK_THROWS(cfg.get_int("train.lr", 0));
  CHECK_THROWS(cfg.get_bool("train.lr", false));
}

TEST_CASE("merge overlays values with the other side winning") {
  KvConfig base = KvConfig::parse("a = 1\nb = 2\n");
  const KvConfig over = KvConfig::parse("b = 20\nc = 30\n");
  base.merge(over);
  CHECK(base.get_int("a", 0) == 1);
  CHECK(base.get_int("b", 0) == 20);
  CHECK(base.get_int("c", 0) == 30);
}

TEST_CASE("serialize is sorted and round-trips") {
  KvConfig cfg;
  cfg.set("zeta", "1");
  cfg.set("alpha", "2");
  const std::string text = cfg.serialize();
  CHECK(text.find("alpha") < text.find("zeta"));
  const KvConfig again = KvConfig::parse(text);
  CHECK(again.values() == cfg.values());
}

TEST_CASE("digest is insertion-order independent and value sensitive") {
  KvConfig a, b;
  a.set("x", "1");
  a.set("y", "2");
  b.set("y", "2");
  b.set("x", "1");
  CHECK(a.digest() == b.digest());
  b.set("x", "3");
  CHECK(a.digest() != b.digest());
}
