#include <doctest.h>

#include <stdexcept>
#include <string>

#include "emseg/config_file.hpp"

using namespace emseg;

TEST_CASE("toml subset: scalars, arrays, sections, comments") {
  const std::string text =
      "# run configuration\n"
      "n_init = 30\n"
      "lr = 5e-4\n"
      "line_search = true\n"
      "prior = \"sample\"  # informative\n"
      "mu = [40, 40.5, 41]\n"
      "\n"
      "[gen]\n"
      "classes = 6\n";
  const ConfigMap cfg = parse_toml_subset(text, "test.toml");
  CHECK(cfg.get_int("n_init", 0) == 30);
  CHECK(cfg.get_double("lr", 0.0) == doctest::Approx(5e-4));
  CHECK(cfg.get_bool("line_search", false));
  CHECK(cfg.get_string("prior", "") == "sample");
  CHECK(cfg.get_double_array("mu", {}) == std::vector<double>{40.0, 40.5, 41.0});
  CHECK(cfg.get_int("gen.classes", 0) == 6);
  CHECK(cfg.get_int("absent", 7) == 7);
}

TEST_CASE("toml subset: errors carry line numbers") {
  try {
    parse_toml_subset("ok = 1\nbroken line\n", "c.toml");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("c.toml:2") != std::string::npos);
  }
  CHECK_THROWS(parse_toml_subset("x = [1, \"a\"]\n", "c.toml"));
  CHECK_THROWS(parse_toml_subset("x = \"unterminated\n", "c.toml"));
}

TEST_CASE("json configs flatten nested objects") {
  const std::string text = R"({"lr": 0.01, "gen": {"classes": 4}, "mu": [1, 2]})";
  const ConfigMap cfg = parse_json_config(text, "c.json");
  CHECK(cfg.get_double("lr", 0.0) == doctest::Approx(0.01));
  CHECK(cfg.get_int("gen.classes", 0) == 4);
  CHECK(cfg.get_double_array("mu", {}) == std::vector<double>{1.0, 2.0});
  CHECK_THROWS(parse_json_config("[1,2]", "c.json"));
  CHECK_THROWS(parse_json_config("{broken", "c.json"));
}

TEST_CASE("type errors and unknown-key detection") {
  const ConfigMap cfg = parse_toml_subset("a = \"text\"\nb = 2\n", "c.toml");
  CHECK_THROWS(cfg.get_int("a", 0));
  CHECK(cfg.get_double("b", 0.0) == 2.0);  // int promotes to double
  CHECK_NOTHROW(cfg.ensure_known({"a", "b"}));
  CHECK_THROWS(cfg.ensure_known({"a"}));
}
