#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tumornet/cli/cli.hpp"

using namespace tumornet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("tumornet_cli_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("exit codes follow the error category") {
  CHECK(cli::exit_code(ErrorCategory::config) == 2);
  CHECK(cli::exit_code(ErrorCategory::data) == 3);
  CHECK(cli::exit_code(ErrorCategory::numerical) == 4);
  CHECK(cli::exit_code(ErrorCategory::other) == 1);
}

TEST_CASE("resolve_config: defaults, flag precedence and strictness") {
  const auto r = cli::resolve_config("phantom", nullptr, json::object());
  CHECK(r.at("seed") == 0);
  CHECK(r.at("preset") == "desk");
  CHECK(r.at("phantom").at("dims") == json({64, 64, 64}));

  const auto paper = cli::resolve_config("phantom", {{"seed", 3}}, {{"preset", "paper"}, {"seed", 9}});
  CHECK(paper.at("seed") == 9);
  CHECK(paper.at("phantom").at("dims") == json({128, 128, 128}));

  CHECK_THROWS_AS(cli::resolve_config("phantom", {{"bogus", 1}}, json::object()), Error);
  CHECK_THROWS_AS(cli::resolve_config("phantom", {{"phantom", {{"bogus", 1}}}}, json::object()), Error);
  CHECK_THROWS_AS(cli::resolve_config("simulate", {{"command", "phantom"}}, json::object()), Error);
  CHECK_THROWS_AS(cli::resolve_config("launch", json::object(), json::object()), Error);
  CHECK_THROWS_AS(cli::resolve_config("phantom", json::object(), {{"preset", "huge"}}), Error);

  // A resolved config fed back in resolves to itself.
  auto again = r;
  CHECK(cli::resolve_config("phantom", again, json::object()) == r);
}

TEST_CASE("cli: argument and config errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"launch"}).code == 2);
  CHECK(run({"phantom"}).code == 2);  // no --out
  CHECK(run({"phantom", "--threads", "-1", "--out", scratch("x").string()}).code == 2);
  CHECK(run({"phantom", "--help"}).code == 0);

  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"phantom": {"dims": [64, 64]}})";
  const auto r = run({"phantom", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.json") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: missing input data exits with 3") {
  const auto dir = scratch("data");
  const auto r = run({"eval", "--out", dir.string()});
  CHECK(r.code != 0);
  std::ofstream cfg(fs::temp_directory_path() / "tumornet_cli_eval.json");
  cfg << json{{"data", (dir / "nowhere").string()}, {"predictor", "solver"}}.dump();
  cfg.close();
  CHECK(run({"eval", "--config", (fs::temp_directory_path() / "tumornet_cli_eval.json").string(), "--out",
             dir.string()})
            .code == 3);
  fs::remove_all(dir);
  fs::remove(fs::temp_directory_path() / "tumornet_cli_eval.json");
}

TEST_CASE("cli: phantom writes its outputs and the resolved config") {
  const auto dir = scratch("phantom");
  std::ofstream(fs::temp_directory_path() / "tumornet_cli_phantom.json") << R"({"phantom": {"dims": [16, 16, 16]}})";
  const auto r = run({"phantom", "--config", (fs::temp_directory_path() / "tumornet_cli_phantom.json").string(),
                      "--seed", "4", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "tissue.vol"));
  CHECK(fs::exists(dir / "phantom.json"));
  const auto resolved = json::parse(std::ifstream(dir / "resolved_config.json"));
  CHECK(resolved.at("seed") == 4);
  CHECK(resolved.at("command") == "phantom");
  CHECK(!resolved.contains("out"));
  fs::remove_all(dir);
  fs::remove(fs::temp_directory_path() / "tumornet_cli_phantom.json");
}
