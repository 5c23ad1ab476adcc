#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef FEDMVC_CLI_PATH
#error "FEDMVC_CLI_PATH must point at the CLI binary"
#endif

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
  const auto capture = scratch / "capture.txt";
  const std::string cmd =
      std::string(FEDMVC_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(capture);
  std::ostringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("fedmvc_cli_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("validate reports ok for a sound config") {
  const auto dir = fresh_dir("validate_ok");
  write_file(dir / "config.json",
             R"({"data":{"synthetic":{"samples":30,"clusters":2,"view_dims":[2,2]}},)"
             R"("solver":{"clusters":2}})");
  const auto result = run_cli("validate " + (dir / "config.json").string(), dir);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("ok") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate rejects constraint violations with exit code 2") {
  const auto dir = fresh_dir("validate_bad");
  write_file(dir / "config.json",
             R"({"data":{"synthetic":{"view_dims":[2]}},"solver":{"fuzzifier":1.0}})");
  const auto result = run_cli("validate " + (dir / "config.json").string(), dir);
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("fuzzifier") != std::string::npos);

  const auto missing = run_cli("validate " + (dir / "nope.json").string(), dir);
  CHECK(missing.exit_code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run executes an experiment and writes outputs") {
  const auto dir = fresh_dir("run");
  const auto out = dir / "out";
  write_file(dir / "config.json",
             R"({"name":"cli_smoke",)"
             R"("data":{"synthetic":{"samples":30,"clusters":2,"view_dims":[2,2],"separation":8.0}},)"
             R"("solver":{"clusters":2,"max_iters":10}})");
  const auto result =
      run_cli("run " + (dir / "config.json").string() + " --output-dir " + out.string(), dir);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("cli_smoke") != std::string::npos);
  CHECK(std::filesystem::exists(out / "summary.json"));
  CHECK(std::filesystem::exists(out / "model_client0.fmvb"));

  const auto bad = run_cli("run " + (dir / "nope.json").string(), dir);
  CHECK(bad.exit_code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("generate writes a dataset that run can consume") {
  const auto dir = fresh_dir("generate");
  const auto data_dir = dir / "data";
  write_file(dir / "spec.json",
             R"({"name":"toy","samples":24,"clusters":2,"view_dims":[3,2],"seed":4})");
  const auto gen = run_cli(
      "generate " + (dir / "spec.json").string() + " --output-dir " + data_dir.string(), dir);
  CHECK(gen.exit_code == 0);
  REQUIRE(std::filesystem::exists(data_dir / "manifest.json"));

  const auto out = dir / "out";
  write_file(dir / "config.json", R"({"data":{"manifest":")" +
                                      (data_dir / "manifest.json").string() +
                                      R"("},"solver":{"clusters":2,"max_iters":8}})");
  const auto result =
      run_cli("run " + (dir / "config.json").string() + " --output-dir " + out.string(), dir);
  CHECK(result.exit_code == 0);
  CHECK(std::filesystem::exists(out / "summary.json"));

  const auto bad_spec = run_cli("generate " + (dir / "config.json").string(), dir);
  CHECK(bad_spec.exit_code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("argument errors do not masquerade as success") {
  const auto dir = fresh_dir("args");
  CHECK(run_cli("", dir).exit_code != 0);
  CHECK(run_cli("frobnicate x.json", dir).exit_code != 0);
  std::filesystem::remove_all(dir);
}
