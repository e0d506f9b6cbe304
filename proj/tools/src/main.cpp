#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "lhts/error.hpp"
#include "run_config.hpp"
#include "tasks.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3 };

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lhts::ConfigError("--config: cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-horizon temperature scaling experiments"};
  std::string task;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  std::string tasks;
  for (auto t : lhts::cli::kTasks) tasks += (tasks.empty() ? "" : ", ") + std::string(t);
  app.add_option("task", task, "one of: " + tasks)->required();
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out, "output directory");
  app.add_option("overrides", overrides, "key=value config overrides, e.g. lhts.steps=200");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const std::string text = config_path.empty() ? std::string("{}\n") : read_text(config_path);
    auto document = nlohmann::json::parse(text, nullptr, false);
    if (document.is_discarded()) throw lhts::ConfigError("--config: " + config_path + " is not valid JSON");
    if (document.contains("task") && document["task"] != task) {
      throw lhts::ConfigError("task: config says '" + document["task"].dump() + "' but the command line says '" + task + "'");
    }
    document["task"] = task;
    if (seed) document["seed"] = *seed;
    if (out) document["out"] = *out;
    lhts::cli::apply_overrides(document, overrides);
    const auto config = lhts::cli::parse_config(document);
    lhts::cli::run_task(config, text, std::cout);
  } catch (const lhts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const lhts::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
