#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "traplab/io.hpp"
#include "traplab/runner.hpp"

using traplab::runner::json;

namespace {

int fail(const std::string& module, const std::string& code, const std::string& message) {
  std::cerr << traplab::runner::error_record(module, code, message).dump() << std::endl;
  return 2;
}

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long long> workers;
  std::string out;
  std::vector<std::string> overrides;
};

json build_config(const std::string& experiment, const ExperimentArgs& a) {
  json cfg = json::object();
  if (!a.config.empty()) {
    std::string text = traplab::io::read_text(a.config);
    cfg = json::parse(text, nullptr, false);
    traplab::require(!cfg.is_discarded(), "cli", traplab::ErrorCode::Schema, "config is not valid JSON: " + a.config);
    traplab::require(cfg.is_object(), "cli", traplab::ErrorCode::Schema, "config must be a JSON object");
    if (cfg.contains("experiment"))
      traplab::require(cfg["experiment"] == experiment, "cli", traplab::ErrorCode::Schema,
                       "config experiment does not match subcommand " + experiment);
  }
  if (a.config.empty()) cfg["experiment"] = experiment;
  for (const auto& kv : a.overrides) traplab::runner::apply_override(cfg, kv);
  if (a.seed) cfg["seed"] = *a.seed;
  if (a.workers) cfg["workers"] = *a.workers;
  if (!a.out.empty()) cfg["out_dir"] = a.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traplab: trap behaviour experiments for diffusions on irregular domains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(TRAPLAB_VERSION));

  ExperimentArgs args;
  std::string selected;
  for (const auto& name : traplab::runner::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", args.config, "experiment config (JSON)");
    sub->add_option("--seed", args.seed, "master seed (overrides config)");
    sub->add_option("--workers", args.workers, "worker threads, 0 = all cores (overrides config)");
    sub->add_option("--out", args.out, "output directory (overrides config)");
    sub->add_option("--override", args.overrides, "key=value, repeatable; keys without a prefix address params");
    sub->callback([&selected, name] { selected = name; });
  }

  std::string csv_path, kind = "loglog", script_out, title = "traplab";
  auto* plot = app.add_subcommand("plot-script", "write a matplotlib script for a result CSV");
  plot->add_option("--csv", csv_path, "result CSV")->required();
  plot->add_option("--kind", kind, "loglog or series");
  plot->add_option("--out", script_out, "script path (default: stdout)");
  plot->add_option("--title", title, "plot title");
  plot->callback([&selected] { selected = "plot-script"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("cli", "schema", e.what());
  }

  try {
    if (selected == "plot-script") {
      auto table = traplab::io::read_csv(csv_path);
      std::string script = traplab::io::emit_plot_script(table, traplab::io::parse_plot_kind(kind), title);
      if (script_out.empty())
        std::cout << script;
      else
        traplab::io::write_text(script_out, script);
      return 0;
    }
    auto result = traplab::runner::run(build_config(selected, args));
    for (const auto& f : result.files) std::cout << (result.out_dir / f).string() << "\n";
    for (const auto& w : result.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    return 0;
  } catch (const traplab::Error& e) {
    return fail(e.module(), traplab::to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail("cli", "schema", e.what());
  } catch (const std::exception& e) {
    return fail("cli", "internal", e.what());
  }
}
