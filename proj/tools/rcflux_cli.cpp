// Campaign runner: rcflux <campaign> [--config spec.json] [--seed N] [--workers N] [--out DIR] [--a.b value ...]
//
// Exit codes: 0 success, 2 refused (bad spec or precondition), 1 campaign failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcflux/errors.hpp"
#include "rcflux/experiment.hpp"

namespace {

nlohmann::json load_spec(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw rcflux::ConfigError("cannot open config " + path);
  return nlohmann::json::parse(in);
}

/// Folds "--a.b value" and "--a.b=value" pairs into the spec document.
void apply_extras(nlohmann::json& doc, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw rcflux::ConfigError("unexpected argument '" + arg + "'");
    const std::string body = arg.substr(2);
    const std::size_t eq = body.find('=');
    if (eq != std::string::npos) {
      rcflux::apply_override(doc, body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw rcflux::ConfigError("override " + arg + " needs a value");
      rcflux::apply_override(doc, body, extras[++i]);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-conductor cell problem campaigns"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  const char* names[] = {"scaling", "normality", "efron-stein", "bound-audit", "greens", "counterexample"};
  std::vector<CLI::App*> subs;
  for (const char* name : names) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " campaign");
    sub->add_option("--config", config_path, "JSON experiment spec");
    sub->add_option("--seed", seed, "master seed (overrides the spec)");
    sub->add_option("--workers", workers, "worker threads (overrides the spec)");
    sub->add_option("--out", out_dir, "output directory (overrides the spec)");
    sub->allow_extras();
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = nullptr;
  for (CLI::App* sub : subs)
    if (sub->parsed()) chosen = sub;

  rcflux::ExperimentSpec spec;
  rcflux::Campaign campaign{};
  try {
    nlohmann::json doc = load_spec(config_path);
    apply_extras(doc, chosen->remaining());
    if (chosen->count("--seed")) doc["master_seed"] = seed;
    if (chosen->count("--workers")) doc["workers"] = workers;
    if (chosen->count("--out")) doc["output_dir"] = out_dir;
    campaign = rcflux::campaign_from_string(chosen->get_name());
    doc["campaigns"] = {rcflux::to_string(campaign)};
    spec = doc.get<rcflux::ExperimentSpec>();
    spec.validate();
  } catch (const rcflux::ConfigError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "refused: bad spec: " << e.what() << "\n";
    return 2;
  }

  try {
    const rcflux::ExperimentResult result = rcflux::run_campaign(spec, campaign);
    rcflux::emit_plot_data(result, spec, spec.output_dir);
    std::cout << rcflux::results_csv(result);
  } catch (const rcflux::ConfigError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
