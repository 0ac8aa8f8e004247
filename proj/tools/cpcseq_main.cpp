// Command-line front end for the cpcseq shared library. All work happens
// behind the C API; this binary only parses flags, merges them into the
// config document and reports results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpcseq.h"

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif

namespace {

struct StageArgs {
  std::string config_path;
  std::string out_dir;
  long seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  bool force = false;
};

int run_stage(const std::string& command, const StageArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << args.config_path << "'\n";
    return CPCSEQ_USAGE_ERROR;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  nlohmann::json cfg = nlohmann::json::parse(buf.str(), nullptr, false);
  if (cfg.is_discarded() || !cfg.is_object()) {
    std::cerr << "error: config file '" << args.config_path << "' is not a JSON object\n";
    return CPCSEQ_USAGE_ERROR;
  }
  // flags override file values; the merged document is what the run stores
  if (args.seed_set) cfg["seed"] = args.seed;
  if (args.deterministic) cfg["deterministic"] = true;

  const std::string merged = cfg.dump();
  const int rc = cpcseq_run(command.c_str(), merged.c_str(), args.out_dir.c_str(),
                            args.force ? 1 : 0);
  if (rc != CPCSEQ_OK) std::cerr << "error: " << cpcseq_last_error() << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // large short-lived matrices churn through the allocator during training
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif

  CLI::App app{"cpcseq: contrastive predictive pre-training and activity "
               "classification for multichannel time-series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cpcseq_version());

  const std::pair<const char*, const char*> stages[] = {
      {"synth", "Generate synthetic recordings and write them as canonical CSV"},
      {"pretrain", "Self-supervised pre-training; writes checkpoint.bin and history.json"},
      {"finetune", "Train the classification backend on (possibly few) labels"},
      {"evaluate", "Evaluate a trained classifier on a data split"},
      {"sweep", "Run one evaluation sweep axis and write report/plots"},
  };

  StageArgs args;
  for (const auto& [name, desc] : stages) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "output directory for run artifacts")->required();
    sub->add_option("--seed", args.seed, "override the config seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_flag("--deterministic", args.deterministic,
                  "serial numeric execution; bit-exact reruns");
    sub->add_flag("--force", args.force, "allow writing into a non-empty output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return CPCSEQ_USAGE_ERROR;
  }

  for (const auto& [name, desc] : stages)
    if (app.got_subcommand(name)) return run_stage(name, args);
  return CPCSEQ_USAGE_ERROR;
}
