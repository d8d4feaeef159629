// Command-line front end. Everything of substance happens behind the C API;
// this file only parses flags, forwards them, and maps status codes to exit
// codes (0 ok, 2 config, 3 numeric, 4 io).

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stagecost.h"

namespace {

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

// Prints the report (if any); on failure, the thread's error message.
int finish(int status, char* text) {
  if (text != nullptr && text[0] != '\0') {
    std::fputs(text, stdout);
    if (text[std::strlen(text) - 1] != '\n') std::fputc('\n', stdout);
  }
  sc_string_free(text);
  if (status != SC_OK) std::fprintf(stderr, "error: %s\n", sc_last_error());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense residual networks trained with per-depth stage costs: "
               "training, trajectory evaluation, depth pruning, and loss-bound audits."};
  app.set_version_flag("--version", sc_version());
  app.require_subcommand(1);

  std::string config, checkpoint, dataset, split, out_dir;
  std::vector<std::string> children;
  int64_t depth = -1;
  int64_t seed = -1;
  bool auto_select = false;
  double tolerance = 0.01;

  CLI::App* train = app.add_subcommand("train", "Train a network from a run config");
  train->add_option("--config", config, "Run config file (JSON)")->required();
  train->add_option("--out-dir", out_dir, "Overrides the config's output directory");
  train->add_option("--seed", seed, "Overrides the config's seed")
      ->check(CLI::NonNegativeNumber);

  CLI::App* eval = app.add_subcommand("eval", "Per-depth metrics of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--dataset", dataset, "Dataset uri; defaults to the checkpoint's");
  eval->add_option("--split", split, "train or test (default test)");
  eval->add_option("--out-dir", out_dir, "Writes trajectory_<split>.csv here");

  CLI::App* prune = app.add_subcommand("prune", "Cut a checkpoint down to a shallower depth");
  prune->add_option("--checkpoint", checkpoint, "Parent checkpoint")->required();
  prune->add_option("--depth", depth, "Cut depth M");
  prune->add_flag("--auto", auto_select, "Pick the cut from the loss plateau instead");
  prune->add_option("--tolerance", tolerance, "Plateau tolerance for --auto (default 0.01)");
  prune->add_option("--dataset", dataset, "Dataset uri for the accuracy comparison");
  prune->add_option("--split", split, "train or test (default test)");
  prune->add_option("--out-dir", out_dir, "Writes pruned_depth<M>.sckp here");

  CLI::App* bounds =
      app.add_subcommand("bounds", "Audit the children's loss bounds against a parent");
  bounds->add_option("--checkpoint", checkpoint, "Parent checkpoint")->required();
  bounds->add_option("children", children, "Child checkpoints")->expected(-1);
  bounds->add_option("--dataset", dataset, "Dataset uri; defaults to the parent's");
  bounds->add_option("--split", split, "train or test (default train)");
  bounds->add_option("--out-dir", out_dir, "Writes bounds.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  if (train->parsed()) {
    char* summary = nullptr;
    int rc = sc_cmd_train(config.c_str(), opt(out_dir), seed, &summary);
    return finish(rc, summary);
  }

  if (eval->parsed()) {
    std::string out_csv;
    if (!out_dir.empty()) {
      std::string name = "trajectory_" + (split.empty() ? "test" : split) + ".csv";
      out_csv = (std::filesystem::path(out_dir) / name).string();
    }
    char* summary = nullptr;
    int rc = sc_cmd_eval(checkpoint.c_str(), opt(dataset), opt(split), opt(out_csv), &summary);
    return finish(rc, summary);
  }

  if (prune->parsed()) {
    if (auto_select == (depth >= 0)) {
      std::fprintf(stderr, "error: pass exactly one of --depth and --auto\n");
      return 2;
    }
    char* report = nullptr;
    int rc = sc_cmd_prune(checkpoint.c_str(), depth, auto_select ? 1 : 0, tolerance,
                          opt(dataset), opt(split), opt(out_dir), nullptr, &report);
    return finish(rc, report);
  }

  // bounds
  std::vector<const char*> child_ptrs;
  child_ptrs.reserve(children.size());
  for (const std::string& c : children) child_ptrs.push_back(c.c_str());
  std::string out_csv;
  if (!out_dir.empty()) out_csv = (std::filesystem::path(out_dir) / "bounds.csv").string();
  char* table = nullptr;
  int rc = sc_cmd_bounds(checkpoint.c_str(), child_ptrs.data(),
                         static_cast<int64_t>(child_ptrs.size()), opt(dataset), opt(split),
                         opt(out_csv), &table);
  return finish(rc, table);
}
