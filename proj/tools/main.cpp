#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vmk/commands.hpp"
#include "vmk/config.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSchema = 3;
constexpr int kExitIo = 4;
constexpr int kExitDegenerate = 5;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vectorized map construction toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "run configuration document (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--verbose", verbose, "per-frame progress output");

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene, drive, and rasters");
  synth->fallthrough();

  std::string resample_in, resample_out;
  auto* resample = app.add_subcommand("resample", "canonicalize element point counts in a map file");
  resample->fallthrough();
  resample->add_option("input", resample_in, "map file to read")->required();
  resample->add_option("output", resample_out, "map file to write")->required();

  std::string fuse_dir, fuse_mode;
  auto* fuse = app.add_subcommand("fuse", "temporal fusion over a stored sequence");
  fuse->fallthrough();
  fuse->add_option("sequence", fuse_dir, "directory with sequence.json and frames/")->required();
  fuse->add_option("--mode", fuse_mode, "fusion mode")
      ->check(CLI::IsMember(
          {"none", "streaming", "streaming_streaming", "streaming_stacking"}));

  std::string eval_pred, eval_gt;
  auto* eval = app.add_subcommand("eval", "score a prediction file against ground truth");
  eval->fallthrough();
  eval->add_option("pred", eval_pred, "prediction map file")->required();
  eval->add_option("gt", eval_gt, "ground-truth map file")->required();

  std::vector<std::string> ensemble_files;
  auto* ensemble = app.add_subcommand("ensemble", "merge ranked prediction files");
  ensemble->fallthrough();
  ensemble->add_option("files", ensemble_files, "prediction files, best model first")
      ->required()
      ->expected(-1);

  auto* topo = app.add_subcommand("topo", "train or evaluate the topology head");
  topo->fallthrough();
  topo->require_subcommand(1);
  std::vector<std::string> topo_train_scenes;
  auto* topo_train = topo->add_subcommand("train", "fit the head on ground-truth scenes");
  topo_train->fallthrough();
  topo_train->add_option("scenes", topo_train_scenes, "scene files")->required()->expected(-1);
  std::string topo_params_dir;
  std::vector<std::string> topo_eval_scenes;
  auto* topo_eval = topo->add_subcommand("eval", "score the head on held-out scenes");
  topo_eval->fallthrough();
  topo_eval->add_option("params", topo_params_dir, "trained parameter directory")->required();
  topo_eval->add_option("scenes", topo_eval_scenes, "scene files")->required()->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    vmk::RunConfig cfg;
    if (!config_path.empty()) cfg = vmk::load_run_config(config_path);
    if (seed_opt->count() > 0) {
      cfg.seed = seed;
      cfg.topo.seed = seed;
    }

    if (synth->parsed()) {
      vmk::cmd_synth(cfg, out_dir, verbose, std::cout);
    } else if (resample->parsed()) {
      vmk::cmd_resample(resample_in, resample_out, std::cout);
    } else if (fuse->parsed()) {
      vmk::cmd_fuse(cfg, fuse_dir, fuse_mode, out_dir, verbose, std::cout);
    } else if (eval->parsed()) {
      vmk::cmd_eval(cfg, eval_pred, eval_gt, out_dir, std::cout);
    } else if (ensemble->parsed()) {
      vmk::cmd_ensemble(cfg, ensemble_files, out_dir, std::cout);
    } else if (topo->parsed()) {
      if (topo_train->parsed()) {
        vmk::cmd_topo_train(cfg, topo_train_scenes, out_dir, std::cout);
      } else {
        vmk::cmd_topo_eval(cfg, topo_params_dir, topo_eval_scenes, out_dir, std::cout);
      }
    }
    return 0;
  } catch (const vmk::schema_error& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const vmk::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const vmk::degenerate_geometry_error& e) {
    std::cerr << "degenerate geometry: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
