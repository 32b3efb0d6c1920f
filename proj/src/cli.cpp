// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors

#include "wfanet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "wfanet/data.hpp"
#include "wfanet/error.hpp"
#include "wfanet/gradcheck.hpp"
#include "wfanet/metrics.hpp"
#include "wfanet/training.hpp"

namespace wfanet::cli {

namespace fs = std::filesystem;

namespace {

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t count = 64;
  std::size_t bands = 8;
  std::size_t size = 64;
  std::size_t ratio = 4;
  std::string split = "train";
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string split = "train";
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string report;
};

struct FuseArgs {
  std::string pan, ms, params, out;
  std::vector<std::string> diff;
};

struct EvalArgs {
  std::string mode = "reduced";
  std::string ref, ms, pan, test;
  std::size_t ratio = 4;
  std::optional<double> sigma;
  std::string json;
};

struct DwtArgs {
  std::string in, out;
  std::size_t levels = 1;
};

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

int do_synth(const SynthArgs& a) {
  if (a.count == 0) throw ConfigError("--count must be at least 1");
  std::vector<SamplePair> samples;
  samples.reserve(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    samples.push_back(make_sample_pair(a.seed * 1000003ULL + i, a.bands, a.size, a.ratio));
  }
  write_dataset(a.out, a.split, samples);
  std::cout << "wrote " << a.count << " samples to " << (fs::path(a.out) / a.split).string() << "\n";
  return kExitOk;
}

int do_train(const TrainArgs& a) {
  const std::vector<SamplePair> dataset = read_dataset(a.data, a.split);
  if (dataset.empty()) throw ValidationError("no samples under " + (fs::path(a.data) / a.split).string());

  nlohmann::json file = nlohmann::json::object();
  if (!a.config.empty()) {
    file = read_json_file(a.config);
    if (!file.is_object()) throw ConfigError(a.config + ": config must be a flat JSON object");
    std::set<std::string> known(NetworkConfig::json_keys().begin(), NetworkConfig::json_keys().end());
    known.insert(TrainConfig::json_keys().begin(), TrainConfig::json_keys().end());
    for (const auto& [key, value] : file.items()) {
      if (!known.count(key)) throw ConfigError(a.config + ": unknown config key '" + key + "'");
    }
  }
  NetworkConfig net_base;
  net_base.ms_bands = dataset.front().lrms.bands;
  net_base.ratio = dataset.front().ratio();
  NetworkConfig net = NetworkConfig::from_json(file, net_base);
  if (!file.contains("scales")) {
    std::size_t scales = 0;
    while ((std::size_t{1} << scales) < net.ratio) ++scales;
    net.scales = scales;
  }
  TrainConfig train_cfg = TrainConfig::from_json(file);
  if (a.epochs) train_cfg.epochs = *a.epochs;
  if (a.lr) train_cfg.lr = *a.lr;
  if (a.batch) train_cfg.batch_size = *a.batch;
  if (a.seed) {
    train_cfg.seed = *a.seed;
    net.seed = *a.seed;
  }

  TrainResult result = train(net, train_cfg, dataset);
  result.network.save(a.out);
  nlohmann::json report = result.report.to_json();
  report["network"] = net.to_json();
  report["training"] = train_cfg.to_json();
  if (!a.report.empty()) write_text(a.report, report.dump(2) + "\n");
  std::cout << "final loss " << result.report.loss_history.back() << ", params written to " << a.out << "\n";
  return kExitOk;
}

int do_fuse(const FuseArgs& a) {
  const Wfanet net = Wfanet::load(a.params);
  const Raster pan = load_raster(a.pan);
  const Raster ms = load_raster(a.ms);
  if (ms.bands != net.config().ms_bands) {
    throw DimensionError("--ms has " + std::to_string(ms.bands) + " bands, network expects " +
                         std::to_string(net.config().ms_bands));
  }
  SamplePair pair{pan, ms, std::nullopt};
  pair.validate(net.config().ratio);
  const Raster fused = fuse(net, pan, ms);
  save_raster(fused, a.out);
  if (!a.diff.empty()) {
    const Raster ref = load_raster(a.diff.at(0));
    if (!ref.same_shape(fused)) throw DimensionError("--diff reference does not match the fused raster's shape");
    Raster diff = fused;
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] = std::abs(fused.values[i] - ref.values[i]);
    save_raster(diff, a.diff.at(1));
  }
  return kExitOk;
}

int do_eval(const EvalArgs& a) {
  const Raster test = load_raster(a.test);
  MetricsReport report;
  if (a.mode == "reduced") {
    if (a.ref.empty()) throw ConfigError("--mode reduced requires --ref");
    const Raster ref = load_raster(a.ref);
    if (!ref.same_shape(test)) throw DimensionError("--ref and --test differ in shape");
    report = reduced_resolution_report(ref, test, a.ratio);
  } else {
    if (a.ms.empty() || a.pan.empty()) throw ConfigError("--mode full requires --ms and --pan");
    const Raster ms = load_raster(a.ms);
    const Raster pan = load_raster(a.pan);
    report = full_resolution_report(test, ms, pan, a.ratio, a.sigma.value_or(default_blur_sigma(a.ratio)));
  }
  const std::string text = report.to_json().dump(2) + "\n";
  if (!a.json.empty()) write_text(a.json, text);
  std::cout << text;
  return kExitOk;
}

int do_dwt(const DwtArgs& a) {
  if (a.levels == 0) throw ConfigError("--levels must be at least 1");
  const Raster input = load_raster(a.in, RangeCheck::kNone);
  fs::create_directories(a.out);
  Tensor current = input.to_tensor();
  for (std::size_t k = 0; k < a.levels; ++k) {
    if (current.dim(1) % 2 != 0 || current.dim(2) % 2 != 0) {
      throw DimensionError("level " + std::to_string(k) + " has odd extent " + shape_to_string(current.shape()) +
                           "; at most " + std::to_string(k) + " levels are possible");
    }
    const WaveletBands bands = dwt2(current);
    const auto arr = bands.as_array();
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string name = "level" + std::to_string(k) + "_" + kBandNames[i] + ".wfrs";
      save_raster(Raster::from_tensor(arr[i], input.bit_depth), fs::path(a.out) / name);
    }
    current = bands.ll;
  }
  return kExitOk;
}

int do_gradcheck(double tol) {
  if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
  bool ok = true;
  for (const auto& c : gradient_battery(tol)) {
    std::printf("%-18s %.3e  checked %zu  kinked %zu  unresolved %zu  %s\n", c.name.c_str(),
                c.result.max_error, c.result.checked, c.result.kinked, c.result.unresolved,
                c.passed ? "ok" : "FAIL");
    ok = ok && c.passed;
  }
  std::fflush(stdout);
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"WFANet pansharpening toolkit", "wfanet"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic Wald-protocol sample pairs");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--count", synth.count, "Number of samples");
  synth_cmd->add_option("--bands", synth.bands, "MS band count");
  synth_cmd->add_option("--size", synth.size, "Ground-truth height and width");
  synth_cmd->add_option("--ratio", synth.ratio, "Resolution ratio");
  synth_cmd->add_option("--split", synth.split, "Split directory name");
  synth_cmd->add_option("--out", synth.out, "Dataset root")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a network on a dataset split");
  train_cmd->add_option("--data", train_args.data, "Dataset root")->required();
  train_cmd->add_option("--split", train_args.split, "Split directory name");
  train_cmd->add_option("--epochs", train_args.epochs, "Epoch count");
  train_cmd->add_option("--lr", train_args.lr, "Initial learning rate");
  train_cmd->add_option("--batch", train_args.batch, "Batch size");
  train_cmd->add_option("--seed", train_args.seed, "Seed for initialization and shuffling");
  train_cmd->add_option("--config", train_args.config, "Flat JSON network/training config");
  train_cmd->add_option("--out", train_args.out, "Output WFPM file")->required();
  train_cmd->add_option("--report", train_args.report, "Optional JSON training report");

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Pansharpen one PAN/MS pair");
  fuse_cmd->add_option("--pan", fuse_args.pan, "PAN raster")->required();
  fuse_cmd->add_option("--ms", fuse_args.ms, "Low-resolution MS raster")->required();
  fuse_cmd->add_option("--params", fuse_args.params, "WFPM parameter file")->required();
  fuse_cmd->add_option("--out", fuse_args.out, "Fused output raster")->required();
  fuse_cmd->add_option("--diff", fuse_args.diff, "REF.wfrs OUT_DIFF.wfrs: write |fused - ref|")->expected(2);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Compute quality metrics");
  eval_cmd->add_option("--mode", eval_args.mode, "reduced or full")
      ->check(CLI::IsMember({"reduced", "full"}));
  eval_cmd->add_option("--ref", eval_args.ref, "Reference raster (reduced)");
  eval_cmd->add_option("--ms", eval_args.ms, "LRMS raster (full)");
  eval_cmd->add_option("--pan", eval_args.pan, "PAN raster (full)");
  eval_cmd->add_option("--test", eval_args.test, "Raster under evaluation")->required();
  eval_cmd->add_option("--ratio", eval_args.ratio, "Resolution ratio");
  eval_cmd->add_option("--sigma", eval_args.sigma, "Degradation blur sigma (full)");
  eval_cmd->add_option("--json", eval_args.json, "Write the report here");

  DwtArgs dwt_args;
  auto* dwt_cmd = app.add_subcommand("dwt", "Multi-level Haar decomposition");
  dwt_cmd->add_option("--in", dwt_args.in, "Input raster")->required();
  dwt_cmd->add_option("--levels", dwt_args.levels, "Decomposition depth");
  dwt_cmd->add_option("--out", dwt_args.out, "Output directory")->required();

  double tol = 1e-3;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run the gradient-check battery");
  grad_cmd->add_option("--tol", tol, "Maximum relative error");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return do_synth(synth);
    if (*train_cmd) return do_train(train_args);
    if (*fuse_cmd) return do_fuse(fuse_args);
    if (*eval_cmd) return do_eval(eval_args);
    if (*dwt_cmd) return do_dwt(dwt_args);
    if (*grad_cmd) return do_gradcheck(tol);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace wfanet::cli
