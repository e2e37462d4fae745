#include "mcsample/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mcsample/datasets.hpp"
#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/mask_zoo.hpp"
#include "mcsample/metrics.hpp"
#include "mcsample/recon_net.hpp"
#include "mcsample/run_config.hpp"
#include "mcsample/sampler.hpp"
#include "mcsample/training.hpp"

namespace fs = std::filesystem;

namespace mcs {
namespace {

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity() {
  const char* v = std::getenv("MCSAMPLE_VERBOSITY");
  if (!v) return Verbosity::Info;
  const std::string s(v);
  if (s == "quiet" || s == "0") return Verbosity::Quiet;
  if (s == "debug" || s == "2") return Verbosity::Debug;
  return Verbosity::Info;
}

std::ostream& info() {
  static std::ostringstream sink;
  if (verbosity() == Verbosity::Quiet) {
    sink.str("");
    return sink;
  }
  return std::cerr;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::DivergedTraining: return kExitDiverged;
    default: return kExitData;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

// Training flags shared by train-acq and train-recon. Each option is bound to
// a default-initialized local (shown by --help) and applied only when given,
// so explicit flags override the config file.
struct TrainFlags {
  std::string config_path;
  RunConfig defaults;
  RunConfig flags;
  bool single_contrast = false;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config; flags override its values");
    auto& t = flags.train;
    bind(cmd->add_option("--data", flags.data, "dataset manifest"), [this](RunConfig& c) { c.data = flags.data; });
    bind(cmd->add_option("--out", flags.out, "output directory"), [this](RunConfig& c) { c.out = flags.out; });
    bind(cmd->add_option("--steps", t.steps, "optimizer steps")->capture_default_str(),
         [this](RunConfig& c) { c.train.steps = flags.train.steps; });
    bind(cmd->add_option("--batch-size", t.batch_size, "slices per step")->capture_default_str(),
         [this](RunConfig& c) { c.train.batch_size = flags.train.batch_size; });
    bind(cmd->add_option("--lr", t.adam.learning_rate, "Adam learning rate")->capture_default_str(),
         [this](RunConfig& c) { c.train.adam.learning_rate = flags.train.adam.learning_rate; });
    bind(cmd->add_option("--seed", t.seed, "seed for init and shuffling")->capture_default_str(),
         [this](RunConfig& c) { c.train.seed = flags.train.seed; });
    bind(cmd->add_option("--budget", t.budget, "number of lines kept by the learned mask")->capture_default_str(),
         [this](RunConfig& c) { c.train.budget = flags.train.budget; });
    bind(cmd->add_option("--lambda", t.sparsity, "L1 sparsity coefficient")->capture_default_str(),
         [this](RunConfig& c) { c.train.sparsity = flags.train.sparsity; });
    bind(cmd->add_option("--slope", t.slope, "sigmoid slope")->capture_default_str(),
         [this](RunConfig& c) { c.train.slope = flags.train.slope; });
    bind(cmd->add_option("--depth", t.net.depth, "U-net levels")->capture_default_str(),
         [this](RunConfig& c) { c.train.net.depth = flags.train.net.depth; });
    bind(cmd->add_option("--base-channels", t.net.base_channels, "channels at the first level")->capture_default_str(),
         [this](RunConfig& c) { c.train.net.base_channels = flags.train.net.base_channels; });
    bind(cmd->add_flag("--residual", t.net.residual, "add the aliased input to the output (default off)"),
         [this](RunConfig& c) { c.train.net.residual = flags.train.net.residual; });
    bind(cmd->add_flag("--single-contrast", single_contrast, "do not feed the reference contrast (default off)"),
         [](RunConfig& c) { c.train.multi_contrast = false; });
  }

  void bind(CLI::Option* opt, std::function<void(RunConfig&)> apply) { overrides.emplace_back(opt, std::move(apply)); }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? defaults : load_run_config(config_path, defaults);
    for (const auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(c);
    c.train.net.seed = c.train.seed;
    validate(c);
    if (c.data.empty()) throw Error(ErrorKind::Config, "no dataset manifest given (--data or \"data\")");
    if (c.out.empty()) throw Error(ErrorKind::Config, "no output directory given (--out or \"out\")");
    return c;
  }
};

void log_hooks(TrainHooks& hooks, int steps) {
  const auto v = verbosity();
  hooks.on_step = [v, steps](const StepRecord& s) {
    if (v == Verbosity::Debug || (v == Verbosity::Info && (s.step == 1 || s.step % 50 == 0 || s.step == steps)))
      info() << "step " << s.step << " loss " << format_real(s.loss_total) << '\n';
  };
  hooks.on_validation = [](const ValidationRecord& r) {
    info() << "epoch " << r.epoch << " val mae " << format_real(r.mae) << " psnr " << format_real(r.psnr_db)
           << " ssim " << format_real(r.ssim) << '\n';
  };
}

std::string soft_mask_csv(const SamplerParams& params) {
  const auto soft = soft_mask(params);
  std::ostringstream out;
  out << "line,logit,prob\n";
  for (int i = 0; i < params.lines(); ++i)
    out << i << ',' << format_real(params.logits[i]) << ',' << format_real(soft.probs[i]) << '\n';
  return out.str();
}

std::span<const SlicePair> pick_split(const PairDataset& ds, const std::string& name) {
  if (name == "train") return ds.train;
  if (name == "val") return ds.val;
  if (name == "test") return ds.test;
  throw Error(ErrorKind::Config, "unknown split '" + name + "'");
}

// H×W image with acquired rows set to 1.
ImageSlice mask_image(const LineMask& mask, int width) {
  ImageSlice img(mask.n_lines, width);
  for (int r : mask.indices)
    for (int c = 0; c < width; ++c) img.at(r, c) = 1.0;
  return img;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Joint learning of Cartesian line sampling and multi-contrast reconstruction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic paired-contrast dataset");
  std::string synth_out;
  int synth_pairs = 300, synth_size = 64;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--pairs", synth_pairs, "number of slice pairs")->capture_default_str();
  synth->add_option("--size", synth_size, "image height and width")->capture_default_str();
  synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();

  // make-mask
  auto* make_mask = app.add_subcommand("make-mask", "write a baseline sampling mask");
  std::string mask_kind, mask_out;
  int mask_n = 240, mask_budget = 22;
  double center_fraction = 2.0 / 3.0;
  std::optional<double> sigma;
  std::uint64_t mask_seed = 0;
  make_mask->add_option("--kind", mask_kind, "lowres | equidistant | gaussian")
      ->required()
      ->check(CLI::IsMember({"lowres", "equidistant", "gaussian"}));
  make_mask->add_option("--n", mask_n, "number of phase-encode lines")->capture_default_str();
  make_mask->add_option("--budget", mask_budget, "lines to acquire")->capture_default_str();
  make_mask->add_option("--center-fraction", center_fraction, "equidistant: fraction of the budget in the centre")
      ->capture_default_str();
  make_mask->add_option("--sigma", sigma, "gaussian: width in lines (default n/6)");
  make_mask->add_option("--seed", mask_seed, "gaussian: seed")->capture_default_str();
  make_mask->add_option("--out", mask_out, "mask JSON path")->required();

  // train-acq
  auto* train_acq = app.add_subcommand("train-acq", "stage 1: learn the sampling pattern jointly with a reconstructor");
  TrainFlags acq_flags;
  acq_flags.add(train_acq);

  // extract-mask
  auto* extract = app.add_subcommand("extract-mask", "binarize a trained sampler");
  std::string sampler_path, extract_out;
  int extract_budget = 6;
  extract->add_option("--sampler", sampler_path, "sampler checkpoint header (sampler.json)")->required();
  extract->add_option("--budget", extract_budget, "lines to keep")->capture_default_str();
  extract->add_option("--out", extract_out, "mask JSON path")->required();

  // train-recon
  auto* train_recon = app.add_subcommand("train-recon", "stage 2: train the reconstructor for a fixed mask");
  TrainFlags recon_flags;
  recon_flags.add(train_recon);
  std::string recon_mask;
  train_recon->add_option("--mask", recon_mask, "mask JSON path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a reconstructor on a split");
  std::string eval_data, eval_mask, eval_net, eval_out, eval_split = "test";
  eval->add_option("--data", eval_data, "dataset manifest")->required();
  eval->add_option("--mask", eval_mask, "mask JSON path")->required();
  eval->add_option("--net", eval_net, "network checkpoint manifest (net.json)")->required();
  eval->add_option("--out", eval_out, "report CSV path")->required();
  eval->add_option("--split", eval_split, "train | val | test")->capture_default_str();

  // export-figures
  auto* figures = app.add_subcommand("export-figures", "write mask, inputs, reconstructions and error maps as PGM");
  std::string fig_data, fig_mask, fig_net, fig_out, fig_split = "test";
  int fig_slice = 0;
  figures->add_option("--data", fig_data, "dataset manifest")->required();
  figures->add_option("--mask", fig_mask, "mask JSON path")->required();
  figures->add_option("--net", fig_net, "network checkpoint manifest")->required();
  figures->add_option("--out", fig_out, "output directory")->required();
  figures->add_option("--split", fig_split, "train | val | test")->capture_default_str();
  figures->add_option("--slice", fig_slice, "slice index within the split")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      const auto m = synth_dataset(synth_out, synth_pairs, synth_size, synth_seed);
      info() << "wrote " << synth_pairs << " pairs (" << m.train.size() << " train / " << m.val.size() << " val / "
             << m.test.size() << " test) to " << synth_out << '\n';
    } else if (*make_mask) {
      LineMask mask;
      if (mask_kind == "lowres") mask = lowres_mask(mask_n, mask_budget);
      else if (mask_kind == "equidistant") mask = equidistant_mask(mask_n, mask_budget, center_fraction);
      else mask = gaussian_mask(mask_n, mask_budget, sigma, mask_seed);
      write_mask(mask_out, mask);
      info() << mask_kind << " mask, " << mask.budget() << "/" << mask.n_lines << " lines, R = "
             << format_real(acceleration(mask.n_lines, mask.budget())) << '\n';
    } else if (*train_acq) {
      const RunConfig cfg = acq_flags.resolve();
      const auto ds = load_dataset(cfg.data);
      const fs::path out = cfg.out;
      ensure_dir(out);
      TrainHooks hooks;
      log_hooks(hooks, cfg.train.steps);
      const auto result = train_stage1(ds.train, ds.val, cfg.train, hooks);
      save_sampler(out / "sampler.json", result.sampler);
      save_weights(out / "stage1_net.json", result.net);
      write_mask(out / "mask.json", result.mask);
      write_train_log(out / "train_log.csv", result.log);
      write_text_file(out / "soft_mask.csv", soft_mask_csv(result.sampler));
      write_text_file(out / "config.json", run_config_to_json(cfg));
      info() << "stage 1 done in " << format_real(result.log.wall_clock_s) << " s; mask lines:";
      for (int i : result.mask.indices) info() << ' ' << i;
      info() << '\n';
    } else if (*extract) {
      const auto params = load_sampler(sampler_path);
      const auto mask = extract_mask(params, extract_budget);
      write_mask(extract_out, mask);
      info() << "extracted " << mask.budget() << "/" << mask.n_lines << " lines, effective rate "
             << format_real(effective_rate(soft_mask(params))) << '\n';
    } else if (*train_recon) {
      const RunConfig cfg = recon_flags.resolve();
      const auto ds = load_dataset(cfg.data);
      const auto mask = read_mask(recon_mask);
      const fs::path out = cfg.out;
      ensure_dir(out);
      TrainHooks hooks;
      log_hooks(hooks, cfg.train.steps);
      const auto result = train_stage2(ds.train, ds.val, mask, cfg.train, hooks);
      save_weights(out / "net.json", result.net);
      write_train_log(out / "train_log.csv", result.log);
      write_text_file(out / "config.json", run_config_to_json(cfg));
      info() << "stage 2 done in " << format_real(result.log.wall_clock_s) << " s\n";
    } else if (*eval) {
      const auto ds = load_dataset(eval_data);
      const auto mask = read_mask(eval_mask);
      const auto net = load_weights(eval_net);
      auto report = evaluate(net, mask, pick_split(ds, eval_split), net.config.in_channels == 2);
      write_eval_report(eval_out, report);
      info() << "mean mae " << format_real(report.mean_mae) << " psnr " << format_real(report.mean_psnr_db)
             << " dB ssim " << format_real(report.mean_ssim) << " (R = " << format_real(report.acceleration) << ")\n";
    } else if (*figures) {
      const auto ds = load_dataset(fig_data);
      const auto mask = read_mask(fig_mask);
      const auto net = load_weights(fig_net);
      const auto split = pick_split(ds, fig_split);
      if (fig_slice < 0 || static_cast<std::size_t>(fig_slice) >= split.size())
        throw Error(ErrorKind::InvalidInput, "slice index out of range");
      const auto& pair = split[static_cast<std::size_t>(fig_slice)];
      const bool multi = net.config.in_channels == 2;
      const ImageSlice aliased = zero_filled_recon(pair.t2, mask.to_vector());
      const ImageSlice recon = to_image(forward(net, recon_input(pair, mask, multi)));
      const fs::path out = fig_out;
      ensure_dir(out);
      write_pgm16(out / "mask.pgm", mask_image(mask, pair.t2.width));
      write_pgm16(out / "ground_truth.pgm", pair.t2);
      write_pgm16(out / "reference.pgm", pair.t1);
      write_pgm16(out / "zero_filled.pgm", aliased);
      write_pgm16(out / "recon.pgm", recon);
      write_pgm16(out / "error_zero_filled.pgm", error_map(aliased, pair.t2));
      write_pgm16(out / "error_recon.pgm", error_map(recon, pair.t2));
      std::ostringstream csv;
      csv << "image,mae,psnr_db,ssim\n";
      for (const auto& [name, img] : {std::pair<const char*, const ImageSlice*>{"zero_filled", &aliased},
                                      {"recon", &recon}})
        csv << name << ',' << format_real(mae(*img, pair.t2)) << ',' << format_real(psnr(*img, pair.t2)) << ','
            << format_real(ssim(*img, pair.t2)) << '\n';
      write_text_file(out / "metrics.csv", csv.str());
      info() << "wrote figures for " << pair.id << " to " << fig_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("mcsample");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace mcs
