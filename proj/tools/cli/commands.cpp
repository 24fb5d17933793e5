#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "wvi/checkpoint.hpp"
#include "wvi/error.hpp"
#include "wvi/metrics.hpp"
#include "wvi/ot.hpp"
#include "wvi/trainer.hpp"

namespace wvi::cli {

namespace fs = std::filesystem;

Tensor read_points_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("points: cannot read " + path.string());
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": '" + cell + "' is not a finite number");
      }
      values.push_back(v);
      ++count;
    }
    if (rows == 0) {
      dim = count;
    } else if (count != dim) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": ragged row with " + std::to_string(count) +
                    " values, expected " + std::to_string(dim));
    }
    ++rows;
  }
  if (rows == 0) throw IoError("points: " + path.string() + " contains no points");
  return Tensor::matrix(rows, dim, std::move(values));
}

void write_pgm(const fs::path& path, std::span<const double> pixels, std::size_t rows, std::size_t cols) {
  if (pixels.size() != rows * cols) throw ShapeError("pgm: pixel count does not match " + std::to_string(rows) + "x" +
                                                     std::to_string(cols));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("pgm: cannot write " + path.string());
  os << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double p : pixels) {
    const double scaled = std::isfinite(p) ? std::round(p * 255.0) : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0))));
  }
  if (!os) throw IoError("pgm: write to " + path.string() + " failed");
}

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> iterations;
  std::optional<std::string> metric;
  std::optional<std::string> debias;
  std::optional<std::string> out_dir;
};

void apply(RunConfig& c, const Overrides& o) {
  if (o.seed) c.train.seed = *o.seed;
  if (o.epsilon) c.train.epsilon = *o.epsilon;
  if (o.iterations) c.train.sinkhorn_t = *o.iterations;
  if (o.metric) c.train.cost.observable_metric = c.train.cost.residual_metric = parse_metric(*o.metric);
  if (o.debias) c.train.debias = *o.debias == "on";
  if (o.out_dir) c.output.dir = *o.out_dir;
  c.train.validate();
}

RunConfig load_config(const std::string& path, const Overrides& o, std::ostream& err) {
  RunConfig c = load_run_config(path);
  apply(c, o);
  if (!c.defaulted.empty()) {
    err << "note: " << c.defaulted.size() << " config keys not set, using defaults:";
    for (const auto& k : c.defaulted) err << ' ' << k;
    err << '\n';
  }
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".wvi-write-test";
  {
    std::ofstream os(probe);
    if (!os) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write to " + path.string() + " failed");
}

void check_dims(const ModelPair& models, const Dataset& data) {
  if (models.observable_dim() != data.dim()) {
    throw IoError("checkpoint decoder output is " + std::to_string(models.observable_dim()) + "-dimensional (shape " +
                  to_string(models.decoder.weight(models.decoder.num_layers() - 1).shape()) +
                  ") but dataset rows have shape " + to_string(Shape{1, data.dim()}));
  }
}

void add_common(CLI::App* cmd, Overrides& o, bool training) {
  cmd->add_option("--seed", o.seed, "Master seed");
  if (!training) return;
  cmd->add_option("--epsilon", o.epsilon, "Sinkhorn regularization")->check(CLI::PositiveNumber);
  cmd->add_option("--iterations", o.iterations, "Sinkhorn iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--metric", o.metric, "Transport metric")->check(CLI::IsMember({"euclidean", "sqeuclidean"}));
  cmd->add_option("--debias", o.debias, "Debiased loss")->check(CLI::IsMember({"on", "off"}));
}

int cmd_train(const std::string& config_path, const Overrides& o, const std::optional<std::string>& resume,
              std::ostream& out, std::ostream& err) {
  const RunConfig c = load_config(config_path, o, err);
  const Dataset data = load_dataset(c.data);
  Rng init = Rng::stream(c.train.seed, 202);
  const ModelPair initial = ModelPair::create(c.model, data.dim(), init);
  ensure_dir(c.output.dir);

  RunOptions ro;
  ro.log_path = c.output.dir / "train.jsonl";
  ro.checkpoint_path = c.output.dir / "model.ckpt";
  ro.checkpoint_every = c.output.checkpoint_every;
  ro.wall_clock = c.output.wall_clock;
  if (resume) ro.resume_from = *resume;
  ro.checkpoint_extras.emplace_back(
      "meta.image_shape", Tensor::vector({static_cast<double>(data.image_rows), static_cast<double>(data.image_cols)}));
  const RunResult run = train_run(c.train, initial, data.train, ro);

  const MetricReport m = evaluate(run.models, data.validation, c.eval, c.train.seed, "train", c.train.cost.weights);
  write_text(c.output.dir / "metrics.csv", metric_csv_header() + "\n" + to_csv_row(m) + "\n");
  if (!run.reports.empty()) {
    out << "steps " << run.reports.size() << ", first loss " << run.reports.front().debiased_loss << ", last loss "
        << run.reports.back().debiased_loss << '\n';
  }
  out << metric_csv_header() << '\n' << to_csv_row(m) << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, const Overrides& o, std::ostream& out,
             std::ostream& err) {
  const RunConfig c = load_config(config_path, o, err);
  const ModelPair models = restore_models(Checkpoint::load(checkpoint));
  const Dataset data = load_dataset(c.data);
  check_dims(models, data);
  const MetricReport m = evaluate(models, data.validation, c.eval, c.train.seed, "eval", c.train.cost.weights);
  const std::string csv = metric_csv_header() + "\n" + to_csv_row(m) + "\n";
  if (o.out_dir) {
    ensure_dir(*o.out_dir);
    write_text(fs::path(*o.out_dir) / "eval.csv", csv);
  }
  out << csv;
  return kExitOk;
}

struct SinkhornArgs {
  std::string a, b;
  double epsilon = 0.1;
  int iterations = 20;
  std::string metric = "euclidean";
  bool normalize = false;
  bool offset_kernel = false;
  std::optional<double> tol;
  std::optional<std::string> plan;
};

int cmd_sinkhorn(const SinkhornArgs& s, std::ostream& out) {
  const Tensor a = read_points_csv(s.a);
  const Tensor b = read_points_csv(s.b);
  if (a.cols() != b.cols()) {
    throw IoError("points in " + s.a + " have dimension " + std::to_string(a.cols()) + " but " + s.b + " has " +
                  std::to_string(b.cols()));
  }
  Tensor cost = build_cost_matrix(a, b, parse_metric(s.metric));
  double scale = 1.0;
  if (s.normalize) {
    const auto cv = cost.values();
    scale = *std::max_element(cv.begin(), cv.end());
    if (scale > 0.0) cost = cost / scale;
    else scale = 1.0;
  }
  SinkhornConfig cfg;
  cfg.epsilon = s.epsilon;
  cfg.iterations = s.iterations;
  cfg.stop_tol = s.tol;
  cfg.offset_kernel = s.offset_kernel;
  const SinkhornResult r = sinkhorn(cost, cfg);
  out << std::setprecision(17);
  out << "value " << r.value.item() * scale << '\n';
  out << "marginal_violation " << r.coupling.marginal_violation << '\n';
  out << "iterations " << r.coupling.iterations << '\n';
  if (s.normalize) out << "cost_scale " << scale << '\n';
  if (s.plan) {
    std::ostringstream os;
    os << std::setprecision(17);
    const Tensor& p = r.coupling.plan;
    for (std::size_t j = 0; j < p.rows(); ++j) {
      for (std::size_t k = 0; k < p.cols(); ++k) os << (k ? "," : "") << p.at(j, k);
      os << '\n';
    }
    write_text(*s.plan, os.str());
  }
  return kExitOk;
}

int cmd_perturb(const std::string& config_path, const Overrides& o, std::optional<std::size_t> runs,
                std::ostream& out, std::ostream& err) {
  const RunConfig c = load_config(config_path, o, err);
  const Dataset data = load_dataset(c.data);
  PerturbationConfig pc;
  pc.train = c.train;
  pc.model = c.model;
  pc.eval = c.eval;
  pc.runs = runs.value_or(c.perturb.runs);
  pc.master_seed = c.train.seed;
  pc.vary_seed = c.perturb.vary_seed;
  pc.draw_weights = c.perturb.draw_weights;
  ensure_dir(c.output.dir);
  const PerturbationSummary s =
      perturbation_harness(pc, data.train, data.validation, [&](std::size_t i, const std::optional<MetricReport>& r) {
        err << "run " << i + 1 << "/" << pc.runs << (r ? ": " + to_csv_row(*r) : std::string(": failed")) << '\n';
      });
  std::string runs_csv = metric_csv_header() + "\n";
  for (const auto& r : s.runs) runs_csv += to_csv_row(r) + "\n";
  write_text(c.output.dir / "perturb_runs.csv", runs_csv);
  const std::string table = summary_table(s);
  write_text(c.output.dir / "perturb_summary.csv", table);
  for (const auto& f : s.failures) err << "failed " << f.run_id << ": " << f.message << '\n';
  out << table;
  return s.runs.size() >= 2 ? kExitOk : kExitNumerical;
}

struct GenerateArgs {
  std::string checkpoint;
  std::optional<std::string> config;
  std::size_t count = 16;
  std::string out_dir = "wvi-images";
};

int cmd_generate(const GenerateArgs& g, const Overrides& o, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = Checkpoint::load(g.checkpoint);
  const ModelPair models = restore_models(ckpt);
  std::optional<Dataset> data;
  std::uint64_t seed = o.seed.value_or(0);
  if (g.config) {
    const RunConfig c = load_config(*g.config, o, err);
    data = load_dataset(c.data);
    check_dims(models, *data);
    seed = c.train.seed;
  }
  if (g.count == 0) return kExitOk;

  std::size_t rows = 1, cols = models.observable_dim();
  if (ckpt.has("meta.image_shape")) {
    const Tensor& s = ckpt.get("meta.image_shape");
    if (s.size() == 2 && s[0] * s[1] == static_cast<double>(models.observable_dim())) {
      rows = static_cast<std::size_t>(s[0]);
      cols = static_cast<std::size_t>(s[1]);
    }
  }
  ensure_dir(g.out_dir);
  const fs::path dir(g.out_dir);
  std::ostringstream index;
  index << "file,kind,index\n";
  auto name = [](const std::string& kind, std::size_t i) {
    std::ostringstream os;
    os << kind << '_' << std::setw(4) << std::setfill('0') << i << ".pgm";
    return os.str();
  };

  Rng rng = Rng::stream(seed, 301);
  std::vector<double> z(g.count * models.latent_dim());
  for (auto& v : z) v = rng.normal();
  const Tensor samples = decoder_mean(models, Tensor::matrix(g.count, models.latent_dim(), std::move(z)));
  for (std::size_t i = 0; i < g.count; ++i) {
    const auto px = samples.row(i);
    write_pgm(dir / name("sample", i), px, rows, cols);
    index << name("sample", i) << ",sample," << i << '\n';
  }
  if (data) {
    const std::size_t n = std::min(g.count, data->validation.rows());
    const Tensor inputs = slice_rows(data->validation, 0, n);
    const Tensor recon = decoder_mean(models, encoder_mean(models, inputs));
    for (std::size_t i = 0; i < n; ++i) {
      write_pgm(dir / name("input", i), inputs.row(i), rows, cols);
      write_pgm(dir / name("recon", i), recon.row(i), rows, cols);
      index << name("input", i) << ",input," << i << '\n' << name("recon", i) << ",reconstruction," << i << '\n';
    }
  }
  write_text(dir / "index.csv", index.str());
  out << "wrote " << g.count << " samples to " << dir.string() << '\n';
  return kExitOk;
}

template <typename F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wasserstein variational inference"};
  app.require_subcommand(1);

  Overrides o;
  std::string config;
  std::optional<std::string> resume;
  std::string checkpoint;
  std::optional<std::size_t> runs;
  SinkhornArgs s;
  GenerateArgs g;

  auto* train = app.add_subcommand("train", "Train a model pair from a config file");
  train->add_option("--config", config, "Run config file")->required();
  train->add_option("--out-dir", o.out_dir, "Output directory (overrides output.dir)");
  train->add_option("--resume", resume, "Resume from a checkpoint");
  add_common(train, o, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured validation set");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--config", config, "Run config file")->required();
  eval->add_option("--out-dir", o.out_dir, "Write eval.csv here");
  add_common(eval, o, false);

  auto* sk = app.add_subcommand("sinkhorn", "Entropic OT between two CSV point sets");
  sk->add_option("a", s.a, "First point file")->required();
  sk->add_option("b", s.b, "Second point file")->required();
  sk->add_option("--epsilon", s.epsilon, "Regularization strength")->check(CLI::PositiveNumber);
  sk->add_option("--iterations", s.iterations, "Sinkhorn iterations")->check(CLI::PositiveNumber);
  sk->add_option("--metric", s.metric, "Ground metric")->check(CLI::IsMember({"euclidean", "sqeuclidean"}));
  sk->add_flag("--normalize", s.normalize, "Divide costs by their maximum and scale the value back");
  sk->add_flag("--offset-kernel", s.offset_kernel, "Subtract row and column minima inside the kernel");
  sk->add_option("--tol", s.tol, "Stop once the marginal violation falls below this");
  sk->add_option("--plan", s.plan, "Write the transport plan as CSV");

  auto* perturb = app.add_subcommand("perturb", "Weight-perturbation study");
  perturb->add_option("--config", config, "Run config file")->required();
  perturb->add_option("--runs", runs, "Number of runs (overrides perturb.runs)")->check(CLI::Range(2, 100000));
  perturb->add_option("--out-dir", o.out_dir, "Output directory (overrides output.dir)");
  add_common(perturb, o, true);

  auto* gen = app.add_subcommand("generate", "Write samples and reconstructions as PGM images");
  gen->add_option("--checkpoint", g.checkpoint, "Checkpoint file")->required();
  gen->add_option("--config", g.config, "Run config; adds reconstructions of validation images");
  gen->add_option("--count", g.count, "Number of images");
  gen->add_option("--out-dir", g.out_dir, "Image directory");
  add_common(gen, o, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return guarded(err, [&]() -> int {
    if (*train) return cmd_train(config, o, resume, out, err);
    if (*eval) return cmd_eval(config, checkpoint, o, out, err);
    if (*sk) return cmd_sinkhorn(s, out);
    if (*perturb) return cmd_perturb(config, o, runs, out, err);
    if (*gen) return cmd_generate(g, o, out, err);
    return kExitUsage;
  });
}

}  // namespace wvi::cli
