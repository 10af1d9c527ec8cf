#include "sharplab/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

#include "sharplab/checkpoint.hpp"
#include "sharplab/cli/svg.hpp"
#include "sharplab/errors.hpp"
#include "sharplab/universality.hpp"

namespace sharplab::cli {

namespace {

const LossSection& require_loss(const ExperimentConfig& cfg, const char* command) {
  if (!cfg.loss) throw ConfigError(std::string(command) + ": config needs a loss section");
  return *cfg.loss;
}

std::vector<std::uint64_t> resolve_seeds(const ExperimentConfig& cfg, const CommandOptions& opts) {
  if (opts.seed) return {*opts.seed};
  if (!cfg.study.seeds.empty()) return cfg.study.seeds;
  return {0};
}

std::string join_point(std::span<const double> x) {
  std::string out = "(";
  for (std::size_t i = 0; i < x.size(); ++i) out += (i ? ";" : "") + format_double(x[i]);
  return out + ")";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Runs fn(i) for i < count on up to `threads` workers; the first failure
/// (in index order) is rethrown after all workers finish.
template <typename F>
void run_cells(std::size_t count, std::size_t threads, F fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SharpnessSpec spec_with_measure(SharpnessSpec spec, const StudySection& study, std::size_t d) {
  if (study.measure.empty()) return spec;
  MeasureSpec mu = study.measure == "gaussian"   ? MeasureSpec::gaussian(d)
                   : study.measure == "sphere"   ? MeasureSpec::sphere(d)
                                                 : MeasureSpec::hypercube(d, study.half_width);
  for (auto& m : spec.measures) m = mu;
  return spec;
}

}  // namespace

std::string describe_preset(const SpecPreset& p) {
  switch (p.kind) {
    case PresetKind::Determinant: return "t=" + format_double(p.half_width);
    case PresetKind::Moment:
      return "n=" + std::to_string(p.degree) + " " + (p.moment_measure == MomentMeasure::Sphere ? "sphere" : "gaussian");
    case PresetKind::Charpoly: return "sigma=" + format_double(p.sigma);
    default: return "";
  }
}

std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
    ++k;
  }
  if (k < 2) return {std::nan(""), std::nan("")};
  const double n = static_cast<double>(k);
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"oracle",     "estimate",         "train",
                                                 "bias-study", "invariance-check", "universality-demo"};
  return names;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts) {
  if (name == "oracle") return run_oracle(cfg, opts);
  if (name == "estimate") return run_estimate(cfg, opts);
  if (name == "train") return run_train(cfg, opts);
  if (name == "bias-study") return run_bias_study(cfg, opts);
  if (name == "invariance-check") return run_invariance_check(cfg, opts);
  if (name == "universality-demo") return run_universality_demo(cfg, opts);
  throw ConfigError("unknown subcommand '" + name + "'");
}

// ---------------------------------------------------------------- oracle

CommandResult run_oracle(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const FixedLoss fixed = build_loss(require_loss(cfg, "oracle"));
  const std::size_t d = fixed.dim();
  const SymmetricMatrix h = fixed.hessian();
  const Spectrum spectrum = symmetric_eig(h);
  const QuadraticOracle oracle = quadratic_oracle(h);
  std::vector<SpecPreset> presets = cfg.study.presets;
  if (presets.empty())
    presets = {SpecPreset::trace(), SpecPreset::frobenius(), SpecPreset::determinant(5.0),
               SpecPreset::moment(2, MomentMeasure::Gaussian), SpecPreset::charpoly(0.1)};
  const std::uint64_t seed = resolve_seeds(cfg, opts).front();

  CommandResult result;
  result.table.header = {"preset", "exact", "estimate", "stderr", "zscore", "parameters", "note"};
  for (std::size_t k = 0; k < presets.size(); ++k) {
    const SpecPreset& p = presets[k];
    std::optional<double> exact, estimate, stderr_, z;
    std::string note;
    try {
      exact = measure_exact(spectrum, p);
    } catch (const Error& e) {
      note = e.what();
    }
    try {
      const Estimate e = estimate_S(oracle, make_spec(p, d), SeededStream(seed, domain_tag("oracle"), k),
                                    cfg.study.samples);
      estimate = e.value;
      stderr_ = e.stderr;
    } catch (const Error& e) {
      note += (note.empty() ? "" : "; ") + std::string(e.what());
    }
    if (exact && *exact == 0.0 && p.kind == PresetKind::Determinant && estimate)
      note = "singular Hessian: the exact value is the t -> infinity limit, the estimate integrates over [-t, t]^d";
    if (exact && estimate) {
      const double diff = std::abs(*estimate - *exact);
      z = *stderr_ > 0.0 ? diff / *stderr_ : (diff == 0.0 ? 0.0 : INFINITY);
    }
    result.table.add_row({preset_name(p.kind), format_optional(exact), format_optional(estimate), format_optional(stderr_),
                          format_optional(z), describe_preset(p), note});
  }
  const auto path = opts.out_dir / "oracle.csv";
  result.table.write(path);
  result.files.push_back(path);
  return result;
}

// ---------------------------------------------------------------- estimate

CommandResult run_estimate(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const LossSection& section = require_loss(cfg, "estimate");
  if (section.name == "matrix") throw ConfigError("estimate: needs a loss function, not an explicit matrix");
  if (cfg.study.rhos.empty()) throw ConfigError("estimate: study.rhos must list at least one rho");
  const FixedLoss fixed = build_loss(section);
  const std::size_t d = fixed.dim();
  const double exact = measure_exact(symmetric_eig(fixed.hessian()), cfg.spec);
  const SharpnessSpec spec = make_spec(cfg.spec, d);
  const std::uint64_t seed = resolve_seeds(cfg, opts).front();

  CommandResult result;
  result.table.header = {"rho", "estimate", "exact", "abs_error", "stderr"};
  std::vector<double> rhos, errors;
  for (std::size_t k = 0; k < cfg.study.rhos.size(); ++k) {
    const double rho = cfg.study.rhos[k];
    const Estimate e =
        estimate_R(*fixed.loss, fixed.point, spec, rho, SeededStream(seed, domain_tag("estimate"), k), cfg.study.samples);
    const double err = std::abs(e.value - exact);
    rhos.push_back(rho);
    errors.push_back(err);
    result.table.add_row(
        {format_double(rho), format_double(e.value), format_double(exact), format_double(err), format_double(e.stderr)});
  }
  const auto [slope, intercept] = loglog_fit(rhos, errors);
  result.summary.emplace_back("slope", slope);

  const auto csv = opts.out_dir / "estimate.csv";
  result.table.write(csv);
  CsvTable fit;
  fit.header = {"slope", "intercept", "points"};
  fit.add_row({format_double(slope), format_double(intercept), std::to_string(rhos.size())});
  const auto fit_path = opts.out_dir / "estimate_fit.csv";
  fit.write(fit_path);

  LineChart chart;
  chart.title = "|R_rho - S| against rho, " + preset_name(cfg.spec.kind) + " measure";
  chart.x_label = "rho";
  chart.y_label = "absolute error";
  chart.log_x = chart.log_y = true;
  chart.series.push_back({"abs error", rhos, errors, {}, {}});
  std::ostringstream note;
  note << "fitted log-log slope = " << format_double(slope);
  chart.notes.push_back(note.str());
  const auto svg = opts.out_dir / "estimate.svg";
  write_svg(svg, chart);
  result.files = {csv, fit_path, svg};
  return result;
}

// ---------------------------------------------------------------- train / bias-study

namespace {

struct Cell {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  RunRecord record;
};

// Shortest round-trip form, so file names read lambda0.1 rather than 17 digits.
std::string short_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string cell_stem(const Cell& c) {
  return "lambda" + short_double(c.lambda) + "_seed" + std::to_string(c.seed);
}

CsvTable run_table(const RunRecord& r) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "train_accuracy", "test_accuracy", "trace_estimate", "frobenius_sq_estimate",
              "lambda", "seed"};
  for (const auto& row : r.rows)
    t.add_row({std::to_string(row.epoch), format_double(row.train_loss), format_optional(row.train_accuracy),
               format_optional(row.test_accuracy), format_optional(row.trace_estimate),
               format_optional(row.frobenius_sq_estimate), format_double(row.lambda), std::to_string(row.seed)});
  return t;
}

struct TrainSetup {
  std::optional<FixedLoss> fixed;
  std::optional<Mlp> model;
  std::optional<DataSplits> data;
};

TrainSetup make_setup(const ExperimentConfig& cfg, const char* command) {
  if (!cfg.has_optimizer) throw ConfigError(std::string(command) + ": config needs an optimizer section");
  TrainSetup s;
  if (cfg.model) {
    s.model.emplace(*cfg.model);
    s.data = build_datasets(*cfg.dataset, 0);
    if (s.data->train.features != cfg.model->inputs())
      throw ConfigError(std::string(command) + ": dataset has " + std::to_string(s.data->train.features) +
                        " features but the model expects " + std::to_string(cfg.model->inputs()));
    if (s.data->train.num_classes > cfg.model->outputs() && cfg.model->head == LossHead::SoftmaxCrossEntropy) {
      std::int32_t max_label = 0;
      for (auto l : s.data->train.labels) max_label = std::max(max_label, l);
      if (static_cast<std::size_t>(max_label) >= cfg.model->outputs())
        throw ConfigError(std::string(command) + ": labels exceed the model's output count");
    }
  } else if (cfg.loss) {
    if (cfg.loss->name == "matrix") throw ConfigError(std::string(command) + ": needs a loss function, not a matrix");
    s.fixed = build_loss(*cfg.loss);
  } else {
    throw ConfigError(std::string(command) + ": config needs a loss or a model/dataset pair");
  }
  return s;
}

std::string architecture_label(const ExperimentConfig& cfg) {
  return cfg.model ? cfg.model->describe() : "loss:" + cfg.loss->name;
}

std::vector<Cell> train_cells(const ExperimentConfig& cfg, const CommandOptions& opts, const TrainSetup& setup,
                              const std::vector<double>& lambdas, const MetricOptions& metrics, bool checkpoints) {
  std::vector<Cell> cells;
  for (double l : lambdas)
    for (std::uint64_t s : resolve_seeds(cfg, opts)) cells.push_back({l, s, {}});
  std::vector<double> seconds(cells.size(), 0.0);

  run_cells(cells.size(), opts.threads, [&](std::size_t i) {
    Cell& c = cells[i];
    TrainConfig tc = cfg.optimizer;
    tc.lambda = c.lambda;
    tc.seed = c.seed;
    Vector x0;
    if (setup.model) {
      x0 = setup.model->initialize(SeededStream(c.seed, domain_tag("init")));
      const Dataset* test = setup.data->test ? &*setup.data->test : nullptr;
      c.record = train(*setup.model, setup.data->train, test, x0, tc, metrics);
    } else {
      x0 = setup.fixed->point;
      c.record = train(*setup.fixed->loss, x0, tc);
    }
    for (const auto& row : c.record.rows) seconds[i] += row.seconds;
    run_table(c.record).write(opts.out_dir / ("run_" + cell_stem(c) + ".csv"));
    if (checkpoints) {
      Checkpoint cp;
      cp.header = {architecture_label(cfg), config_hash(cfg.source), c.seed, c.record.state.iteration};
      cp.params = c.record.state.x;
      save_checkpoint(opts.out_dir / ("checkpoint_" + cell_stem(c) + ".ckpt"), cp);
    }
  });

  nlohmann::ordered_json timings = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cells.size(); ++i)
    timings.push_back({{"lambda", cells[i].lambda}, {"seed", cells[i].seed}, {"seconds", seconds[i]}});
  write_text(opts.out_dir / "timings.json", timings.dump(2) + "\n");
  return cells;
}

MetricOptions metric_options(const StudySection& st, std::size_t default_frobenius) {
  MetricOptions m;
  m.estimate_examples = st.estimate_examples;
  m.frobenius_probes = st.frobenius_probes > 0 ? st.frobenius_probes : default_frobenius;
  m.trace_probes = st.trace_probes;
  m.probe_seed = st.probe_seed;
  return m;
}

}  // namespace

CommandResult run_train(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const TrainSetup setup = make_setup(cfg, "train");
  const std::vector<double> lambdas = cfg.study.lambdas.empty() ? std::vector<double>{cfg.optimizer.lambda} : cfg.study.lambdas;
  const auto cells = train_cells(cfg, opts, setup, lambdas, metric_options(cfg.study, 0), true);

  CommandResult result;
  result.table.header = {"lambda", "seed", "epochs", "final_train_loss", "final_train_accuracy", "final_test_accuracy",
                         "run_csv", "checkpoint"};
  for (const Cell& c : cells) {
    const auto stem = cell_stem(c);
    result.files.push_back(opts.out_dir / ("run_" + stem + ".csv"));
    result.files.push_back(opts.out_dir / ("checkpoint_" + stem + ".ckpt"));
    const EpochRow* last = c.record.rows.empty() ? nullptr : &c.record.rows.back();
    result.table.add_row({format_double(c.lambda), std::to_string(c.seed), std::to_string(c.record.rows.size()),
                          last ? format_double(last->train_loss) : "", last ? format_optional(last->train_accuracy) : "",
                          last ? format_optional(last->test_accuracy) : "", "run_" + stem + ".csv",
                          "checkpoint_" + stem + ".ckpt"});
  }
  const auto path = opts.out_dir / "train_summary.csv";
  result.table.write(path);
  result.files.push_back(path);
  return result;
}

CommandResult run_bias_study(const ExperimentConfig& cfg, const CommandOptions& opts) {
  if (!cfg.model) throw ConfigError("bias-study: config needs model and dataset sections");
  if (cfg.study.lambdas.empty()) throw ConfigError("bias-study: study.lambdas must list at least one lambda");
  const TrainSetup setup = make_setup(cfg, "bias-study");
  const MetricOptions metrics = metric_options(cfg.study, 100);
  const auto cells = train_cells(cfg, opts, setup, cfg.study.lambdas, metrics, false);
  const std::size_t seeds = resolve_seeds(cfg, opts).size();

  CsvTable curves;
  curves.header = {"lambda", "seed", "epoch", "frobenius_sq_estimate", "test_accuracy", "train_loss"};
  for (const Cell& c : cells)
    for (const auto& row : c.record.rows)
      curves.add_row({format_double(c.lambda), std::to_string(c.seed), std::to_string(row.epoch),
                      format_optional(row.frobenius_sq_estimate), format_optional(row.test_accuracy),
                      format_double(row.train_loss)});

  CommandResult result;
  result.table.header = {"lambda",      "seeds", "final_mean_frobenius_sq", "final_stderr", "min_final_test_accuracy",
                         "mean_final_test_accuracy"};
  LineChart chart;
  chart.title = "Hessian Frobenius norm squared during training";
  chart.x_label = "epoch";
  chart.y_label = "Frobenius norm squared (estimate)";
  chart.log_y = true;
  chart.notes.push_back(architecture_label(cfg) + ", " + to_string(cfg.optimizer.kind) +
                        " rho=" + format_double(cfg.optimizer.rho) + " n=" + std::to_string(cfg.optimizer.samples) +
                        ", mean over " + std::to_string(seeds) + " seed(s), band = 1 standard error");
  const std::size_t epochs = cfg.optimizer.epochs;
  for (std::size_t li = 0; li < cfg.study.lambdas.size(); ++li) {
    const double lambda = cfg.study.lambdas[li];
    ChartSeries s;
    s.label = "lambda = " + short_double(lambda);
    double final_mean = 0.0, final_se = 0.0;
    double min_acc = INFINITY, mean_acc = 0.0;
    bool have_acc = false;
    for (std::size_t e = 0; e < epochs; ++e) {
      std::vector<double> v;
      for (std::size_t k = 0; k < seeds; ++k) {
        const auto& row = cells[li * seeds + k].record.rows[e];
        if (row.frobenius_sq_estimate) v.push_back(*row.frobenius_sq_estimate);
      }
      if (v.empty()) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
      s.x.push_back(static_cast<double>(e + 1));
      s.y.push_back(mean);
      s.lower.push_back(mean - se);
      s.upper.push_back(mean + se);
      final_mean = mean;
      final_se = se;
    }
    for (std::size_t k = 0; k < seeds; ++k) {
      const auto& rows = cells[li * seeds + k].record.rows;
      if (rows.empty() || !rows.back().test_accuracy) continue;
      have_acc = true;
      min_acc = std::min(min_acc, *rows.back().test_accuracy);
      mean_acc += *rows.back().test_accuracy / static_cast<double>(seeds);
    }
    result.table.add_row({format_double(lambda), std::to_string(seeds), epochs ? format_double(final_mean) : "",
                          epochs ? format_double(final_se) : "", have_acc ? format_double(min_acc) : "",
                          have_acc ? format_double(mean_acc) : ""});
    chart.series.push_back(std::move(s));
  }

  const auto curves_path = opts.out_dir / "bias_study.csv";
  const auto summary_path = opts.out_dir / "bias_summary.csv";
  const auto svg_path = opts.out_dir / "bias_study.svg";
  const auto meta_path = opts.out_dir / "bias_metadata.json";
  curves.write(curves_path);
  result.table.write(summary_path);
  write_svg(svg_path, chart);

  std::size_t hidden = cfg.model->layers.size() - 2;
  nlohmann::ordered_json meta = {
      {"architecture", cfg.model->describe()},
      {"hidden_layers", hidden},
      {"train_rows", setup.data->train.rows},
      {"test_rows", setup.data->test ? setup.data->test->rows : 0},
      {"epochs", epochs},
      {"seeds", seeds},
      {"optimizer", to_string(cfg.optimizer.kind)},
      {"lr", cfg.optimizer.lr},
      {"momentum", cfg.optimizer.momentum},
      {"rho", cfg.optimizer.rho},
      {"samples", cfg.optimizer.samples},
      {"batch_size", cfg.optimizer.batch_size},
      {"frobenius_probes", metrics.frobenius_probes},
      {"estimate_examples", metrics.estimate_examples},
      {"scale_note", "desk-scale run: reduced depth and a data subset; compare trends, not absolute values"},
  };
  write_text(meta_path, meta.dump(2) + "\n");
  result.files = {curves_path, summary_path, svg_path, meta_path};
  for (const Cell& c : cells) result.files.push_back(opts.out_dir / ("run_" + cell_stem(c) + ".csv"));
  return result;
}

// ---------------------------------------------------------------- invariance-check

namespace {

struct Transform {
  std::string label;
  std::vector<double> forward;  // row-major d x d
  std::vector<double> inverse;
};

Vector mat_vec(const std::vector<double>& m, std::span<const double> v) {
  const std::size_t d = v.size();
  Vector out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += m[i * d + j] * v[j];
  return out;
}

Transform rescale(std::size_t d, double k) {
  Transform t{"rescale(k=" + format_double(k) + ")", std::vector<double>(d * d, 0.0), std::vector<double>(d * d, 0.0)};
  // diag(k, 1/k, 1, ...): determinant one.
  for (std::size_t i = 0; i < d; ++i) {
    const double f = i == 0 ? k : (i == 1 ? 1.0 / k : 1.0);
    t.forward[i * d + i] = f;
    t.inverse[i * d + i] = 1.0 / f;
  }
  return t;
}

Transform plane_rotation(std::size_t d, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  Transform t{"rotation(" + format_double(degrees) + "deg)", std::vector<double>(d * d, 0.0), {}};
  for (std::size_t i = 0; i < d; ++i) t.forward[i * d + i] = 1.0;
  t.forward[0] = std::cos(a);
  t.forward[1] = -std::sin(a);
  t.forward[d] = std::sin(a);
  t.forward[d + 1] = std::cos(a);
  t.inverse.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) t.inverse[i * d + j] = t.forward[j * d + i];
  return t;
}

Transform random_rotation(std::size_t d, const SeededStream& stream, std::uint64_t index) {
  std::vector<double> a(d * d);
  stream.fill_normal(1, index, a);
  const Spectrum s = symmetric_eig(SymmetricMatrix(d, a));
  Transform t{"rotation(random)", s.eigenvectors, {}};
  // Flip one column if needed so the determinant is +1.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> q(t.forward.data(), d, d);
  if (q.determinant() < 0.0)
    for (std::size_t i = 0; i < d; ++i) t.forward[i * d] = -t.forward[i * d];
  t.inverse.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) t.inverse[i * d + j] = t.forward[j * d + i];
  return t;
}

}  // namespace

CommandResult run_invariance_check(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const LossSection& section = require_loss(cfg, "invariance-check");
  std::string family;
  if (section.name == "scale-inv") family = "rescale";
  if (section.name == "rot-inv") family = "rotation";
  if (family.empty())
    throw ConfigError("invariance-check: loss '" + section.name +
                      "' declares no invariance family (scale-inv: rescale, rot-inv: rotation)");
  if (!cfg.study.transform) throw ConfigError("invariance-check: study.transform is required");
  const TransformSection& ts = *cfg.study.transform;
  if (ts.kind != family)
    throw ConfigError("invariance-check: loss '" + section.name + "' is invariant under " + family + ", not " + ts.kind);

  const FixedLoss fixed = build_loss(section);
  const std::size_t d = fixed.dim();
  if (family == "rotation" && d < 2) throw ConfigError("invariance-check: rotations need dimension >= 2");
  const SharpnessSpec spec = spec_with_measure(make_spec(cfg.spec, d), cfg.study, d);
  for (const auto& mu : spec.measures) {
    if (family == "rescale" && !is_scale_invariant(mu))
      throw ConfigError("invariance-check: rescaling requested but is_scale_invariant(" + to_string(mu.kind()) +
                        ") is false; use the hypercube measure");
    if (family == "rotation" && mu.kind() != MeasureKind::StandardGaussian && mu.kind() != MeasureKind::UnitSphereUniform)
      throw ConfigError("invariance-check: rotation requested but " + to_string(mu.kind()) + " is not rotation invariant");
  }
  const std::uint64_t seed = resolve_seeds(cfg, opts).front();
  const SeededStream stream(seed, domain_tag("invariance"));
  const SeededStream draws = stream.with_domain("invariance-points");

  std::vector<std::pair<Vector, Transform>> cases;
  cases.emplace_back(fixed.point, family == "rescale" ? rescale(d, ts.k) : plane_rotation(d, ts.angle_degrees));
  for (std::uint64_t p = 0; p < cfg.study.pairs; ++p) {
    Vector x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = -2.0 + 4.0 * draws.uniform(0, p, j);
    if (family == "rescale") {
      cases.emplace_back(std::move(x), rescale(d, std::exp(-1.5 + 3.0 * draws.uniform(2, p, 0))));
    } else {
      cases.emplace_back(std::move(x), random_rotation(d, draws, p));
    }
  }

  CommandResult result;
  result.table.header = {"transform", "point", "S_at_x", "S_at_transformed_x", "coupled_abs_diff", "analytic_abs_diff"};
  double worst = 0.0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& [x, t] = cases[c];
    const Vector tx = mat_vec(t.forward, x);
    const auto oracle_x = quadratic_oracle(*fixed.loss, x);
    const auto oracle_tx = quadratic_oracle(*fixed.loss, tx);
    const SeededStream s = stream.at_iteration(c);
    const std::size_t n = cfg.study.samples;
    const Estimate at_x = estimate_S(oracle_x, spec, s, n);
    const Estimate at_tx = estimate_S(oracle_tx, spec, s, n);
    EstimatorOptions coupling;
    const auto& inverse = t.inverse;
    coupling.sample_map = [&inverse](std::span<double> v) {
      const Vector w = mat_vec(inverse, v);
      std::copy(w.begin(), w.end(), v.begin());
    };
    const Estimate coupled = estimate_S(oracle_x, spec, s, n, coupling);
    const double diff = std::abs(at_tx.value - coupled.value);
    worst = std::max(worst, diff);
    std::string analytic_diff;
    {
      try {
        const double a = measure_exact(symmetric_eig(hessian_at(*fixed.loss, x)), cfg.spec);
        const double b = measure_exact(symmetric_eig(hessian_at(*fixed.loss, tx)), cfg.spec);
        analytic_diff = format_double(std::abs(a - b));
      } catch (const DomainError&) {
        // no closed form at this point (e.g. an indefinite Hessian for the determinant)
      }
    }
    result.table.add_row({t.label, join_point(x), format_double(at_x.value), format_double(at_tx.value),
                          format_double(diff), analytic_diff});
  }
  result.summary.emplace_back("max_coupled_abs_diff", worst);
  const auto path = opts.out_dir / "invariance.csv";
  result.table.write(path);
  result.files.push_back(path);
  return result;
}

// ---------------------------------------------------------------- universality-demo

CommandResult run_universality_demo(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const FixedLoss fixed = build_loss(require_loss(cfg, "universality-demo"));
  const std::size_t d = fixed.dim();
  const SymmetricMatrix h = fixed.hessian();
  const Spectrum s = symmetric_eig(h);
  const double radius = std::max(std::abs(s.eigenvalues.front()), std::abs(s.eigenvalues.back()));
  const Vector nodes = moment_nodes(d, node_interval_bound(radius), cfg.study.node_layout);

  MomentProbe probe;
  ReconstructOptions options;
  if (cfg.study.mc_samples > 0) {
    const std::uint64_t seed = resolve_seeds(cfg, opts).front();
    probe = probe_moments(quadratic_oracle(h), d, nodes, radius, cfg.study.mc_samples,
                          SeededStream(seed, domain_tag("universality")));
    options.root_tol = 1e-2;
  } else {
    probe = probe_moments(s, nodes);
  }
  const std::vector<double> eig = reconstruct_eigenvalues(probe, options);

  // Dirac quadratic forms: finite differences for losses, exact for matrices.
  const QuadraticOracle dirac = fixed.matrix ? quadratic_oracle(*fixed.matrix) : finite_difference_oracle(*fixed.loss, fixed.point);
  const SymmetricMatrix rebuilt = reconstruct_hessian(probe_hessian(dirac, d));

  CommandResult result;
  result.table.header = {"section", "index", "truth", "reconstructed", "abs_error"};
  double eig_err = 0.0, entry_err = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double e = std::abs(eig[k] - s.eigenvalues[k]);
    eig_err = std::max(eig_err, e);
    result.table.add_row({"eigenvalue", std::to_string(k), format_double(s.eigenvalues[k]), format_double(eig[k]),
                          format_double(e)});
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double e = std::abs(rebuilt(i, j) - h(i, j));
      entry_err = std::max(entry_err, e);
      result.table.add_row({"hessian", std::to_string(i) + ";" + std::to_string(j), format_double(h(i, j)),
                            format_double(rebuilt(i, j)), format_double(e)});
    }
  }
  result.table.add_row({"max_abs_error", "eigenvalue", "", "", format_double(eig_err)});
  result.table.add_row({"max_abs_error", "hessian", "", "", format_double(entry_err)});
  result.summary = {{"max_eigenvalue_error", eig_err}, {"max_hessian_error", entry_err}};
  const auto path = opts.out_dir / "universality.csv";
  result.table.write(path);
  result.files.push_back(path);
  return result;
}

}  // namespace sharplab::cli
