// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: sharplab_acceptance [criterion numbers...]  (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "sharplab/cli/commands.hpp"
#include "sharplab/cli/config.hpp"
#include "sharplab/cli/csv.hpp"
#include "sharplab/dataset.hpp"
#include "sharplab/errors.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/mlp.hpp"
#include "sharplab/optim.hpp"
#include "sharplab/sharpness.hpp"
#include "sharplab/universality.hpp"

using namespace sharplab;
namespace fs = std::filesystem;

namespace {

const fs::path kRepo = SHARPLAB_REPO_DIR;
const std::string kCli = SHARPLAB_CLI_PATH;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }

  std::string report() const {
    std::string r = detail.str();
    if (!failures.empty()) r += (r.empty() ? "" : " | ") + std::string("failed: ");
    for (std::size_t i = 0; i < failures.size(); ++i) r += (i ? "; " : "") + failures[i];
    return r;
  }
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<void(Outcome&)> body;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "sharplab-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t column(const cli::CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw std::runtime_error("missing column " + name);
}

double summary_value(const cli::CommandResult& r, const std::string& name) {
  for (const auto& [key, value] : r.summary)
    if (key == name) return value;
  throw std::runtime_error("missing summary entry " + name);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

SymmetricMatrix random_symmetric(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(d * d);
  for (auto& v : a) v = u(rng);
  return SymmetricMatrix(d, a);
}

SymmetricMatrix random_with_spectrum(std::size_t d, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::normal_distribution<double> g;
  Vector lambda(d);
  for (auto& l : lambda) l = u(rng);
  std::vector<double> a(d * d);
  for (auto& v : a) v = g(rng);
  const Spectrum basis = symmetric_eig(SymmetricMatrix(d, a));
  return SymmetricMatrix::from_eigen(lambda, basis.eigenvectors);
}

double spectral_radius(const Spectrum& s) {
  return std::max(std::abs(s.eigenvalues.front()), std::abs(s.eigenvalues.back()));
}

// ---------------------------------------------------------------- 1

void oracle_identities(Outcome& out) {
  std::mt19937_64 rng(2024);
  std::size_t checks = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + trial % 3;
    const SymmetricMatrix h = random_symmetric(d, rng);
    const Spectrum s = symmetric_eig(h);
    // sigma * |lambda| <= 1/4 keeps exp(sigma Y) square-integrable.
    const double sigma = 0.25 / spectral_radius(s);
    for (const SpecPreset& p : {SpecPreset::trace(), SpecPreset::frobenius(), SpecPreset::charpoly(sigma),
                                SpecPreset::moment(2, MomentMeasure::Gaussian),
                                SpecPreset::moment(2, MomentMeasure::Sphere)}) {
      const Estimate e = estimate_S(quadratic_oracle(h), make_spec(p, d), SeededStream(1000 + trial), 200'000);
      const double z = std::abs(e.value - measure_exact(s, p)) / e.stderr;
      worst = std::max(worst, z);
      ++checks;
      out.require(z < 4.0, preset_name(p.kind) + " trial " + std::to_string(trial) + " z=" + fmt(z));
    }
    // Determinant needs a positive definite Hessian; eigenvalues >= 1 keep the
    // [-5, 5]^2 truncation far below the Monte-Carlo noise.
    const SymmetricMatrix pd = random_with_spectrum(2, rng, 1.0, 3.0);
    const Estimate e =
        estimate_S(quadratic_oracle(pd), make_spec(SpecPreset::determinant(5.0), 2), SeededStream(2000 + trial), 1'000'000);
    const double z = std::abs(e.value - measure_exact(symmetric_eig(pd), SpecPreset::determinant(5.0))) / e.stderr;
    worst = std::max(worst, z);
    ++checks;
    out.require(z < 4.0, "determinant trial " + std::to_string(trial) + " z=" + fmt(z));
  }
  out.detail << checks << " estimates, max |z| = " << fmt(worst);
}

// ---------------------------------------------------------------- 2

void saddle_example(Outcome& out) {
  SaddleToy loss;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Vector x{u(rng), u(rng)};
    const Spectrum s = symmetric_eig(hessian_at(loss, x));
    const double tr = measure_exact(s, SpecPreset::trace());
    const double fro = measure_exact(s, SpecPreset::frobenius());
    out.require(tr == 0.0, "trace " + fmt(tr));
    out.require(fro == 2.0, "frobenius " + fmt(fro));
  }
  out.detail << "trace 0 and frobenius 2 at 100 points";
}

// ---------------------------------------------------------------- 3

void invariance_split(Outcome& out) {
  ScaleInvToy loss;
  const auto det = [&](const Vector& x) {
    const SymmetricMatrix h = hessian_at(loss, x);
    return h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector x{u(rng), u(rng)};
    for (double k : {0.5, 2.0, 10.0}) worst = std::max(worst, std::abs(det({k * x[0], x[1] / k}) - det(x)));
  }
  out.require(worst <= 1e-8, "det drift " + fmt(worst));
  const auto trace = [&](const Vector& x) { return hessian_at(loss, x).trace(); };
  const double t1 = trace({1.0, 1.0}), t2 = trace({2.0, 0.5});
  out.require(t1 != t2, "trace equal under rescaling");
  out.detail << "max det drift " << fmt(worst) << ", trace " << t1 << " vs " << t2;
}

// ---------------------------------------------------------------- 4

void convergence_rate(Outcome& out) {
  const auto dir = scratch("c4");
  const auto cfg = cli::load_config(kRepo / "configs" / "estimate-scale-inv.json");
  out.require(cfg.study.rhos == Vector({0.2, 0.1, 0.05, 0.025}) && cfg.study.samples == 1'000'000,
              "config drifted from the criterion's schedule");
  cli::CommandOptions opts;
  opts.out_dir = dir;
  const auto result = cli::run_command("estimate", cfg, opts);
  const double slope = summary_value(result, "slope");
  out.require(slope >= 0.7 && slope <= 1.5, "slope " + fmt(slope) + " outside [0.7, 1.5]");
  out.detail << "log-log slope " << fmt(slope);
}

// ---------------------------------------------------------------- 5

void moment_pipeline(Outcome& out) {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 2 + trial % 5;
    const SymmetricMatrix h = random_with_spectrum(d, rng, -3.0, 3.0);
    const Spectrum s = symmetric_eig(h);
    const Vector nodes = moment_nodes(d, node_interval_bound(spectral_radius(s)));
    const auto got = reconstruct_eigenvalues(probe_moments(s, nodes));
    if (got.size() != d) {
      out.require(false, "trial " + std::to_string(trial) + " returned " + std::to_string(got.size()) + " values");
      continue;
    }
    for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::abs(got[k] - s.eigenvalues[k]));
  }
  out.require(worst <= 1e-6, "exact-moment error " + fmt(worst));

  double worst_mc = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const SymmetricMatrix h = trial == 0 ? SymmetricMatrix::diagonal(Vector{0.8, -0.5}) : random_with_spectrum(2, rng, -1.0, 1.0);
    const Spectrum s = symmetric_eig(h);
    const Vector nodes = moment_nodes(2, node_interval_bound(1.0));
    const auto probe = probe_moments(quadratic_oracle(h), 2, nodes, 1.0, 10'000'000, SeededStream(300 + trial));
    ReconstructOptions options;
    options.root_tol = 1e-2;
    const auto got = reconstruct_eigenvalues(probe, options);
    for (std::size_t k = 0; k < 2; ++k) worst_mc = std::max(worst_mc, std::abs(got[k] - s.eigenvalues[k]));
  }
  out.require(worst_mc <= 0.05, "Monte-Carlo error " + fmt(worst_mc));
  out.detail << "exact max error " << fmt(worst) << ", MC (n=1e7, 3 matrices) max error "
             << fmt(worst_mc);
}

// ---------------------------------------------------------------- 6

void dirac_pipeline(Outcome& out) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + trial % 8;
    std::vector<double> a(d * d);
    for (auto& v : a) v = u(rng);
    const SymmetricMatrix h(d, a);
    const SymmetricMatrix back = reconstruct_hessian(probe_hessian(quadratic_oracle(h), d));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(back(i, j) - h(i, j)) / h.max_abs());
  }
  out.require(worst <= 1e-14, "relative error " + fmt(worst));

  ScaleInvToy loss;
  double worst_fd = 0.0;
  std::uniform_real_distribution<double> p(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const Vector x = i == 0 ? Vector{1.0, 1.0} : Vector{p(rng), p(rng)};
    const SymmetricMatrix truth = *loss.exact_hessian(x);
    const SymmetricMatrix got = reconstruct_hessian(probe_hessian(finite_difference_oracle(loss, x), 2));
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) worst_fd = std::max(worst_fd, std::abs(got(r, c) - truth(r, c)));
  }
  out.require(worst_fd <= 1e-5, "finite-difference error " + fmt(worst_fd));
  out.detail << "exact-oracle relative error " << fmt(worst) << ", FD error " << fmt(worst_fd);
}

// ---------------------------------------------------------------- 7

void coupling(Outcome& out) {
  for (const char* name : {"invariance-scale.json", "invariance-rotation.json"}) {
    const auto cfg = cli::load_config(kRepo / "configs" / name);
    out.require(cfg.study.pairs >= 50, std::string(name) + ": fewer than 50 random pairs");
    cli::CommandOptions opts;
    opts.out_dir = scratch(std::string("c7-") + name);
    const auto r = cli::run_command("invariance-check", cfg, opts);
    const double worst = summary_value(r, "max_coupled_abs_diff");
    out.require(worst <= 1e-10, std::string(name) + " diff " + fmt(worst));
    out.detail << (out.detail.tellp() > 0 ? ", " : "") << name << " max diff " << fmt(worst) << " over "
               << r.table.rows.size() << " pairs";
  }
}

// ---------------------------------------------------------------- 8

struct SeedMean {
  Vector mean, se;
};

template <typename Step>
SeedMean average_over_seeds(std::size_t seeds, std::size_t d, Step step) {
  Vector sum(d, 0.0), sum2(d, 0.0);
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const Vector g = step(perturbation_stream(s, 0));
    for (std::size_t j = 0; j < d; ++j) {
      sum[j] += g[j];
      sum2[j] += g[j] * g[j];
    }
  }
  SeedMean r{Vector(d), Vector(d)};
  const double k = static_cast<double>(seeds);
  for (std::size_t j = 0; j < d; ++j) {
    r.mean[j] = sum[j] / k;
    r.se[j] = std::sqrt(std::max(0.0, sum2[j] / k - r.mean[j] * r.mean[j]) / (k - 1.0));
  }
  return r;
}

SymmetricMatrix test_h() {
  const double a[] = {1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.3};
  return SymmetricMatrix(3, a);
}

void frob_gradient(Outcome& out) {
  const SymmetricMatrix h = test_h();
  QuadraticLoss q(h);
  TrainConfig cfg;
  cfg.kind = OptimizerKind::FrobSam;
  cfg.lambda = 1.0;
  cfg.samples = 8;
  cfg.rho = 0.05;
  const Vector x{1.0, -1.0, 0.5};
  const auto r = average_over_seeds(500, 3, [&](const SeededStream& s) { return step_frob(q, x, cfg, s); });
  const Vector hx = h.multiply(x), h2x = h.multiply(hx);
  double worst = 0.0;
  for (std::size_t j = 0; j < 3; ++j) worst = std::max(worst, std::abs(r.mean[j] - (hx[j] + 4.0 * h2x[j])) / r.se[j]);
  out.require(worst < 4.0, "(I+4H)Hx mismatch z=" + fmt(worst));

  const Vector origin(3, 0.0);
  const auto z = average_over_seeds(500, 3, [&](const SeededStream& s) { return step_frob(q, origin, cfg, s); });
  double worst0 = 0.0;
  for (std::size_t j = 0; j < 3; ++j) worst0 = std::max(worst0, std::abs(z.mean[j]) / z.se[j]);
  out.require(worst0 < 4.0, "nonzero mean at origin z=" + fmt(worst0));
  out.detail << "max |z| " << fmt(worst) << " at x, " << fmt(worst0) << " at 0";
}

// ---------------------------------------------------------------- 9

void structural_reductions(Outcome& out) {
  {
    QuadraticLoss q(test_h());
    TrainConfig sgd;
    sgd.epochs = 15;
    sgd.momentum = 0.9;
    sgd.lr = 0.05;
    const RunRecord a = train(q, Vector{1.0, 2.0, 3.0}, sgd);
    for (auto kind : {OptimizerKind::FrobSam, OptimizerKind::TraceSam, OptimizerKind::DetSam, OptimizerKind::Generic}) {
      TrainConfig other = sgd;
      other.kind = kind;
      other.samples = 4;
      const RunRecord b = train(q, Vector{1.0, 2.0, 3.0}, other);
      out.require(a.state.x == b.state.x, "lambda=0 " + to_string(kind) + " differs on the quadratic");
    }
    Mlp model({{2, 8, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
    const Dataset data = synth_blobs({}, SeededStream(1));
    TrainConfig m;
    m.lr = 0.05;
    m.momentum = 0.9;
    m.batch_size = 32;
    m.epochs = 3;
    const Vector x0 = model.initialize(SeededStream(2));
    const RunRecord c = train(model, data, nullptr, x0, m);
    m.kind = OptimizerKind::FrobSam;
    m.rho = 0.01;
    const RunRecord d = train(model, data, nullptr, x0, m);
    out.require(c.state.x == d.state.x, "lambda=0 frob-sam differs on the MLP");
  }
  double worst_trace = 0.0;
  {
    RotInvToy loss(4);
    TrainConfig cfg;
    cfg.kind = OptimizerKind::TraceSam;
    cfg.lambda = 0.7;
    cfg.samples = 6;
    cfg.rho = 0.2;
    const SharpnessSpec spec = make_spec(SpecPreset::trace(), 4);
    const Vector x{0.3, -0.2, 0.9, 0.1};
    for (std::uint64_t t = 0; t < 50; ++t) {
      const auto stream = perturbation_stream(3, t);
      const Vector a = step_generic(loss, x, spec, cfg, stream);
      const Vector b = step_trace(loss, x, cfg, stream);
      for (std::size_t j = 0; j < 4; ++j)
        worst_trace = std::max(worst_trace, std::abs(a[j] - b[j]) / std::max(1.0, std::abs(b[j])));
    }
    out.require(worst_trace <= 1e-14, "Trace-SAM mismatch " + fmt(worst_trace));
  }
  double worst_alg = 0.0;
  {
    ScaleInvToy loss;
    TrainConfig cfg;
    cfg.lambda = 1.0;
    cfg.samples = 5;
    cfg.rho = 0.3;
    const MeasureSpec mu = MeasureSpec::gaussian(2);
    const SharpnessSpec spec = identity_spec(mu);
    const Vector x{1.5, 0.4};
    for (std::uint64_t t = 0; t < 50; ++t) {
      const auto stream = perturbation_stream(9, t);
      const Vector g = step_generic(loss, x, spec, cfg, stream);
      // g_t = grad L(x) + (1/n) sum (grad L(x + rho v_i) - grad L(x)).
      const Vector g0 = loss.gradient(x);
      Vector expected = g0, v(2);
      for (std::uint64_t i = 0; i < cfg.samples; ++i) {
        draw(mu, stream, 0, i, v);
        const Vector gi = loss.gradient(Vector{x[0] + cfg.rho * v[0], x[1] + cfg.rho * v[1]});
        for (std::size_t j = 0; j < 2; ++j) expected[j] += (gi[j] - g0[j]) / static_cast<double>(cfg.samples);
      }
      for (std::size_t j = 0; j < 2; ++j)
        worst_alg = std::max(worst_alg, std::abs(g[j] - expected[j]) / std::max(1.0, std::abs(expected[j])));
    }
    out.require(worst_alg <= 1e-13, "m=1 identity mismatch " + fmt(worst_alg));
  }
  out.detail << "lambda=0 trajectories identical, Trace-SAM rel diff " << fmt(worst_trace)
             << ", m=1 rel diff " << fmt(worst_alg);
}

// ---------------------------------------------------------------- 10

void mnist_bias(Outcome& out) {
  const auto dir = scratch("c10");
  const int code = run_cli("bias-study --config " + (kRepo / "configs" / "bias-study-mnist.json").string() + " --out " +
                           dir.string());
  if (code != 0) {
    out.require(false, "bias-study exited with " + std::to_string(code));
    return;
  }
  const cli::CsvTable t = cli::read_csv(dir / "bias_summary.csv");
  const std::size_t cl = column(t, "lambda"), cf = column(t, "final_mean_frobenius_sq"),
                    ca = column(t, "min_final_test_accuracy"), cs = column(t, "seeds");
  out.require(t.rows.size() == 3, "expected three lambdas");
  double prev = INFINITY;
  for (const auto& row : t.rows) {
    const double f = std::stod(row[cf]), acc = std::stod(row[ca]);
    const std::string lam = fmt(std::stod(row[cl]));
    out.require(row[cs] == "4", "lambda " + lam + " ran " + row[cs] + " seeds");
    out.require(f < prev, "Frobenius not strictly decreasing at lambda " + lam);
    out.require(acc >= 0.90, "lambda " + lam + " min test accuracy " + fmt(acc));
    prev = f;
    out.detail << (out.detail.tellp() > 0 ? ", " : "") << "lambda " << lam << ": frob^2 " << fmt(f) << " min acc "
               << fmt(acc);
  }
}

// ---------------------------------------------------------------- 11

void determinism(Outcome& out) {
  const auto dir = scratch("c11");
  const fs::path bias_cfg = dir / "bias-blobs.json";
  std::ofstream(bias_cfg) << R"({"model": {"layers": [2, 8, 3]}, "dataset": {"kind": "blobs", "test_per_class": 10},
    "optimizer": {"kind": "frob-sam", "lr": 0.05, "momentum": 0.9, "rho": 0.01, "samples": 2, "batch_size": 30, "epochs": 3},
    "study": {"lambdas": [0, 0.1], "seeds": [0, 1], "frobenius_probes": 4, "estimate_examples": 60}})";
  const std::vector<std::pair<std::string, fs::path>> runs = {
      {"oracle", kRepo / "configs" / "oracle-scale-inv.json"},
      {"estimate", kRepo / "configs" / "estimate-quadratic.json"},
      {"train", kRepo / "configs" / "train-blobs.json"},
      {"bias-study", bias_cfg},
      {"invariance-check", kRepo / "configs" / "invariance-rotation.json"},
      {"universality-demo", kRepo / "configs" / "universality-scale-inv.json"},
  };
  std::size_t compared = 0;
  for (const auto& [command, cfg] : runs) {
    const fs::path a = dir / (command + "-a"), b = dir / (command + "-b");
    const int ca = run_cli(command + " --config " + cfg.string() + " --seed 4 --out " + a.string());
    const int cb = run_cli(command + " --config " + cfg.string() + " --seed 4 --threads 2 --out " + b.string());
    if (ca != 0 || cb != 0) {
      out.require(false, command + " exited with " + std::to_string(ca) + "/" + std::to_string(cb));
      continue;
    }
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      out.require(slurp(entry.path()) == slurp(b / entry.path().filename()),
                  command + ": " + entry.path().filename().string() + " differs");
    }
    out.require(files > 0, command + " wrote no CSV");
    compared += files;
  }
  out.detail << compared << " CSVs byte-identical across 6 subcommands";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "oracle identities for every preset", 60, oracle_identities},
      {2, "saddle toy: trace 0, frobenius 2", 1, saddle_example},
      {3, "rescaling: determinant invariant, trace not", 1, invariance_split},
      {4, "regularizer convergence slope on ScaleInvToy", 120, convergence_rate},
      {5, "eigenvalues from exp-moment probes", 180, moment_pipeline},
      {6, "Hessian from Dirac probes", 10, dirac_pipeline},
      {7, "coupled-sample invariance", 30, coupling},
      {8, "Frob-SAM expected gradient", 30, frob_gradient},
      {9, "optimizer structural reductions", 10, structural_reductions},
      {10, "MNIST Frob-SAM bias study", 1800, mnist_bias},
      {11, "byte-identical reruns of every subcommand", 600, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.limit_seconds)
      out.require(false, "runtime " + fmt(seconds) + " s over the " + fmt(c.limit_seconds) + " s budget");
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ") [" << fmt(seconds)
              << " s]: " << out.report() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
