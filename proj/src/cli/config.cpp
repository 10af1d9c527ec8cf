#include "sharplab/cli/config.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sharplab/errors.hpp"
#include "sharplab/linalg.hpp"

namespace sharplab::cli {

namespace {

using Json = nlohmann::json;

/// Typed view of one JSON object that rejects keys nobody asked about.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) fail(where(key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key) { return as_number(raw(key), where(key)); }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const std::string& key) { return as_count(raw(key), where(key)); }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) { return has(key) ? count(key) : fallback; }

  std::string text(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) fail(where(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) fail(where(key), "expected true or false");
    return v.get<bool>();
  }

  Vector numbers(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(where(key), "expected an array of numbers");
    Vector out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(where(key), "expected an array of nonnegative integers");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_count(v[i], where(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), where(key)); }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Call after every field has been read.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) fail(where(key), "unknown field");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + (path.empty() ? std::string("<root>") : path) + ": " + what);
  }

 private:
  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  static std::uint64_t as_count(const Json& v, const std::string& path) {
    if (!v.is_number_unsigned()) fail(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> known_;
};

template <typename F>
auto rethrow_domain(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError& e) {
    Section::fail(path, e.what());
  }
}

SpecPreset parse_spec(Section s) {
  const std::string name = s.text("preset");
  SpecPreset p;
  const PresetKind kind = rethrow_domain(s.where("preset"), [&] { return parse_preset_name(name); });
  switch (kind) {
    case PresetKind::Trace: p = SpecPreset::trace(); break;
    case PresetKind::Frobenius: p = SpecPreset::frobenius(); break;
    case PresetKind::Determinant: {
      const double t = s.number("half_width", 1.0);
      p = rethrow_domain(s.where("half_width"), [&] { return SpecPreset::determinant(t); });
      break;
    }
    case PresetKind::Moment: {
      const auto degree = s.count("degree", 2);
      if (degree < 1 || degree > 16) Section::fail(s.where("degree"), "must lie in [1, 16]");
      const std::string m = s.text("moment_measure", "gaussian");
      if (m != "gaussian" && m != "sphere") Section::fail(s.where("moment_measure"), "expected gaussian or sphere");
      p = SpecPreset::moment(static_cast<unsigned>(degree), m == "sphere" ? MomentMeasure::Sphere : MomentMeasure::Gaussian);
      break;
    }
    case PresetKind::Charpoly: p = SpecPreset::charpoly(s.number("sigma")); break;
  }
  s.finish();
  return p;
}

Vector require_finite(Vector v, const std::string& path) {
  for (double x : v)
    if (!std::isfinite(x)) Section::fail(path, "values must be finite");
  return v;
}

LossSection parse_loss(Section s) {
  LossSection l;
  l.name = s.text("name");
  static const std::set<std::string> names = {"saddle", "scale-inv", "rot-inv", "quadratic", "matrix"};
  if (!names.contains(l.name))
    Section::fail(s.where("name"), "unknown loss '" + l.name + "' (expected saddle, scale-inv, rot-inv, quadratic or matrix)");
  if (l.name == "rot-inv") {
    l.dim = s.count("dim", 2);
    if (l.dim == 0) Section::fail(s.where("dim"), "must be positive");
  }
  if (l.name == "quadratic" || l.name == "matrix") {
    const Json& rows = s.raw("hessian");
    if (!rows.is_array() || rows.empty()) Section::fail(s.where("hessian"), "expected a nonempty array of rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string path = s.where("hessian") + "[" + std::to_string(i) + "]";
      if (!rows[i].is_array() || rows[i].size() != rows.size()) Section::fail(path, "rows must form a square matrix");
      Vector r;
      for (const auto& v : rows[i]) {
        if (!v.is_number()) Section::fail(path, "expected numbers");
        r.push_back(v.get<double>());
      }
      l.hessian.push_back(require_finite(std::move(r), path));
    }
    l.dim = l.hessian.size();
  }
  if (l.name == "quadratic") {
    Vector flat;
    for (const auto& r : l.hessian) flat.insert(flat.end(), r.begin(), r.end());
    const SymmetricMatrix h(l.dim, flat);
    if (symmetric_eig(h).eigenvalues.back() < -1e-12 * std::max(1.0, h.max_abs()))
      Section::fail(s.where("hessian"), "quadratic loss needs a positive semidefinite Hessian");
  }
  if (l.name == "quadratic" && s.has("center")) l.center = require_finite(s.numbers("center"), s.where("center"));
  if (l.name == "saddle" || l.name == "scale-inv") l.dim = 2;
  if (l.name != "matrix") {
    l.point = s.has("point") ? require_finite(s.numbers("point"), s.where("point")) : Vector(l.dim, 0.0);
    if (l.point.size() != l.dim)
      Section::fail(s.where("point"), "expected " + std::to_string(l.dim) + " coordinates");
  }
  if (!l.center.empty() && l.center.size() != l.dim) Section::fail(s.where("center"), "dimension mismatch");
  s.finish();
  return l;
}

MlpArchitecture parse_model(Section s) {
  MlpArchitecture a;
  for (auto v : s.counts("layers")) a.layers.push_back(static_cast<std::size_t>(v));
  const std::string act = s.text("activation", "relu");
  const std::string head = s.text("head", "softmax-cross-entropy");
  a.activation = rethrow_domain(s.where("activation"), [&] { return parse_activation(act); });
  a.head = rethrow_domain(s.where("head"), [&] { return parse_loss_head(head); });
  rethrow_domain(s.where("layers"), [&] {
    a.validate();
    return 0;
  });
  s.finish();
  return a;
}

DatasetSection parse_dataset(Section s, const std::filesystem::path& base) {
  DatasetSection d;
  d.kind = s.text("kind");
  auto resolve = [&](const std::string& key) {
    std::filesystem::path p = s.text(key);
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  if (d.kind == "idx") {
    d.train_images = resolve("train_images");
    d.train_labels = resolve("train_labels");
    if (s.has("test_images") || s.has("test_labels")) {
      d.test_images = resolve("test_images");
      d.test_labels = resolve("test_labels");
    }
    d.train_limit = s.count("train_limit", 0);
    d.test_limit = s.count("test_limit", 0);
  } else if (d.kind == "blobs") {
    d.blobs.num_classes = s.count("num_classes", d.blobs.num_classes);
    d.blobs.per_class = s.count("per_class", d.blobs.per_class);
    d.blobs.dim = s.count("dim", d.blobs.dim);
    d.blobs.spread = s.number("spread", d.blobs.spread);
    d.test_per_class = s.count("test_per_class", 0);
    if (d.blobs.num_classes == 0 || d.blobs.per_class == 0 || d.blobs.dim == 0)
      Section::fail(s.where("kind"), "blob counts and dimension must be positive");
    if (!(d.blobs.spread >= 0.0)) Section::fail(s.where("spread"), "must be nonnegative");
  } else {
    Section::fail(s.where("kind"), "expected idx or blobs");
  }
  s.finish();
  return d;
}

TrainConfig parse_optimizer(Section s) {
  TrainConfig c;
  c.kind = parse_optimizer_kind(s.text("kind"));
  c.lr = s.number("lr", c.lr);
  c.rho = s.number("rho", c.rho);
  c.samples = s.count("samples", c.samples);
  c.lambda = s.number("lambda", c.lambda);
  c.epochs = s.count("epochs", c.epochs);
  c.batch_size = s.count("batch_size", c.batch_size);
  c.steps_per_epoch = s.count("steps_per_epoch", c.steps_per_epoch);
  c.momentum = s.number("momentum", c.momentum);
  c.lr_decay = s.number("lr_decay", c.lr_decay);
  c.lr_period = s.count("lr_period", c.lr_period);
  c.det_half_width = s.number("det_half_width", c.det_half_width);
  if (s.has("spec")) c.spec = parse_spec(s.child("spec"));
  s.finish();
  c.validate();
  return c;
}

StudySection parse_study(Section s) {
  StudySection st;
  if (s.has("lambdas")) {
    st.lambdas = require_finite(s.numbers("lambdas"), s.where("lambdas"));
    if (st.lambdas.empty()) Section::fail(s.where("lambdas"), "list must not be empty");
    for (double l : st.lambdas)
      if (l < 0.0) Section::fail(s.where("lambdas"), "values must be nonnegative");
  }
  if (s.has("rhos")) {
    st.rhos = require_finite(s.numbers("rhos"), s.where("rhos"));
    if (st.rhos.empty()) Section::fail(s.where("rhos"), "list must not be empty");
    for (double r : st.rhos)
      if (!(r > 0.0)) Section::fail(s.where("rhos"), "values must be positive");
  }
  if (s.has("seeds")) {
    st.seeds = s.counts("seeds");
    if (st.seeds.empty()) Section::fail(s.where("seeds"), "list must not be empty");
  }
  st.samples = s.count("samples", st.samples);
  if (st.samples < 2) Section::fail(s.where("samples"), "need at least 2 samples");
  if (s.has("presets")) {
    const Json& list = s.raw("presets");
    if (!list.is_array() || list.empty()) Section::fail(s.where("presets"), "expected a nonempty array of spec objects");
    for (std::size_t i = 0; i < list.size(); ++i)
      st.presets.push_back(parse_spec(Section(list[i], s.where("presets") + "[" + std::to_string(i) + "]")));
  }
  st.frobenius_probes = s.count("frobenius_probes", 0);
  st.trace_probes = s.count("trace_probes", 0);
  st.estimate_examples = s.count("estimate_examples", st.estimate_examples);
  st.probe_seed = s.count("probe_seed", 0);
  if (s.has("transform")) {
    Section t = s.child("transform");
    TransformSection tr;
    tr.kind = t.text("kind");
    if (tr.kind == "rescale") {
      tr.k = t.number("k", tr.k);
      if (!(tr.k > 0.0) || !std::isfinite(tr.k)) Section::fail(t.where("k"), "must be positive");
    } else if (tr.kind == "rotation") {
      tr.angle_degrees = t.number("angle_degrees", tr.angle_degrees);
    } else {
      Section::fail(t.where("kind"), "expected rescale or rotation");
    }
    t.finish();
    st.transform = tr;
  }
  st.pairs = s.count("pairs", 0);
  st.measure = s.text("measure", "");
  if (!st.measure.empty() && st.measure != "gaussian" && st.measure != "sphere" && st.measure != "hypercube")
    Section::fail(s.where("measure"), "expected gaussian, sphere or hypercube");
  st.half_width = s.number("half_width", st.half_width);
  if (!(st.half_width > 0.0)) Section::fail(s.where("half_width"), "must be positive");
  const std::string layout = s.text("node_layout", "symmetric");
  if (layout == "symmetric") {
    st.node_layout = NodeLayout::Symmetric;
  } else if (layout == "one-sided") {
    st.node_layout = NodeLayout::OneSided;
  } else {
    Section::fail(s.where("node_layout"), "expected symmetric or one-sided");
  }
  st.mc_samples = s.count("mc_samples", 0);
  if (st.mc_samples == 1) Section::fail(s.where("mc_samples"), "need 0 (exact) or at least 2");
  s.finish();
  return st;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.source = text;
  Section s(root, "");
  try {
    if (s.has("loss")) cfg.loss = parse_loss(s.child("loss"));
    if (s.has("model")) cfg.model = parse_model(s.child("model"));
    if (s.has("dataset")) cfg.dataset = parse_dataset(s.child("dataset"), base_dir);
    if (s.has("optimizer")) {
      cfg.optimizer = parse_optimizer(s.child("optimizer"));
      cfg.has_optimizer = true;
    }
    if (s.has("spec")) cfg.spec = parse_spec(s.child("spec"));
    if (s.has("study")) cfg.study = parse_study(s.child("study"));
    if (s.has("output")) {
      Section o = s.child("output");
      std::filesystem::path dir = o.text("dir");
      cfg.output_dir = dir.is_absolute() || base_dir.empty() ? dir : base_dir / dir;
      o.finish();
    }
    s.finish();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.model.has_value() != cfg.dataset.has_value())
    throw ConfigError("config: model and dataset must be given together");
  if (cfg.loss && cfg.model) throw ConfigError("config: give either loss or model/dataset, not both");
  if (!cfg.loss && !cfg.model) throw ConfigError("config: one of loss or model/dataset is required");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_config(text, path.parent_path());
}

SpecPreset parse_spec_object(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("spec: not valid JSON: ") + e.what());
  }
  return parse_spec(Section(j, "spec"));
}

SymmetricMatrix FixedLoss::hessian() const {
  if (matrix) return *matrix;
  return hessian_at(*loss, point);
}

QuadraticOracle FixedLoss::oracle() const {
  if (matrix) return quadratic_oracle(*matrix);
  return quadratic_oracle(*loss, point);
}

std::size_t FixedLoss::dim() const { return matrix ? matrix->dim() : loss->dim(); }

FixedLoss build_loss(const LossSection& section) {
  FixedLoss out;
  out.point = section.point;
  auto flatten = [&] {
    std::vector<double> a;
    for (const auto& row : section.hessian) a.insert(a.end(), row.begin(), row.end());
    return SymmetricMatrix(section.dim, a);
  };
  try {
    if (section.name == "saddle") {
      out.loss = std::make_unique<SaddleToy>();
    } else if (section.name == "scale-inv") {
      out.loss = std::make_unique<ScaleInvToy>();
    } else if (section.name == "rot-inv") {
      out.loss = std::make_unique<RotInvToy>(section.dim);
    } else if (section.name == "quadratic") {
      out.loss = std::make_unique<QuadraticLoss>(flatten(), section.center);
    } else if (section.name == "matrix") {
      out.matrix = flatten();
    } else {
      throw ConfigError("config: loss.name: unknown loss '" + section.name + "'");
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: loss: ") + e.what());
  }
  return out;
}

DataSplits build_datasets(const DatasetSection& section, std::uint64_t seed) {
  DataSplits out;
  if (section.kind == "idx") {
    out.train = load_idx(section.train_images, section.train_labels);
    if (section.train_limit > 0 && section.train_limit < out.train.rows) out.train = out.train.head(section.train_limit);
    if (!section.test_images.empty()) {
      Dataset test = load_idx(section.test_images, section.test_labels);
      if (section.test_limit > 0 && section.test_limit < test.rows) test = test.head(section.test_limit);
      test.split = "test";
      out.test = std::move(test);
    }
    return out;
  }
  BlobOptions opts = section.blobs;
  if (section.test_per_class > 0) opts.per_class += section.test_per_class;
  const Dataset all = synth_blobs(opts, SeededStream(seed, domain_tag("blobs")));
  if (section.test_per_class == 0) {
    out.train = all;
    return out;
  }
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t r = 0; r < all.rows; ++r)
    (r % opts.per_class < section.blobs.per_class ? train_rows : test_rows).push_back(r);
  out.train = all.subset(train_rows, "train");
  out.test = all.subset(test_rows, "test");
  return out;
}

}  // namespace sharplab::cli
