#include "trojdiff/config.hpp"

#define TOML_FLOAT_CHARCONV 1  // shortest round-trip float output
#include <toml.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace trojdiff {

namespace {

std::string where(const std::string& source, const toml::source_region& region) {
  std::ostringstream os;
  os << source << ":" << region.begin.line << ":" << region.begin.column << ": ";
  return os.str();
}

// Typed access to one TOML table that remembers which keys were read, so
// leftover keys can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string name, const std::string& source)
      : table_(table), name_(std::move(name)), source_(source) {}

  void mark(const std::string& key) { used_.insert(key); }

  double number(const std::string& key, double def) {
    const toml::node* n = take(key);
    if (!n) return def;
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<int64_t>()) return static_cast<double>(*v);
    fail(*n, key, "a number");
  }

  long long integer(const std::string& key, long long def) {
    const toml::node* n = take(key);
    if (!n) return def;
    if (auto v = n->value_exact<int64_t>()) return *v;
    fail(*n, key, "an integer");
  }

  int int32(const std::string& key, int def) { return static_cast<int>(integer(key, def)); }

  bool boolean(const std::string& key, bool def) {
    const toml::node* n = take(key);
    if (!n) return def;
    if (auto v = n->value_exact<bool>()) return *v;
    fail(*n, key, "a boolean");
  }

  std::string string(const std::string& key, const std::string& def) {
    const toml::node* n = take(key);
    if (!n) return def;
    if (auto v = n->value_exact<std::string>()) return *v;
    fail(*n, key, "a string");
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const toml::node* n = take(key);
    if (!n) return def;
    const toml::array* arr = n->as_array();
    if (!arr) fail(*n, key, "an array of numbers");
    std::vector<double> out;
    for (const auto& el : *arr) {
      if (auto v = el.value_exact<double>())
        out.push_back(*v);
      else if (auto i = el.value_exact<int64_t>())
        out.push_back(static_cast<double>(*i));
      else
        fail(el, key, "an array of numbers");
    }
    return out;
  }

  std::vector<int> ints(const std::string& key, std::vector<int> def) {
    const toml::node* n = take(key);
    if (!n) return def;
    const toml::array* arr = n->as_array();
    if (!arr) fail(*n, key, "an array of integers");
    std::vector<int> out;
    for (const auto& el : *arr) {
      if (auto i = el.value_exact<int64_t>())
        out.push_back(static_cast<int>(*i));
      else
        fail(el, key, "an array of integers");
    }
    return out;
  }

  /// Source location prefix of `key` (or of the table when absent).
  std::string at(const std::string& key) const {
    if (table_ && table_->contains(key)) return where(source_, table_->get(key)->source());
    if (table_) return where(source_, table_->source());
    return source_ + ": ";
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key))
        throw ConfigError(where(source_, v.source()) + "unknown key '" + key + "'" +
                          (name_.empty() ? "" : " in [" + name_ + "]"));
    }
  }

 private:
  const toml::node* take(const std::string& key) {
    used_.insert(key);
    if (!table_) return nullptr;
    return table_->get(key);
  }

  [[noreturn]] void fail(const toml::node& n, const std::string& key, const char* expected) const {
    throw ConfigError(where(source_, n.source()) + "'" + (name_.empty() ? "" : name_ + ".") + key +
                      "' must be " + expected);
  }

  const toml::table* table_;
  std::string name_;
  const std::string& source_;
  std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const std::string& name,
                            const std::string& source) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(where(source, n->source()) + "'" + name + "' must be a table");
  return n->as_table();
}

[[noreturn]] void invalid(const std::string& at, const std::string& msg) {
  throw ConfigError(at + msg);
}

template <class T>
toml::array to_array(const std::vector<T>& v) {
  toml::array a;
  for (const auto& x : v) a.push_back(x);
  return a;
}

std::string format_toml(const toml::table& t) {
  std::ostringstream os;
  os << toml::toml_formatter(t) << "\n";
  return os.str();
}

std::string snapshot_of(const ExperimentConfig& c) {
  toml::table root;
  root.insert("name", c.name);
  root.insert("seed", static_cast<int64_t>(c.seed));
  root.insert("plot", c.plot);
  root.insert("schedule", toml::table{{"T", c.schedule.T},
                                      {"beta1", c.schedule.beta1},
                                      {"betaT", c.schedule.betaT}});
  toml::table ds{{"kind", c.dataset.kind},           {"components", c.dataset.components},
                 {"dim", c.dataset.dim},             {"radius", c.dataset.radius},
                 {"std", c.dataset.std},             {"points", c.dataset.points}};
  if (!c.dataset.path.empty()) ds.insert("path", c.dataset.path);
  root.insert("dataset", std::move(ds));
  toml::table tr{{"kind", c.trigger.kind}, {"gamma", c.trigger.gamma},
                 {"delta_value", c.trigger.delta_value}, {"gamma_on", c.trigger.gamma_on}};
  if (!c.trigger.delta.empty()) tr.insert("delta", to_array(c.trigger.delta));
  if (!c.trigger.delta_csv.empty()) tr.insert("delta_csv", c.trigger.delta_csv);
  if (!c.trigger.patch.empty()) tr.insert("patch", to_array(c.trigger.patch));
  if (c.trigger.patch_size > 0) {
    tr.insert("patch_size", c.trigger.patch_size);
    tr.insert("image_height", c.trigger.image_height);
    tr.insert("image_width", c.trigger.image_width);
  }
  root.insert("trigger", std::move(tr));
  toml::table at{{"kind", c.attack.kind}, {"target_class", c.attack.target_class},
                 {"target_ratio", c.attack.target_ratio}, {"target_std", c.attack.target_std},
                 {"target_points", c.attack.target_points}};
  if (!c.attack.x_target.empty()) at.insert("x_target", to_array(c.attack.x_target));
  if (!c.attack.target_mean.empty()) at.insert("target_mean", to_array(c.attack.target_mean));
  if (!c.attack.target_csv.empty()) at.insert("target_csv", c.attack.target_csv);
  root.insert("attack", std::move(at));
  root.insert("model", toml::table{{"hidden", to_array(c.model.hidden)},
                                   {"activation", to_string(c.model.activation)}});
  root.insert("train", toml::table{{"steps", c.train.steps},
                                   {"batch_size", c.train.batch_size},
                                   {"lr", c.train.lr},
                                   {"checkpoint_every", c.train.checkpoint_every}});
  root.insert("sample", toml::table{{"family", c.sample.family},
                                    {"eta", c.sample.eta},
                                    {"S", c.sample.S},
                                    {"stride", c.sample.stride},
                                    {"n", c.sample.n},
                                    {"capture_every", c.sample.capture_every},
                                    {"threads", c.sample.threads}});
  root.insert("eval", toml::table{{"knn_k", c.eval.knn_k},
                                  {"min_mass", c.eval.min_mass},
                                  {"reference_points", c.eval.reference_points}});
  return format_toml(root);
}

ExperimentConfig from_table(const toml::table& root, const std::string& source) {
  ExperimentConfig c;
  Section top(&root, "", source);

  c.name = top.string("name", c.name);
  const long long seed = top.integer("seed", 0);
  if (seed < 0) invalid(top.at("seed"), "seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.plot = top.boolean("plot", false);

  {
    Section s(subtable(root, "schedule", source), "schedule", source);
    c.schedule.T = s.int32("T", c.schedule.T);
    c.schedule.beta1 = s.number("beta1", c.schedule.beta1);
    c.schedule.betaT = s.number("betaT", c.schedule.betaT);
    if (c.schedule.T < 1) invalid(s.at("T"), "schedule.T must be >= 1");
    if (!(c.schedule.beta1 > 0 && c.schedule.beta1 <= c.schedule.betaT && c.schedule.betaT < 1))
      invalid(s.at("beta1"), "need 0 < beta1 <= betaT < 1");
    s.finish();
  }
  {
    Section s(subtable(root, "dataset", source), "dataset", source);
    auto& d = c.dataset;
    d.kind = s.string("kind", d.kind);
    d.components = s.int32("components", d.components);
    d.dim = s.int32("dim", d.dim);
    d.radius = s.number("radius", d.radius);
    d.std = s.number("std", d.std);
    d.points = s.int32("points", d.points);
    d.path = s.string("path", d.path);
    if (d.kind != "circle" && d.kind != "cube" && d.kind != "csv")
      invalid(s.at("kind"), "dataset.kind must be circle|cube|csv");
    if (d.kind == "csv" && d.path.empty()) invalid(s.at("path"), "dataset.path required for csv");
    if (d.kind == "circle" && d.dim != 2) invalid(s.at("dim"), "circle datasets are 2-D");
    if (d.components < 1) invalid(s.at("components"), "dataset.components must be >= 1");
    if (d.dim < 1) invalid(s.at("dim"), "dataset.dim must be >= 1");
    if (!(d.std > 0)) invalid(s.at("std"), "degenerate covariance: dataset.std must be > 0");
    if (d.points < 1) invalid(s.at("points"), "dataset.points must be >= 1");
    s.finish();
  }
  {
    Section s(subtable(root, "trigger", source), "trigger", source);
    auto& t = c.trigger;
    t.kind = s.string("kind", t.kind);
    t.gamma = s.number("gamma", t.gamma);
    t.delta_value = s.number("delta_value", t.delta_value);
    t.delta = s.numbers("delta", t.delta);
    t.delta_csv = s.string("delta_csv", t.delta_csv);
    t.patch = s.ints("patch", t.patch);
    t.patch_size = s.int32("patch_size", t.patch_size);
    t.image_height = s.int32("image_height", t.image_height);
    t.image_width = s.int32("image_width", t.image_width);
    t.gamma_on = s.number("gamma_on", t.gamma_on);
    if (t.kind != "blend" && t.kind != "patch") invalid(s.at("kind"), "trigger.kind must be blend|patch");
    if (t.kind == "blend") {
      if (t.gamma == 0.0)
        invalid(s.at("gamma"),
                "trigger.gamma = 0 rejected: it removes all randomness from the Trojan noise");
      if (!(t.gamma > 0 && t.gamma <= 1)) invalid(s.at("gamma"), "trigger.gamma must lie in (0, 1]");
      if (!(t.delta_value >= -1 && t.delta_value <= 1))
        invalid(s.at("delta_value"), "trigger.delta_value must lie in [-1, 1]");
      for (double v : t.delta)
        if (!(v >= -1 && v <= 1)) invalid(s.at("delta"), "trigger.delta entries must lie in [-1, 1]");
    } else {
      if (t.gamma_on == 0.0)
        invalid(s.at("gamma_on"),
                "trigger.gamma_on = 0 rejected: a noiseless patch cannot be reversed and attack "
                "quality drops sharply");
      if (!(t.gamma_on > 0 && t.gamma_on < 1))
        invalid(s.at("gamma_on"), "trigger.gamma_on must lie in (0, 1)");
      if (t.patch.empty() && t.patch_size <= 0)
        invalid(s.at("patch"), "patch trigger needs 'patch' coordinates or 'patch_size'");
      if (t.patch_size > 0 && (t.image_height < 1 || t.image_width < 1))
        invalid(s.at("patch_size"), "patch_size needs image_height and image_width");
    }
    s.finish();
  }
  {
    Section s(subtable(root, "attack", source), "attack", source);
    auto& a = c.attack;
    a.kind = s.string("kind", a.kind);
    a.target_class = s.int32("target_class", a.target_class);
    a.target_ratio = s.number("target_ratio", a.target_ratio);
    a.x_target = s.numbers("x_target", a.x_target);
    a.target_mean = s.numbers("target_mean", a.target_mean);
    a.target_std = s.number("target_std", a.target_std);
    a.target_points = s.int32("target_points", a.target_points);
    a.target_csv = s.string("target_csv", a.target_csv);
    try {
      parse_attack_kind(a.kind);
    } catch (const ParameterError& e) {
      invalid(s.at("kind"), e.what());
    }
    if (a.kind == "d2i" && a.x_target.empty()) invalid(s.at("x_target"), "d2i needs attack.x_target");
    if (a.kind == "out_d2d" && a.target_mean.empty() && a.target_csv.empty())
      invalid(s.at("target_mean"), "out_d2d needs attack.target_mean or attack.target_csv");
    if (!(a.target_std > 0)) invalid(s.at("target_std"), "attack.target_std must be > 0");
    if (a.target_points < 1) invalid(s.at("target_points"), "attack.target_points must be >= 1");
    s.finish();
  }
  {
    Section s(subtable(root, "model", source), "model", source);
    c.model.hidden = s.ints("hidden", c.model.hidden);
    try {
      c.model.activation = parse_activation(s.string("activation", "silu"));
    } catch (const ParameterError& e) {
      invalid(s.at("activation"), e.what());
    }
    for (int h : c.model.hidden)
      if (h < 1) invalid(s.at("hidden"), "model.hidden widths must be >= 1");
    s.finish();
  }
  {
    Section s(subtable(root, "train", source), "train", source);
    c.train.steps = s.int32("steps", c.train.steps);
    c.train.batch_size = s.int32("batch_size", c.train.batch_size);
    c.train.lr = s.number("lr", c.train.lr);
    c.train.checkpoint_every = s.int32("checkpoint_every", c.train.checkpoint_every);
    if (c.train.steps < 0) invalid(s.at("steps"), "train.steps must be >= 0");
    if (c.train.batch_size < 1) invalid(s.at("batch_size"), "train.batch_size must be >= 1");
    if (!(c.train.lr > 0)) invalid(s.at("lr"), "train.lr must be > 0");
    s.finish();
  }
  {
    Section s(subtable(root, "sample", source), "sample", source);
    auto& p = c.sample;
    p.family = s.string("family", p.family);
    p.eta = s.number("eta", p.eta);
    p.S = s.int32("S", p.S);
    p.stride = s.string("stride", p.stride);
    p.n = s.int32("n", p.n);
    p.capture_every = s.int32("capture_every", p.capture_every);
    p.threads = s.int32("threads", p.threads);
    if (p.family != "ddpm" && p.family != "ddim") invalid(s.at("family"), "sample.family must be ddpm|ddim");
    if (p.stride != "linear" && p.stride != "quadratic")
      invalid(s.at("stride"), "sample.stride must be linear|quadratic");
    if (!(p.eta >= 0 && p.eta <= 1)) invalid(s.at("eta"), "sample.eta must lie in [0, 1]");
    if (p.family == "ddim" && (p.S < 1 || p.S > c.schedule.T))
      invalid(s.at("S"), "sample.S must lie in [1, schedule.T]");
    if (p.n < 1) invalid(s.at("n"), "sample.n must be >= 1");
    if (p.threads < 1) invalid(s.at("threads"), "sample.threads must be >= 1");
    s.finish();
  }
  {
    Section s(subtable(root, "eval", source), "eval", source);
    c.eval.knn_k = s.int32("knn_k", c.eval.knn_k);
    c.eval.min_mass = s.number("min_mass", c.eval.min_mass);
    c.eval.reference_points = s.int32("reference_points", c.eval.reference_points);
    if (c.eval.knn_k < 1) invalid(s.at("knn_k"), "eval.knn_k must be >= 1");
    if (c.eval.reference_points <= c.eval.knn_k)
      invalid(s.at("reference_points"), "eval.reference_points must exceed knn_k");
    s.finish();
  }
  if (const toml::table* sw = subtable(root, "sweep", source)) {
    // axes in the order they appear in the file (the table itself is sorted)
    std::vector<std::pair<std::string, const toml::node*>> entries;
    for (const auto& [k, v] : *sw) entries.emplace_back(std::string(k.str()), &v);
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      const auto& sa = a.second->source().begin;
      const auto& sb = b.second->source().begin;
      return sa.line != sb.line ? sa.line < sb.line : sa.column < sb.column;
    });
    for (const auto& [key, node] : entries) {
      const toml::node& v = *node;
      const std::string k = key;
      const toml::array* arr = v.as_array();
      if (!arr) throw ConfigError(where(source, v.source()) + "sweep axis '" + k +
                                  "' must be an array");
      SweepAxis axis;
      axis.path = k;
      if (axis.path == "seed" || axis.path.rfind("sweep", 0) == 0)
        throw ConfigError(where(source, v.source()) + "cannot sweep over '" + axis.path + "'");
      for (const auto& el : *arr) {
        std::ostringstream os;
        os << toml::toml_formatter(el);
        axis.values.push_back(os.str());
      }
      c.sweep.push_back(std::move(axis));
    }
  }
  for (const char* known : {"schedule", "dataset", "trigger", "attack", "model", "train", "sample",
                            "eval", "sweep"})
    top.mark(known);
  top.finish();
  c.model.data_dim = c.dataset.dim;
  c.model.steps = c.schedule.T;
  c.train.model = c.model;
  c.train.seed = c.seed;
  c.snapshot = snapshot_of(c);
  return c;
}

toml::table parse_table(const std::string& text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ConfigError(where(source, e.source()) + std::string(e.description()));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  const toml::table root = parse_table(text, source);
  return from_table(root, source);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config) {
  if (config.sweep.empty()) return {config};
  std::vector<ExperimentConfig> out;
  const toml::table base = parse_table(config.snapshot, "<snapshot>");
  std::vector<std::size_t> index(config.sweep.size(), 0);
  for (const auto& axis : config.sweep)
    if (axis.values.empty()) return {config};
  while (true) {
    toml::table child = base;
    std::string label = config.name;
    for (std::size_t a = 0; a < config.sweep.size(); ++a) {
      const SweepAxis& axis = config.sweep[a];
      const std::string& lit = axis.values[index[a]];
      const toml::table holder = parse_table("v = " + lit, "<sweep>");
      const auto dot = axis.path.find('.');
      if (dot == std::string::npos) {
        child.insert_or_assign(axis.path, *holder.get("v"));
      } else {
        const std::string sec = axis.path.substr(0, dot);
        const std::string key = axis.path.substr(dot + 1);
        toml::table* t = child.get_as<toml::table>(sec);
        if (!t) throw ConfigError("sweep axis '" + axis.path + "' names an unknown section");
        t->insert_or_assign(key, *holder.get("v"));
      }
      label += "__" + axis.path + "=" + lit;
    }
    child.insert_or_assign("name", label);
    out.push_back(from_table(child, "<sweep child " + label + ">"));
    std::size_t a = config.sweep.size();
    while (a-- > 0) {
      if (++index[a] < config.sweep[a].values.size()) break;
      index[a] = 0;
      if (a == 0) return out;
    }
  }
}

NoiseSchedule build_schedule(const ExperimentConfig& c) {
  return linear_beta_schedule(c.schedule.T, c.schedule.beta1, c.schedule.betaT);
}

ToyDataset build_dataset(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const std::uint64_t seed = stream_seed(c.seed, 0xD47A);
  if (d.kind == "circle") return synth_circle_mixture(d.components, d.radius, d.std, d.points, seed);
  if (d.kind == "cube") {
    Rng rng(stream_seed(c.seed, 0xC0BE));
    GaussianMixture mix;
    for (int k = 0; k < d.components; ++k) {
      Vec m(d.dim);
      for (int i = 0; i < d.dim; ++i) m[i] = rng.uniform(0.0, 1.0) < 0.5 ? -d.radius : d.radius;
      mix.means.push_back(m);
      mix.stds.push_back(Vec::Constant(d.dim, d.std));
    }
    return synth_mixture(mix, d.points, seed);
  }
  ToyDataset ds = read_points_csv(d.path);
  ds.validate();
  return ds;
}

Trigger build_trigger(const ExperimentConfig& c, Eigen::Index dim) {
  const auto& t = c.trigger;
  try {
    if (t.kind == "patch") {
      std::vector<int> coords = t.patch;
      if (coords.empty()) {
        if (static_cast<Eigen::Index>(t.image_height) * t.image_width != dim)
          throw ConfigError("patch image " + std::to_string(t.image_height) + "x" +
                            std::to_string(t.image_width) + " does not match data dimension " +
                            std::to_string(dim));
        coords = bottom_right_patch(t.image_height, t.image_width, t.patch_size);
      }
      return make_patch_trigger(static_cast<int>(dim), coords, t.gamma_on);
    }
    Vec delta;
    if (!t.delta.empty()) {
      delta = Eigen::Map<const Vec>(t.delta.data(), static_cast<Eigen::Index>(t.delta.size()));
    } else if (!t.delta_csv.empty()) {
      const ToyDataset v = read_points_csv(t.delta_csv);
      if (v.size() != 1) throw ConfigError("delta_csv must hold exactly one vector");
      delta = v.points.col(0);
    } else {
      delta = Vec::Constant(dim, t.delta_value);
    }
    if (delta.size() != dim) throw ConfigError("trigger delta dimension does not match data dimension");
    return make_blend_trigger(delta, t.gamma);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid trigger: ") + e.what());
  }
}

AttackSpec build_attack(const ExperimentConfig& c, const ToyDataset& data) {
  AttackSpec a;
  a.kind = parse_attack_kind(c.attack.kind);
  a.target_class = c.attack.target_class;
  a.target_ratio = c.attack.target_ratio;
  if (a.kind != AttackKind::kNone) a.trigger = build_trigger(c, data.dim());
  if (a.kind == AttackKind::kD2I)
    a.x_target = Eigen::Map<const Vec>(c.attack.x_target.data(),
                                       static_cast<Eigen::Index>(c.attack.x_target.size()));
  if (a.kind == AttackKind::kOutD2D) {
    if (!c.attack.target_csv.empty()) {
      a.target_points = read_points_csv(c.attack.target_csv).points;
    } else {
      GaussianMixture blob;
      blob.means.push_back(Eigen::Map<const Vec>(c.attack.target_mean.data(),
                                                 static_cast<Eigen::Index>(c.attack.target_mean.size())));
      blob.stds.push_back(Vec::Constant(blob.means[0].size(), c.attack.target_std));
      a.target_points = synth_mixture(blob, c.attack.target_points, stream_seed(c.seed, 0x7A67)).points;
    }
  }
  a.validate(data);
  return a;
}

SamplerConfig build_sampler(const ExperimentConfig& c, const ChainMode& mode) {
  SamplerConfig s;
  s.family = parse_sampler_family(c.sample.family);
  s.mode = mode;
  s.capture_every = c.sample.capture_every;
  if (s.family == SamplerFamily::kDdim)
    s.ddim = ddim_subsequence(c.schedule.T, c.sample.S, parse_stride_kind(c.sample.stride), c.sample.eta);
  return s;
}

}  // namespace trojdiff
