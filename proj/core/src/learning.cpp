#include "scoopsim/learning.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "scoopsim/errors.hpp"
#include "scoopsim/parallel.hpp"

namespace scoopsim {

namespace {

using json = nlohmann::json;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dim(const BinaryClassifier& m, std::size_t n) {
  if (n != static_cast<std::size_t>(m.input_dim)) {
    throw ScoopError(ErrorKind::ShapeMismatch, "expected " + std::to_string(m.input_dim) +
                                                   " features, got " + std::to_string(n));
  }
}

// Forward pass returning the logit; fills hidden activations when asked.
double logit(const BinaryClassifier& m, std::span<const double> x, std::vector<double>* act) {
  const int d = m.input_dim;
  const double* p = m.params.data();
  if (m.kind == ModelKind::Linear) {
    double z = p[d];
    for (int i = 0; i < d; ++i) z += p[i] * x[i];
    return z;
  }
  const int h = m.hidden;
  const double* b1 = p + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  if (act) act->assign(h, 0.0);
  double z = b2;
  for (int j = 0; j < h; ++j) {
    const double* row = p + j * d;
    double a = b1[j];
    for (int i = 0; i < d; ++i) a += row[i] * x[i];
    a = std::max(0.0, a);
    if (act) (*act)[j] = a;
    z += w2[j] * a;
  }
  return z;
}

// Accumulates d(loss_i)/d(params) * scale into grad.
void accumulate_gradient(const BinaryClassifier& m, std::span<const double> x, int y,
                         double scale, std::vector<double>& grad) {
  std::vector<double> act;
  const double p = sigmoid(logit(m, x, &act));
  const double dz = (p - y) * scale;
  const int d = m.input_dim;
  if (m.kind == ModelKind::Linear) {
    for (int i = 0; i < d; ++i) grad[i] += dz * x[i];
    grad[d] += dz;
    return;
  }
  const int h = m.hidden;
  const double* w2 = m.params.data() + h * d + h;
  double* g_b1 = grad.data() + h * d;
  double* g_w2 = g_b1 + h;
  g_w2[h] += dz;
  for (int j = 0; j < h; ++j) {
    g_w2[j] += dz * act[j];
    if (act[j] <= 0.0) continue;
    const double da = dz * w2[j];
    g_b1[j] += da;
    double* row = grad.data() + j * d;
    for (int i = 0; i < d; ++i) row[i] += da * x[i];
  }
}

double sample_loss(double p, int y) {
  constexpr double kFloor = 1e-15;
  return y ? -std::log(std::max(p, kFloor)) : -std::log(std::max(1.0 - p, kFloor));
}

BinaryClassifier initial_model(ModelKind kind, int dim, std::uint64_t seed) {
  BinaryClassifier m = BinaryClassifier::zeros(kind, dim);
  if (kind == ModelKind::OneHiddenLayer) {
    RandomStream rng(seed, "init");
    const double s1 = std::sqrt(2.0 / dim);
    const double s2 = std::sqrt(1.0 / m.hidden);
    const std::size_t first = static_cast<std::size_t>(m.hidden) * dim;
    for (std::size_t i = 0; i < first; ++i) m.params[i] = rng.gaussian(0.0, s1);
    for (int j = 0; j < m.hidden; ++j) m.params[first + m.hidden + j] = rng.gaussian(0.0, s2);
  }
  return m;
}

void run_optimizer(BinaryClassifier& m, std::span<const std::vector<double>> x,
                   std::span<const int> y, const TrainConfig& c,
                   std::vector<double>* loss_log) {
  const std::size_t n = x.size();
  const std::size_t np = m.params.size();
  std::vector<double> mom(np, 0.0), vel(np, 0.0), grad(np);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rng(c.seed, "shuffle");
  long step = 0;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, c.batch_size));
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        accumulate_gradient(m, x[order[k]], y[order[k]], scale, grad);
      }
      ++step;
      const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < np; ++i) {
        mom[i] = c.beta1 * mom[i] + (1.0 - c.beta1) * grad[i];
        vel[i] = c.beta2 * vel[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        const double mhat = mom[i] / bc1;
        const double vhat = vel[i] / bc2;
        m.params[i] -= c.learning_rate * (mhat / (std::sqrt(vhat) + c.epsilon) +
                                          c.weight_decay * m.params[i]);
      }
    }
    const double loss = bce_loss(m, x, y);
    if (!std::isfinite(loss)) {
      throw ScoopError(ErrorKind::DivergedLoss, "loss is not finite at epoch " +
                                                    std::to_string(epoch));
    }
    if (loss_log) loss_log->push_back(loss);
  }
}

void check_trainable(std::size_t n, std::span<const int> y) {
  if (n == 0) throw ScoopError(ErrorKind::EmptySet, "training set is empty");
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives == 0 || positives == static_cast<long>(y.size())) {
    throw ScoopError(ErrorKind::InvalidDataset, "training set needs both labels");
  }
}

}  // namespace

std::size_t LabeledSet::count(int label) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [&](const Sample& s) { return s.label == label; }));
}

const char* to_string(ModelKind k) {
  return k == ModelKind::Linear ? "Linear" : "OneHiddenLayer";
}

BinaryClassifier BinaryClassifier::zeros(ModelKind kind, int input_dim, int hidden) {
  BinaryClassifier m;
  m.kind = kind;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.params.assign(m.param_count(), 0.0);
  return m;
}

std::size_t BinaryClassifier::param_count() const {
  const auto d = static_cast<std::size_t>(input_dim);
  const auto h = static_cast<std::size_t>(hidden);
  return kind == ModelKind::Linear ? d + 1 : h * d + h + h + 1;
}

TrainConfig TrainConfig::risk_defaults() {
  TrainConfig c;
  c.epochs = 15;
  c.threshold = 0.6;
  return c;
}

TrainConfig TrainConfig::failure_defaults() {
  TrainConfig c;
  c.epochs = 25;
  c.threshold = 0.98;
  return c;
}

double predict(const BinaryClassifier& model, std::span<const double> features) {
  check_dim(model, features.size());
  return sigmoid(logit(model, features, nullptr));
}

double predict_grid(const BinaryClassifier& model, const SideGrid& grid) {
  return predict(model, features(grid, model.norm));
}

double bce_loss(const BinaryClassifier& model, std::span<const std::vector<double>> x,
                std::span<const int> y) {
  if (x.empty()) throw ScoopError(ErrorKind::EmptySet, "loss over an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += sample_loss(predict(model, x[i]), y[i]);
  return total / static_cast<double>(x.size());
}

std::vector<double> bce_gradient(const BinaryClassifier& model,
                                 std::span<const std::vector<double>> x,
                                 std::span<const int> y) {
  if (x.empty()) throw ScoopError(ErrorKind::EmptySet, "gradient over an empty set");
  std::vector<double> grad(model.params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    check_dim(model, x[i].size());
    accumulate_gradient(model, x[i], y[i], scale, grad);
  }
  return grad;
}

BinaryClassifier train_features(std::span<const std::vector<double>> x, std::span<const int> y,
                                ModelKind kind, const TrainConfig& config,
                                std::vector<double>* loss_log) {
  if (x.empty()) throw ScoopError(ErrorKind::EmptySet, "training set is empty");
  BinaryClassifier m = initial_model(kind, static_cast<int>(x[0].size()), config.seed);
  for (const auto& row : x) check_dim(m, row.size());
  m.threshold = config.threshold;
  run_optimizer(m, x, y, config, loss_log);
  return m;
}

BinaryClassifier train(const LabeledSet& set, ModelKind kind, const TrainConfig& config,
                       std::vector<double>* loss_log) {
  std::vector<int> y;
  for (const auto& s : set.samples) y.push_back(s.label);
  check_trainable(set.size(), y);
  std::vector<std::vector<double>> pooled;
  pooled.reserve(set.size());
  for (const auto& s : set.samples) pooled.push_back(pool(s.grid));
  const FeatureNorm norm = FeatureNorm::fit(pooled);
  for (auto& row : pooled) row = standardize(row, norm);
  BinaryClassifier m = initial_model(kind, kFeatureDim, config.seed);
  m.norm = norm;
  m.threshold = config.threshold;
  run_optimizer(m, pooled, y, config, loss_log);
  return m;
}

Metrics evaluate(const BinaryClassifier& model, const LabeledSet& set) {
  if (set.samples.empty()) throw ScoopError(ErrorKind::EmptySet, "evaluation set is empty");
  Metrics r;
  for (const auto& s : set.samples) {
    const int guess = predict_grid(model, s.grid) >= model.threshold ? 1 : 0;
    const bool ok = guess == s.label;
    if (guess && s.label) ++r.tp;
    if (guess && !s.label) ++r.fp;
    if (!guess && !s.label) ++r.tn;
    if (!guess && s.label) ++r.fn;
    auto& cls = r.per_class[s.source];
    cls.first += ok ? 1 : 0;
    cls.second += 1;
  }
  const double n = static_cast<double>(set.size());
  r.accuracy = (r.tp + r.tn) / n;
  r.precision = r.tp + r.fp ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Dataset generation

SideGrid risk_observation(const WorldState& world, RandomStream& noise) {
  return lift_overhead(render_overhead(world, noise), noise);
}

LabeledSet generate_fragility_dataset(std::shared_ptr<const Catalog> catalog,
                                      const FragilityOptions& options) {
  if (!catalog || catalog->classes.empty()) {
    throw ScoopError(ErrorKind::EmptyCatalog, "no classes to sample");
  }
  if (options.n_per_class < 1) {
    throw ScoopError(ErrorKind::InvalidDataset, "n_per_class must be at least 1");
  }
  std::vector<const FoodClassSpec*> used;
  for (const auto& c : catalog->classes) {
    if (std::find(options.holdout.begin(), options.holdout.end(), c.name) ==
        options.holdout.end()) {
      used.push_back(&c);
    }
  }
  if (used.empty()) throw ScoopError(ErrorKind::EmptyCatalog, "every class is held out");
  const std::size_t per = static_cast<std::size_t>(options.n_per_class);
  LabeledSet out;
  out.samples.resize(used.size() * per);
  parallel_for(out.samples.size(), [&](std::size_t i) {
    const FoodClassSpec& spec = *used[i / per];
    ScenarioConfig cfg;
    cfg.items = {{spec.name, 1}};
    cfg.seed = options.seed * 1000003ULL + hash_name(spec.name) + (i % per);
    cfg.placement_jitter = options.placement_jitter;
    cfg.property_jitter = options.property_jitter;
    WorldState world = spawn_scenario(catalog, cfg);
    Sample& s = out.samples[i];
    s.grid = risk_observation(world, world.rng.perception);
    s.label = spec.fragile() ? 1 : 0;
    s.seed = cfg.seed;
    s.source = spec.name;
  });
  return out;
}

BreakageDataset generate_breakage_dataset(std::shared_ptr<const Catalog> catalog,
                                          const BreakageOptions& options) {
  if (!catalog || catalog->classes.empty()) {
    throw ScoopError(ErrorKind::EmptyCatalog, "no classes to sample");
  }
  catalog->at(options.food);  // throws UnknownClass
  const std::size_t n = static_cast<std::size_t>(std::max(0, options.n_rollouts));
  std::vector<RolloutRecord> records(n);
  std::vector<std::uint64_t> seeds(n);
  parallel_for(n, [&](std::size_t i) {
    ScenarioConfig cfg;
    cfg.items = {{options.food, 1}};
    cfg.seed = options.seed * 1000003ULL + i;
    cfg.placement_jitter = options.placement_jitter;
    cfg.property_jitter = options.property_jitter;
    WorldState world = spawn_scenario(catalog, cfg);
    RandomStream jitter(cfg.seed, "break_jitter");
    for (auto& item : world.items) {
      item.break_force *= 1.0 + jitter.uniform(-options.break_jitter, options.break_jitter);
    }
    const double x_f = world.items.front().pose.position.x;
    PrimitiveOptions po;
    po.alpha = 1.0;
    RolloutOptions ro;
    ro.record_observations = true;
    records[i] = run_rollout(std::move(world), plan_primitive(x_f, po), nullptr, ro);
    seeds[i] = cfg.seed;
  });

  BreakageDataset out;
  for (std::size_t i = 0; i < n; ++i) {
    const RolloutRecord& rec = records[i];
    int t_b = -1;
    for (const auto& b : rec.breaks) {
      const TickRecord& t = rec.ticks.at(static_cast<std::size_t>(b.tick));
      if (t.phase == Phase::Pushing) {
        t_b = t.tick;
        break;
      }
    }
    out.break_ticks.push_back(t_b);
    out.max_squeeze_increase = std::max(out.max_squeeze_increase, rec.max_tick_squeeze_increase);
    for (std::size_t k = 0; k < rec.observations.size(); ++k) {
      Sample s;
      s.grid = rec.observations[k];
      // Frames from the window start onward are Stop: once the squeeze is
      // this close to breaking, continuing is never the right call.
      s.label = t_b >= 0 && static_cast<int>(k) >= t_b - options.window && options.window > 0;
      s.seed = seeds[i];
      s.source = options.food;
      out.set.samples.push_back(std::move(s));
    }
  }
  if (out.set.count(1) == 0) {
    throw ScoopError(ErrorKind::NoBreakObserved,
                     "no breakage-imminent frame in " + std::to_string(n) + " rollouts of " +
                         options.food);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

namespace {

SideGrid box_blur(const SideGrid& g, double radius) {
  if (radius <= 0.0) return g;
  // Fractional 3x3 box: neighbours weighted by the radius.
  const double w = std::min(1.0, radius);
  SideGrid out;
  for (int r = 0; r < SideGrid::kHeight; ++r) {
    for (int c = 0; c < SideGrid::kWidth; ++c) {
      double sum = g.at(r, c), weight = 1.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (!dr && !dc) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= SideGrid::kHeight || cc >= SideGrid::kWidth) continue;
          sum += w * g.at(rr, cc);
          weight += w;
        }
      }
      out.at(r, c) = sum / weight;
    }
  }
  return out;
}

SideGrid augment_once(const SideGrid& src, RandomStream& rng) {
  const double contrast = rng.uniform(0.95, 1.05);
  const double offset = rng.uniform(-10.0, 10.0) / 255.0;
  const double gamma = rng.uniform(0.95, 1.05);
  const double blur = rng.uniform(0.0, 0.6);
  const double gain = rng.uniform(0.95, 1.05);
  const bool flip = rng.bernoulli(0.5);
  SideGrid g = box_blur(src, blur);
  for (double& v : g.pixels) {
    v = (v - 0.5) * contrast + 0.5 + offset;
    v = std::pow(std::clamp(v, 0.0, 1.0), gamma) * gain;
    v = std::clamp(v + rng.gaussian(0.0, 3.1875 / 255.0), 0.0, 1.0);
  }
  return flip ? flip_vertical(g) : g;
}

}  // namespace

LabeledSet augment(const LabeledSet& set, int factor, std::uint64_t seed) {
  if (factor <= 1) return set;
  LabeledSet out;
  out.samples.reserve(set.size() * static_cast<std::size_t>(factor));
  RandomStream rng(seed, "augment");
  for (const auto& s : set.samples) {
    out.samples.push_back(s);
    for (int k = 1; k < factor; ++k) {
      Sample copy = s;
      copy.grid = augment_once(s.grid, rng);
      out.samples.push_back(std::move(copy));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

void save_dataset(const LabeledSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw ScoopError(ErrorKind::MissingFile, "cannot write " + dir.string());
  manifest << "path,label,seed,source\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Sample& s = set.samples[i];
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", i);
    write_pgm(dir / name, s.grid.pixels, SideGrid::kWidth, SideGrid::kHeight);
    manifest << name << ',' << s.label << ',' << s.seed << ',' << s.source << '\n';
  }
}

LabeledSet load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) {
    throw ScoopError(ErrorKind::ModelMissing, "no manifest.csv in " + dir.string());
  }
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("path,label,seed", 0) != 0) {
    throw ScoopError(ErrorKind::InvalidDataset, "bad manifest header in " + dir.string());
  }
  LabeledSet set;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string path, label, seed, source;
    std::getline(row, path, ',');
    std::getline(row, label, ',');
    std::getline(row, seed, ',');
    std::getline(row, source);
    Sample s;
    try {
      s.label = std::stoi(label);
      s.seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw ScoopError(ErrorKind::InvalidDataset, "bad manifest row: " + line);
    }
    if (s.label != 0 && s.label != 1) {
      throw ScoopError(ErrorKind::InvalidDataset, "label must be 0 or 1: " + line);
    }
    s.source = source;
    int w = 0, h = 0;
    s.grid.pixels = read_pgm(dir / path, w, h);
    if (w != SideGrid::kWidth || h != SideGrid::kHeight) {
      throw ScoopError(ErrorKind::InvalidDataset, path + " is not 64x48");
    }
    set.samples.push_back(std::move(s));
  }
  if (set.samples.empty()) throw ScoopError(ErrorKind::InvalidDataset, "dataset is empty");
  return set;
}

namespace {

void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

std::vector<double> get_le(std::istream& is, std::size_t n, const std::string& what) {
  std::vector<double> out(n);
  unsigned char bytes[8];
  for (auto& v : out) {
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
      throw ScoopError(ErrorKind::InvalidDataset, "truncated payload in " + what);
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

void save_model(const BinaryClassifier& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ScoopError(ErrorKind::MissingFile, "cannot write " + path.string());
  json header = {{"format", "scoopsim-model"},
                 {"version", 1},
                 {"kind", to_string(model.kind)},
                 {"input_dim", model.input_dim},
                 {"hidden", model.hidden},
                 {"threshold", model.threshold},
                 {"param_count", model.params.size()},
                 {"norm_dim", model.norm.mean.size()},
                 {"layout", "params, norm_mean, norm_stddev as float64 little-endian"}};
  os << header.dump() << '\n';
  for (double v : model.params) put_le(os, v);
  for (double v : model.norm.mean) put_le(os, v);
  for (double v : model.norm.stddev) put_le(os, v);
}

BinaryClassifier load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ScoopError(ErrorKind::ModelMissing, "no model at " + path.string());
  std::string line;
  std::getline(is, line);
  BinaryClassifier m;
  try {
    const json h = json::parse(line);
    if (h.at("format") != "scoopsim-model") throw std::runtime_error("format");
    const std::string kind = h.at("kind");
    if (kind == "Linear") {
      m.kind = ModelKind::Linear;
    } else if (kind == "OneHiddenLayer") {
      m.kind = ModelKind::OneHiddenLayer;
    } else {
      throw std::runtime_error("kind " + kind);
    }
    m.input_dim = h.at("input_dim");
    m.hidden = h.at("hidden");
    m.threshold = h.at("threshold");
    const std::size_t np = h.at("param_count");
    if (np != m.param_count()) throw std::runtime_error("param_count");
    const std::size_t nd = h.at("norm_dim");
    m.params = get_le(is, np, path.string());
    m.norm.mean = get_le(is, nd, path.string());
    m.norm.stddev = get_le(is, nd, path.string());
  } catch (const ScoopError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScoopError(ErrorKind::InvalidDataset,
                     "bad model header in " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace scoopsim
