#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scoopsim/perception.hpp"
#include "scoopsim/primitive.hpp"
#include "scoopsim/worldmodel.hpp"

namespace scoopsim {

struct Sample {
  SideGrid grid;
  int label = 0;
  std::uint64_t seed = 0;
  std::string source;  // food class the sample came from
};

// Risk labels: 1 = Fragile. Failure labels: 1 = Stop.
struct LabeledSet {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t count(int label) const;
};

enum class ModelKind { Linear, OneHiddenLayer };
const char* to_string(ModelKind k);

struct BinaryClassifier {
  ModelKind kind = ModelKind::Linear;
  int input_dim = kFeatureDim;
  int hidden = 32;
  // Linear: w[input_dim], b. OneHiddenLayer: W1[hidden][input_dim], b1[hidden],
  // w2[hidden], b2.
  std::vector<double> params;
  FeatureNorm norm;
  double threshold = 0.5;

  static BinaryClassifier zeros(ModelKind kind, int input_dim = kFeatureDim, int hidden = 32);
  std::size_t param_count() const;
  bool operator==(const BinaryClassifier&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 15;  // risk; failure uses 25
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  static TrainConfig risk_defaults();
  static TrainConfig failure_defaults();
};

// Probability for already standardized features. Throws ShapeMismatch.
double predict(const BinaryClassifier& model, std::span<const double> features);
// Pool, standardize with the model's norm, predict.
double predict_grid(const BinaryClassifier& model, const SideGrid& grid);

// Mean binary cross-entropy over (features, label) pairs.
double bce_loss(const BinaryClassifier& model, std::span<const std::vector<double>> x,
                std::span<const int> y);
// Gradient of bce_loss with respect to model.params.
std::vector<double> bce_gradient(const BinaryClassifier& model,
                                 std::span<const std::vector<double>> x,
                                 std::span<const int> y);

// Fits the feature norm on the set, then minibatch adaptive-moment descent with
// decoupled weight decay. Throws EmptySet, InvalidDataset (one label only),
// DivergedLoss.
BinaryClassifier train(const LabeledSet& set, ModelKind kind, const TrainConfig& config,
                       std::vector<double>* loss_log = nullptr);
// Same optimizer on raw feature vectors (norm left unfitted). Only train()
// insists on both labels.
BinaryClassifier train_features(std::span<const std::vector<double>> x, std::span<const int> y,
                                ModelKind kind, const TrainConfig& config,
                                std::vector<double>* loss_log = nullptr);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  int tp = 0, fp = 0, tn = 0, fn = 0;
  // class -> (correct, total)
  std::map<std::string, std::pair<int, int>> per_class;
};
// Throws EmptySet.
Metrics evaluate(const BinaryClassifier& model, const LabeledSet& set);

struct FragilityOptions {
  int n_per_class = 43;
  std::uint64_t seed = 0;
  std::vector<std::string> holdout = {"orange_triangle_jello"};
  double placement_jitter = 0.01;
  double property_jitter = 0.1;
};
// One rendered overhead observation (lifted to side-grid shape) per spawn.
// Throws EmptyCatalog.
LabeledSet generate_fragility_dataset(std::shared_ptr<const Catalog> catalog,
                                      const FragilityOptions& options);
// Overhead observation of a world as the risk classifier sees it.
SideGrid risk_observation(const WorldState& world, RandomStream& noise);

struct BreakageOptions {
  int n_rollouts = 30;
  int window = 6;  // ticks labelled Stop before the break
  std::uint64_t seed = 0;
  std::string food = "tofu";
  double break_jitter = 0.3;
  double placement_jitter = 0.01;
  double property_jitter = 0.1;
};
struct BreakageDataset {
  LabeledSet set;
  std::vector<int> break_ticks;  // -1 for rollouts without a Pushing break
  double max_squeeze_increase = 0.0;
};
// Open-loop alpha = 1 rollouts; Pushing frames from t_b - W on are Stop. Throws
// NoBreakObserved when no rollout breaks or the window yields no Stop frame.
BreakageDataset generate_breakage_dataset(std::shared_ptr<const Catalog> catalog,
                                          const BreakageOptions& options);

// factor - 1 label-preserving copies per sample; factor 1 is the identity.
LabeledSet augment(const LabeledSet& set, int factor, std::uint64_t seed);

// Directory of PGMs plus manifest.csv (path,label,seed,source).
void save_dataset(const LabeledSet& set, const std::filesystem::path& dir);
LabeledSet load_dataset(const std::filesystem::path& dir);

// One-line JSON header followed by little-endian float64 payload
// (params, norm mean, norm stddev).
void save_model(const BinaryClassifier& model, const std::filesystem::path& path);
BinaryClassifier load_model(const std::filesystem::path& path);

}  // namespace scoopsim
