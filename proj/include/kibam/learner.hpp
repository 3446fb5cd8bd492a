#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kibam/battery_model.hpp"
#include "kibam/errors.hpp"
#include "kibam/load_profile.hpp"
#include "kibam/plan.hpp"
#include "kibam/policies.hpp"

namespace kibam {

KIBAM_DECLARE_ERROR(InvalidPlan, InputError);
KIBAM_DECLARE_ERROR(EmptyDataset, InputError);
KIBAM_DECLARE_ERROR(ArityMismatch, InputError);
KIBAM_DECLARE_ERROR(TooFewRows, InputError);

/// How the previously chosen battery B enters the feature vector: one
/// numeric column (`active`, 0 if none) or N indicator columns
/// (`b<k>active`).
enum class ActiveEncoding { Index, OneHot };

/// 2N + 2 for Index, 3N + 1 for OneHot.
std::size_t feature_arity(std::size_t batteries, ActiveEncoding encoding);

/// Rows of (sigma_1, gamma_1, ..., sigma_N, gamma_N, B, L) with the chosen
/// battery (1-based) as label. B is the previously chosen battery, 0 if none.
class TrainingSet {
 public:
  TrainingSet() = default;
  explicit TrainingSet(std::size_t batteries, ActiveEncoding encoding = ActiveEncoding::Index)
      : batteries_(batteries), encoding_(encoding) {}

  std::size_t batteries() const { return batteries_; }
  ActiveEncoding encoding() const { return encoding_; }
  std::size_t arity() const { return feature_arity(batteries_, encoding_); }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  void add(std::span<const double> features, int label);
  const double* row(std::size_t i) const { return features_.data() + i * arity(); }
  double at(std::size_t i, std::size_t f) const { return features_[i * arity() + f]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }

  TrainingSet subset(std::span<const std::size_t> rows) const;
  void append(const TrainingSet& other);

  /// Header `b1sigma,b1gamma,...,active,load,label` then one row per line.
  std::string to_csv() const;

 private:
  std::size_t batteries_ = 0;
  ActiveEncoding encoding_ = ActiveEncoding::Index;
  std::vector<double> features_;
  std::vector<int> labels_;
};

/// Feature names: b<k>sigma, b<k>gamma, then active (or b<k>active), load.
std::vector<std::string> feature_names(std::size_t batteries, ActiveEncoding encoding = ActiveEncoding::Index);

struct PlanInstance {
  Plan plan;
  LoadProfile profile;
};

/// Samples each plan at k * increment while the load is positive, with the
/// exact battery states at that instant. Throws InvalidPlan when a plan does
/// not validate.
TrainingSet extract_training(const std::vector<PlanInstance>& instances, const std::vector<BatteryParams>& batteries,
                             double increment = 0.01, ActiveEncoding encoding = ActiveEncoding::Index);

struct TreeConfig {
  std::size_t min_leaf = 2;
  std::size_t max_depth = 64;
  bool use_gain_ratio = true;
  bool prune = false;  ///< pessimistic (error-based) pruning at confidence 0.25
};

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  ///< -1 for leaves
    double threshold = 0.0;
    int left = -1;   ///< feature <= threshold
    int right = -1;  ///< feature > threshold
    int label = 1;
  };

  DecisionTree() = default;
  DecisionTree(std::size_t batteries, std::vector<Node> nodes, ActiveEncoding encoding = ActiveEncoding::Index);

  std::size_t batteries() const { return batteries_; }
  ActiveEncoding encoding() const { return encoding_; }
  std::size_t arity() const { return feature_arity(batteries_, encoding_); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Edges on the longest root-to-leaf path.
  std::size_t depth() const;

  /// Throws ArityMismatch.
  int predict(std::span<const double> features) const;

  /// Nested if-blocks with a `// batteries=N` header (plus `// active=onehot`
  /// for that encoding).
  std::string render() const;
  static DecisionTree parse(std::string_view text);
  static DecisionTree load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t batteries_ = 0;
  ActiveEncoding encoding_ = ActiveEncoding::Index;
  std::vector<Node> nodes_;
};

/// C4.5-style induction: midpoint thresholds, gain ratio among splits with
/// at least average gain. Throws EmptyDataset.
DecisionTree train(const TrainingSet& data, const TreeConfig& config = {});

/// Stratified k-fold, seeded shuffle; mean held-out accuracy. Throws
/// TooFewRows.
double cross_validate(const TrainingSet& data, std::size_t k = 10, const TreeConfig& config = {},
                      std::uint64_t seed = 1);

double accuracy(const DecisionTree& tree, const TrainingSet& data);

/// Feature vector for an observation (B = active + 1).
std::vector<double> features_of(const Observation& obs, ActiveEncoding encoding = ActiveEncoding::Index);

/// Threshold below which the tree's choice is overridden.
using EpsilonFn = std::function<double(const Observation&, int battery)>;

/// load * delta / c: charge one decision period draws from the available well.
EpsilonFn default_epsilon(const std::vector<BatteryParams>& batteries, double delta = 0.01);

/// Tree policy guarded by the Vmax default action.
class PlanBasedPolicy final : public Policy {
 public:
  PlanBasedPolicy(DecisionTree tree, EpsilonFn epsilon);
  Decision decide(const Observation& obs) const override;
  std::string name() const override { return "plan-based"; }
  const DecisionTree& tree() const { return tree_; }

 private:
  DecisionTree tree_;
  EpsilonFn epsilon_;
};

}  // namespace kibam
