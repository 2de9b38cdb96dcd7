#pragma once

#include "physlaw/rng.hpp"

#include <array>
#include <deque>
#include <map>
#include <string>
#include <vector>

namespace physlaw {

// Fully-connected 4 -> 16 -> 1 net with tanh hidden units and a sigmoid
// output in (0,1). Inputs are the (padded) definition complexities of a
// concept group and the current KB size; the output replaces the reward
// weighting coefficient in the group value function.
class WeightNet {
 public:
  static constexpr int kIn = 4;
  static constexpr int kHidden = 16;

  explicit WeightNet(uint64_t seed = 1);

  double forward(const std::array<double, kIn>& x) const;
  // d(weight * (forward(x) - target)^2)/dparams added into grad
  void accumulate_gradient(const std::array<double, kIn>& x, double target, double weight,
                           std::vector<double>& grad) const;
  void sgd_step(const std::vector<double>& grad, double lr);

  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<double>& parameters() const { return params_; }
  void set_parameters(std::vector<double> p);

 private:
  std::vector<double> params_;  // W1 (16x4), b1 (16), w2 (16), b2 (1)
};

// Softmax-normalized window weights with exponential decay: weight of the
// trial tau steps before the newest is softmax(eta^tau).
std::vector<double> window_weights(std::size_t len, double eta);

struct EngineConfig {
  double alpha = 1.0;        // experiment-level reward weight
  double gamma = 0.1;        // reward discount
  double eta = 0.97;         // training-window decay
  double v_threshold = 1.05; // era-transition threshold on V(k)
  int top_k = 8;
  int n_select = 3;
  int window = 256;          // training window T
  double lr = 1e-2;
  int n_candidate = 64;      // recency pool for pair/triple groups
  uint64_t era0_budget = 1000000;  // work units per trial in era 0
  int max_dry_factor = 3;    // dry-trial cap = factor * |feasible|
};

// Era-controlled UCB selection of experiments and concept groups.
class RecommendationEngine {
 public:
  RecommendationEngine(EngineConfig cfg, uint64_t seed);

  // --- experiment channel ---
  // Compulsory exploration first (any arm with N < 1.1), then argmax of
  // V(k) = alpha R(k) + sqrt(1/(1+N(k))). Increments the chosen arm's count.
  std::string select_experiment(const std::vector<std::string>& feasible);
  void update_reward(const std::string& experiment, double r);
  double experiment_value(const std::string& experiment) const;

  // --- concept channel ---
  // Scores groups (size <= 3) by V with the net output as reward weight,
  // takes the top_k groups and samples n distinct concepts from their union.
  std::vector<std::string> select_concepts(
      const std::string& experiment,
      const std::vector<std::pair<std::string, int>>& concepts_with_complexity,
      std::size_t kb_size);

  // Books the trial outcome: per-group records for training, concept reward
  // decay, dry-trial accounting. Runs one training step when history exists.
  double note_trial(const std::string& experiment, double reward);

  // One SGD step on the weighted window loss; returns L_t.
  double train_step();

  struct EraDecision {
    bool advance = false;
    uint64_t new_budget = 0;
  };
  // Advance when exploration is complete and either every V(k) sits below the
  // threshold or too many consecutive trials produced nothing.
  EraDecision era_step(const std::vector<std::string>& feasible);

  int era() const { return era_; }
  uint64_t trial_budget() const { return budget_; }
  const EngineConfig& config() const { return cfg_; }
  WeightNet& net() { return net_; }

  std::string save_state() const;
  void restore_state(const std::string& text);

 private:
  struct Arm {
    double reward = 0.0;
    double count = 0.0;
  };
  struct TrialRecordForNet {
    std::vector<std::array<double, WeightNet::kIn>> features;
    std::vector<double> rewards;
  };

  std::array<double, WeightNet::kIn> group_features(const std::vector<int>& complexities,
                                                    std::size_t kb_size) const;

  EngineConfig cfg_;
  Rng rng_;
  WeightNet net_;
  int era_ = 0;
  uint64_t budget_;
  int dry_trials_ = 0;
  std::map<std::string, Arm> arms_;
  std::map<std::string, double> concept_reward_;
  std::map<std::string, std::map<std::string, double>> group_count_;  // exp -> group key -> N
  std::deque<std::string> recent_;  // recently used/rewarded concepts
  std::deque<TrialRecordForNet> history_;
  // groups selected by the last select_concepts call, pending note_trial
  std::vector<std::pair<std::vector<std::string>, std::array<double, WeightNet::kIn>>>
      pending_groups_;
};

}  // namespace physlaw
