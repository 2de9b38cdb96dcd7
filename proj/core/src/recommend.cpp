#include "physlaw/recommend.hpp"

#include "physlaw/measured.hpp"  // UsageError

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace physlaw {

WeightNet::WeightNet(uint64_t seed) {
  params_.resize(static_cast<std::size_t>(kHidden * kIn + kHidden + kHidden + 1));
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(double(kIn));
  for (auto& p : params_) p = rng.normal(0.0, scale);
}

void WeightNet::set_parameters(std::vector<double> p) {
  if (p.size() != params_.size()) throw UsageError("WeightNet: parameter size mismatch");
  params_ = std::move(p);
}

double WeightNet::forward(const std::array<double, kIn>& x) const {
  const double* W1 = params_.data();
  const double* b1 = W1 + kHidden * kIn;
  const double* w2 = b1 + kHidden;
  const double b2 = *(w2 + kHidden);
  double acc = b2;
  for (int h = 0; h < kHidden; ++h) {
    double z = b1[h];
    for (int i = 0; i < kIn; ++i) z += W1[h * kIn + i] * x[static_cast<std::size_t>(i)];
    acc += w2[h] * std::tanh(z);
  }
  return 1.0 / (1.0 + std::exp(-acc));
}

void WeightNet::accumulate_gradient(const std::array<double, kIn>& x, double target,
                                    double weight, std::vector<double>& grad) const {
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
  const double* W1 = params_.data();
  const double* b1 = W1 + kHidden * kIn;
  const double* w2 = b1 + kHidden;
  const double b2 = *(w2 + kHidden);
  std::array<double, kHidden> h{}, z{};
  double acc = b2;
  for (int j = 0; j < kHidden; ++j) {
    double s = b1[j];
    for (int i = 0; i < kIn; ++i) s += W1[j * kIn + i] * x[static_cast<std::size_t>(i)];
    z[static_cast<std::size_t>(j)] = s;
    h[static_cast<std::size_t>(j)] = std::tanh(s);
    acc += w2[j] * h[static_cast<std::size_t>(j)];
  }
  const double y = 1.0 / (1.0 + std::exp(-acc));
  // d/dacc of weight*(y-target)^2
  const double dacc = weight * 2.0 * (y - target) * y * (1.0 - y);
  double* gW1 = grad.data();
  double* gb1 = gW1 + kHidden * kIn;
  double* gw2 = gb1 + kHidden;
  double* gb2 = gw2 + kHidden;
  *gb2 += dacc;
  for (int j = 0; j < kHidden; ++j) {
    gw2[j] += dacc * h[static_cast<std::size_t>(j)];
    const double dz = dacc * w2[j] * (1.0 - h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)]);
    gb1[j] += dz;
    for (int i = 0; i < kIn; ++i) gW1[j * kIn + i] += dz * x[static_cast<std::size_t>(i)];
  }
}

void WeightNet::sgd_step(const std::vector<double>& grad, double lr) {
  if (grad.size() != params_.size()) throw UsageError("WeightNet: gradient size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * grad[i];
}

std::vector<double> window_weights(std::size_t len, double eta) {
  // newest trial last: exponents eta^(len-1), ..., eta^1, eta^0
  std::vector<double> w(len);
  double norm = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    w[i] = std::exp(std::pow(eta, double(len - 1 - i)));
    norm += w[i];
  }
  for (auto& x : w) x /= norm;
  return w;
}

RecommendationEngine::RecommendationEngine(EngineConfig cfg, uint64_t seed)
    : cfg_(cfg), rng_(seed), net_(hash_mix(seed)), budget_(cfg.era0_budget) {}

double RecommendationEngine::experiment_value(const std::string& experiment) const {
  auto it = arms_.find(experiment);
  const Arm arm = it == arms_.end() ? Arm{} : it->second;
  return cfg_.alpha * arm.reward + std::sqrt(1.0 / (1.0 + arm.count));
}

std::string RecommendationEngine::select_experiment(const std::vector<std::string>& feasible) {
  if (feasible.empty()) throw UsageError("select_experiment: empty feasible set");
  // compulsory exploration of under-explored arms
  const std::string* pick = nullptr;
  double best_count = 0.0;
  for (const auto& k : feasible) {
    const double n = arms_[k].count;
    if (n < 1.1 && (!pick || n < best_count || (n == best_count && k < *pick))) {
      pick = &k;
      best_count = n;
    }
  }
  if (!pick) {
    double best = -1.0;
    for (const auto& k : feasible) {
      const double v = experiment_value(k);
      if (v > best || (v == best && pick && k < *pick)) {
        best = v;
        pick = &k;
      }
    }
  }
  arms_[*pick].count += 1.0;
  return *pick;
}

void RecommendationEngine::update_reward(const std::string& experiment, double r) {
  Arm& arm = arms_[experiment];
  arm.reward = cfg_.gamma * arm.reward + r;
}

std::array<double, WeightNet::kIn> RecommendationEngine::group_features(
    const std::vector<int>& complexities, std::size_t kb_size) const {
  std::array<double, WeightNet::kIn> x{};
  for (std::size_t i = 0; i < complexities.size() && i < 3; ++i)
    x[i] = double(complexities[i]) / 8.0;
  x[3] = double(kb_size) / 64.0;
  return x;
}

std::vector<std::string> RecommendationEngine::select_concepts(
    const std::string& experiment,
    const std::vector<std::pair<std::string, int>>& concepts_with_complexity,
    std::size_t kb_size) {
  pending_groups_.clear();
  if (concepts_with_complexity.empty()) return {};

  std::map<std::string, int> complexity_of;
  for (const auto& [sym, cx] : concepts_with_complexity) complexity_of[sym] = cx;

  // groups: all singletons, plus pairs and triples over the recency pool
  std::vector<std::vector<std::string>> groups;
  for (const auto& [sym, cx] : concepts_with_complexity) groups.push_back({sym});
  std::vector<std::string> pool;
  for (const auto& sym : recent_) {
    if (complexity_of.count(sym) &&
        std::find(pool.begin(), pool.end(), sym) == pool.end()) {
      pool.push_back(sym);
      if (static_cast<int>(pool.size()) >= cfg_.n_candidate) break;
    }
  }
  if (pool.empty()) {
    for (const auto& [sym, cx] : concepts_with_complexity) {
      pool.push_back(sym);
      if (static_cast<int>(pool.size()) >= cfg_.n_candidate) break;
    }
  }
  std::sort(pool.begin(), pool.end());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      groups.push_back({pool[i], pool[j]});
      for (std::size_t k = j + 1; k < pool.size(); ++k)
        groups.push_back({pool[i], pool[j], pool[k]});
    }
  }

  auto group_key = [](const std::vector<std::string>& g) {
    std::string key;
    for (const auto& s : g) key += s + "+";
    return key;
  };

  // score every group
  auto& counts = group_count_[experiment];
  struct Scored {
    double value;
    std::string key;
    const std::vector<std::string>* members;
    std::array<double, WeightNet::kIn> features;
  };
  std::vector<Scored> scored;
  scored.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<int> cx;
    double reward_sum = 0.0;
    for (const auto& sym : g) {
      cx.push_back(complexity_of.at(sym));
      auto it = concept_reward_.find(sym);
      if (it != concept_reward_.end()) reward_sum += it->second;
    }
    std::sort(cx.begin(), cx.end());
    const auto features = group_features(cx, kb_size);
    const std::string key = group_key(g);
    const double n = counts.count(key) ? counts.at(key) : 0.0;
    const double v = net_.forward(features) * reward_sum + std::sqrt(1.0 / (1.0 + n));
    scored.push_back({v, key, &g, features});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.key < b.key;
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg_.top_k),
                                                 scored.size());
  std::vector<std::string> unioned;
  for (std::size_t i = 0; i < take; ++i) {
    counts[scored[i].key] += 1.0;
    pending_groups_.emplace_back(*scored[i].members, scored[i].features);
    for (const auto& sym : *scored[i].members)
      if (std::find(unioned.begin(), unioned.end(), sym) == unioned.end())
        unioned.push_back(sym);
  }
  std::sort(unioned.begin(), unioned.end());

  // sample n distinct concepts from the union of the top groups
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < cfg_.n_select && !unioned.empty()) {
    const std::size_t idx =
        static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int64_t>(unioned.size()) - 1));
    out.push_back(unioned[idx]);
    unioned.erase(unioned.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  std::sort(out.begin(), out.end());
  for (const auto& sym : out) {
    recent_.erase(std::remove(recent_.begin(), recent_.end(), sym), recent_.end());
    recent_.push_front(sym);
  }
  while (recent_.size() > static_cast<std::size_t>(4 * cfg_.n_candidate)) recent_.pop_back();
  return out;
}

double RecommendationEngine::note_trial(const std::string& experiment, double reward) {
  update_reward(experiment, reward);
  // concepts used in the trial share the trial's reward
  TrialRecordForNet rec;
  for (const auto& [members, features] : pending_groups_) {
    rec.features.push_back(features);
    rec.rewards.push_back(reward);
    if (reward > 0.0) {
      for (const auto& sym : members) {
        concept_reward_[sym] = cfg_.gamma * concept_reward_[sym] + reward;
        recent_.erase(std::remove(recent_.begin(), recent_.end(), sym), recent_.end());
        recent_.push_front(sym);
      }
    }
  }
  pending_groups_.clear();
  if (!rec.features.empty()) {
    history_.push_back(std::move(rec));
    while (history_.size() > static_cast<std::size_t>(cfg_.window)) history_.pop_front();
  }
  dry_trials_ = reward > 0.0 ? 0 : dry_trials_ + 1;
  return history_.empty() ? 0.0 : train_step();
}

double RecommendationEngine::train_step() {
  if (history_.empty()) return 0.0;
  const std::vector<double> w = window_weights(history_.size(), cfg_.eta);
  std::vector<double> grad(net_.parameter_count(), 0.0);
  double total = 0.0;
  for (std::size_t tau = 0; tau < history_.size(); ++tau) {
    const TrialRecordForNet& rec = history_[tau];
    const double per_group = w[tau] / double(rec.features.size());
    double l_tau = 0.0;
    for (std::size_t i = 0; i < rec.features.size(); ++i) {
      const double target = rec.rewards[i] == 0.0 ? 0.0 : 1.0;
      const double y = net_.forward(rec.features[i]);
      l_tau += (y - target) * (y - target);
      net_.accumulate_gradient(rec.features[i], target, per_group, grad);
    }
    total += w[tau] * l_tau / double(rec.features.size());
  }
  net_.sgd_step(grad, cfg_.lr);
  return total;
}

RecommendationEngine::EraDecision RecommendationEngine::era_step(
    const std::vector<std::string>& feasible) {
  EraDecision out;
  if (feasible.empty()) {
    out.advance = true;
  } else {
    bool unexplored = false;
    for (const auto& k : feasible) {
      auto it = arms_.find(k);
      if (it == arms_.end() || it->second.count < 1.1) unexplored = true;
    }
    if (unexplored) return out;  // compulsory exploration still pending
    bool all_below = true;
    for (const auto& k : feasible) all_below &= experiment_value(k) < cfg_.v_threshold;
    const bool too_dry = dry_trials_ >= cfg_.max_dry_factor * static_cast<int>(feasible.size());
    out.advance = all_below || too_dry;
  }
  if (out.advance) {
    era_ += 1;
    budget_ *= 2;  // budgets relax exponentially across eras
    arms_.clear();
    group_count_.clear();
    dry_trials_ = 0;
    out.new_budget = budget_;
  }
  return out;
}

// ---------------------------------------------------------------------------
// state serialization (checkpoint support)

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string RecommendationEngine::save_state() const {
  std::ostringstream os;
  os << "engine v1\n";
  os << "era " << era_ << " " << budget_ << " " << dry_trials_ << "\n";
  os << "rng " << rng_.save_state() << "\n";
  os << "net";
  for (double p : net_.parameters()) os << " " << fmt17(p);
  os << "\n";
  for (const auto& [k, arm] : arms_)
    os << "arm " << k << " " << fmt17(arm.reward) << " " << fmt17(arm.count) << "\n";
  for (const auto& [k, r] : concept_reward_) os << "crew " << k << " " << fmt17(r) << "\n";
  for (const auto& [exp, m] : group_count_)
    for (const auto& [key, n] : m) os << "gcount " << exp << " " << key << " " << fmt17(n) << "\n";
  os << "recent";
  for (const auto& s : recent_) os << " " << s;
  os << "\n";
  for (const auto& rec : history_) {
    os << "hist " << rec.features.size();
    for (std::size_t i = 0; i < rec.features.size(); ++i) {
      for (double f : rec.features[i]) os << " " << fmt17(f);
      os << " " << fmt17(rec.rewards[i]);
    }
    os << "\n";
  }
  os << "endengine\n";
  return os.str();
}

void RecommendationEngine::restore_state(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "engine v1")
    throw UsageError("engine restore: bad header");
  arms_.clear();
  concept_reward_.clear();
  group_count_.clear();
  recent_.clear();
  history_.clear();
  pending_groups_.clear();
  bool saw_end = false;
  while (std::getline(is, line)) {
    if (line == "endengine") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "era") {
      ls >> era_ >> budget_ >> dry_trials_;
    } else if (head == "rng") {
      std::string rest;
      std::getline(ls, rest);
      rng_.restore_state(rest);
    } else if (head == "net") {
      std::vector<double> p(net_.parameter_count());
      for (auto& v : p) ls >> v;
      net_.set_parameters(std::move(p));
    } else if (head == "arm") {
      std::string k;
      Arm a;
      ls >> k >> a.reward >> a.count;
      arms_[k] = a;
    } else if (head == "crew") {
      std::string k;
      double r;
      ls >> k >> r;
      concept_reward_[k] = r;
    } else if (head == "gcount") {
      std::string exp, key;
      double n;
      ls >> exp >> key >> n;
      group_count_[exp][key] = n;
    } else if (head == "recent") {
      std::string s;
      while (ls >> s) recent_.push_back(s);
    } else if (head == "hist") {
      std::size_t n = 0;
      ls >> n;
      TrialRecordForNet rec;
      for (std::size_t i = 0; i < n; ++i) {
        std::array<double, WeightNet::kIn> f{};
        for (auto& v : f) ls >> v;
        double r;
        ls >> r;
        rec.features.push_back(f);
        rec.rewards.push_back(r);
      }
      history_.push_back(std::move(rec));
    } else {
      throw UsageError("engine restore: unknown record " + head);
    }
  }
  if (!saw_end) throw UsageError("engine restore: truncated state");
}

}  // namespace physlaw
