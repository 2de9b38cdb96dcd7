#include "physlaw/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace physlaw {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "master_seed = " << master_seed << "\n";
  os << "max_trials = " << max_trials << "\n";
  os << "output_dir = " << output_dir << "\n";
  os << "checkpoint_every = " << checkpoint_every << "\n";
  if (!experiments.empty()) {
    os << "experiments = ";
    for (std::size_t i = 0; i < experiments.size(); ++i)
      os << (i ? "," : "") << experiments[i];
    os << "\n";
  }
  os << "chi2_confidence = " << fmt17(policy.chi2_confidence) << "\n";
  os << "zero_sigma = " << fmt17(policy.zero_sigma) << "\n";
  os << "bad_fraction = " << fmt17(policy.bad_fraction) << "\n";
  os << "n_stencil = " << policy.n_stencil << "\n";
  os << "k_sys = " << fmt17(policy.k_sys) << "\n";
  os << "exact_floor = " << fmt17(policy.exact_floor) << "\n";
  os << "alpha = " << fmt17(engine.alpha) << "\n";
  os << "gamma = " << fmt17(engine.gamma) << "\n";
  os << "eta = " << fmt17(engine.eta) << "\n";
  os << "v_threshold = " << fmt17(engine.v_threshold) << "\n";
  os << "top_k = " << engine.top_k << "\n";
  os << "n_select = " << engine.n_select << "\n";
  os << "window = " << engine.window << "\n";
  os << "lr = " << fmt17(engine.lr) << "\n";
  os << "n_candidate = " << engine.n_candidate << "\n";
  os << "era0_budget = " << engine.era0_budget << "\n";
  os << "max_dry_factor = " << engine.max_dry_factor << "\n";
  os << "m_general = " << m_general << "\n";
  os << "sweep_values = " << sweep_values << "\n";
  os << "pca_k_max = " << pca_k_max << "\n";
  os << "noise_rel = " << fmt17(noise_rel) << "\n";
  os << "term_complexity_cap = " << term_complexity_cap << "\n";
  os << "era_budget_cap = " << era_budget_cap << "\n";
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank &= std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "master_seed") cfg.master_seed = std::stoull(value);
      else if (key == "max_trials") cfg.max_trials = std::stoi(value);
      else if (key == "output_dir") cfg.output_dir = value;
      else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(value);
      else if (key == "experiments") {
        cfg.experiments.clear();
        std::istringstream vs(value);
        std::string name;
        while (std::getline(vs, name, ',')) {
          if (!name.empty()) cfg.experiments.push_back(trim(name));
        }
      } else if (key == "chi2_confidence") cfg.policy.chi2_confidence = std::stod(value);
      else if (key == "zero_sigma") cfg.policy.zero_sigma = std::stod(value);
      else if (key == "bad_fraction") cfg.policy.bad_fraction = std::stod(value);
      else if (key == "n_stencil") cfg.policy.n_stencil = std::stoi(value);
      else if (key == "k_sys") cfg.policy.k_sys = std::stod(value);
      else if (key == "exact_floor") cfg.policy.exact_floor = std::stod(value);
      else if (key == "alpha") cfg.engine.alpha = std::stod(value);
      else if (key == "gamma") cfg.engine.gamma = std::stod(value);
      else if (key == "eta") cfg.engine.eta = std::stod(value);
      else if (key == "v_threshold") cfg.engine.v_threshold = std::stod(value);
      else if (key == "top_k") cfg.engine.top_k = std::stoi(value);
      else if (key == "n_select") cfg.engine.n_select = std::stoi(value);
      else if (key == "window") cfg.engine.window = std::stoi(value);
      else if (key == "lr") cfg.engine.lr = std::stod(value);
      else if (key == "n_candidate") cfg.engine.n_candidate = std::stoi(value);
      else if (key == "era0_budget") cfg.engine.era0_budget = std::stoull(value);
      else if (key == "max_dry_factor") cfg.engine.max_dry_factor = std::stoi(value);
      else if (key == "m_general") cfg.m_general = std::stoi(value);
      else if (key == "sweep_values") cfg.sweep_values = std::stoi(value);
      else if (key == "pca_k_max") cfg.pca_k_max = std::stoi(value);
      else if (key == "noise_rel") cfg.noise_rel = std::stod(value);
      else if (key == "term_complexity_cap") cfg.term_complexity_cap = std::stoi(value);
      else if (key == "era_budget_cap") cfg.era_budget_cap = std::stoull(value);
      else throw UsageError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw UsageError("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_text(buf.str());
}

}  // namespace physlaw
