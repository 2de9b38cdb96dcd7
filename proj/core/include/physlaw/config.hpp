#pragma once

#include "physlaw/measured.hpp"
#include "physlaw/recommend.hpp"

#include <string>
#include <vector>

namespace physlaw {

// Full run configuration. Every tunable named by the engine's modules is a
// key here; the file is echoed verbatim into each run directory so a run is
// reproducible from its outputs alone.
struct RunConfig {
  uint64_t master_seed = 1;
  int max_trials = 300;
  std::vector<std::string> experiments;  // empty selects the full catalog
  std::string output_dir = "physlaw_run";
  int checkpoint_every = 25;

  DataPolicy policy;
  EngineConfig engine;

  int m_general = 2;       // extra experiments required to generalize a law
  int sweep_values = 3;    // values per controllable parameter in classification
  int pca_k_max = 4;       // relations returned per pca pass
  double noise_rel = -1.0; // override catalog noise when >= 0
  int term_complexity_cap = 12;  // extension-term template complexity cap
  uint64_t era_budget_cap = 1ull << 34;  // all-era exhaustion bound

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
};

}  // namespace physlaw
