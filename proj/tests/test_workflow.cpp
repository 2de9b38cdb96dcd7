#include <doctest.h>

#include "physlaw/parser.hpp"
#include "physlaw/workflow.hpp"

#include <filesystem>
#include <fstream>

using namespace physlaw;

namespace {

RunConfig small_config(uint64_t seed, std::vector<std::string> exps, int trials,
                       const std::string& dir) {
  RunConfig cfg;
  cfg.master_seed = seed;
  cfg.max_trials = trials;
  cfg.experiments = std::move(exps);
  cfg.output_dir = dir;
  cfg.checkpoint_every = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config round-trips through the key=value format") {
  RunConfig cfg;
  cfg.master_seed = 99;
  cfg.max_trials = 42;
  cfg.experiments = {"free_fall", "uniform_motion"};
  cfg.engine.gamma = 0.25;
  cfg.policy.chi2_confidence = 0.995;
  const RunConfig back = RunConfig::from_text(cfg.to_text());
  CHECK(back.master_seed == 99);
  CHECK(back.max_trials == 42);
  CHECK(back.experiments == cfg.experiments);
  CHECK(back.engine.gamma == 0.25);
  CHECK(back.policy.chi2_confidence == 0.995);
  CHECK(back.to_text() == cfg.to_text());
  CHECK_THROWS_AS(RunConfig::from_text("nonsense_key = 1"), UsageError);
}

TEST_CASE("uniform motion trials discover a velocity-like concept") {
  DiscoveryWorkflow wf(small_config(7, {"uniform_motion"}, 4, "/tmp/physlaw_wf1"));
  double total_reward = 0;
  for (int i = 0; i < 4; ++i) total_reward += wf.run_trial().reward;
  CHECK(total_reward > 0);
  bool velocity = false;
  for (const ConceptDef* c : wf.kb().concepts())
    velocity |= c->trial > 0 && concept_category(*c, wf.kb()) == "velocity-like";
  CHECK(velocity);
  // and the knowledge was recorded as at least one specific law
  CHECK(wf.kb().law_count() >= 1);
}

TEST_CASE("classification distinguishes invariant, intrinsic and dependent constants") {
  DiscoveryWorkflow wf(small_config(3, {}, 0, "/tmp/physlaw_wf2"));
  // a_z in free fall: invariant under every sweep -> universal-constant path
  const auto az = wf.classify_law(LawKind::Conserved,
                                  parse_expr("D[D[posz[1]]/D[t]]/D[t]"), "free_fall");
  CHECK(az.cls == LawClass::ParameterIndependent);
  CHECK(az.constant_invariant);

  // the static spring length in the vertical rig moves only with the ball
  const auto mass = wf.classify_law(LawKind::Conserved, parse_expr("length[3]"),
                                    "spring_ball_vertical");
  CHECK(mass.cls == LawClass::ObjectIntrinsic);
  REQUIRE(mass.intrinsic_objects.size() == 1);
  CHECK(mass.intrinsic_objects[0] == "ball1");

  // the resting z-position is a parameter-dependent coincidence: it stops
  // being constant as soon as the offset parameter moves
  const auto dep = wf.classify_law(LawKind::Conserved, parse_expr("posz[1]"),
                                   "spring_ball_vertical");
  CHECK(dep.cls == LawClass::ParameterDependent);
}

TEST_CASE("free fall after a velocity concept yields the universal constant") {
  DiscoveryWorkflow wf(small_config(11, {"uniform_motion", "free_fall", "projectile"}, 14,
                                    "/tmp/physlaw_wf3"));
  for (int i = 0; i < 14; ++i) wf.run_trial();
  bool universal = false;
  for (const ConceptDef* c : wf.kb().concepts()) {
    if (c->kind != ConceptKind::UniversalConstant) continue;
    PhysObject none;
    const MeasuredValue v = wf.kb().intrinsic_value(*c, none);
    if (v.is_const() && std::abs(std::abs(v.mean()) - 9.8) < 0.2) universal = true;
  }
  CHECK(universal);
}

TEST_CASE("zero-trial runs leave the kb untouched") {
  RunConfig cfg = small_config(5, {"free_fall"}, 0, "/tmp/physlaw_wf4");
  DiscoveryWorkflow wf(cfg);
  const std::size_t before = wf.kb().concept_count();
  const RunSummary s = wf.run_discovery();
  CHECK(s.trials == 0);
  CHECK(wf.kb().concept_count() == before);
  CHECK(wf.kb().law_count() == 0);
  CHECK(std::filesystem::exists(cfg.output_dir + "/kb.txt"));
  std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("identical config and seed reproduce identical trials and kb") {
  auto run = [&](const std::string& dir) {
    DiscoveryWorkflow wf(small_config(21, {"uniform_motion", "free_fall"}, 6, dir));
    std::string lines;
    for (int i = 0; i < 6; ++i) lines += wf.run_trial().to_line() + "\n";
    return std::make_pair(lines, wf.kb().to_text());
  };
  const auto a = run("/tmp/physlaw_wf5a");
  const auto b = run("/tmp/physlaw_wf5b");
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("monotone knowledge and reward accounting over a short run") {
  DiscoveryWorkflow wf(small_config(13, {"uniform_motion", "free_fall", "collision_1d"}, 10,
                                    "/tmp/physlaw_wf6"));
  std::size_t last_concepts = wf.kb().concept_count();
  double reward_sum = 0;
  std::size_t delta_sum = 0;
  for (int i = 0; i < 10; ++i) {
    const TrialRecord rec = wf.run_trial();
    // concepts never vanish; laws can only be evicted by covering laws
    CHECK(wf.kb().concept_count() >= last_concepts);
    last_concepts = wf.kb().concept_count();
    reward_sum += rec.reward;
    for (const auto& d : rec.deltas)
      delta_sum += d.rfind("evicted", 0) == 0 ? 0 : 1;
  }
  CHECK(reward_sum == doctest::Approx(double(delta_sum)));
}

TEST_CASE("committed laws re-validate from their recorded provenance") {
  DiscoveryWorkflow wf(small_config(17, {"uniform_motion", "free_fall"}, 8,
                                    "/tmp/physlaw_wf7"));
  for (int i = 0; i < 8; ++i) wf.run_trial();
  REQUIRE(wf.kb().law_count() >= 1);
  for (const LawDef& l : wf.kb().laws()) {
    for (const auto& [exp, prov] : l.origins) {
      const ExperimentSpec* spec = find_experiment(exp);
      REQUIRE(spec != nullptr);
      std::map<std::string, double> params;
      for (const auto& [k, v] : prov.params)
        if (spec->find_param(k)) params[k] = v;
      const ExperimentData d = simulate(*spec, params, prov.seed, wf.kb().policy());
      CHECK(wf.kb().validate_law(l, exp, &d));
    }
  }
}

TEST_CASE("checkpoint resume continues identically to an uninterrupted run") {
  const RunConfig cfg = small_config(29, {"uniform_motion", "free_fall"}, 10,
                                     "/tmp/physlaw_wf8");
  // uninterrupted
  DiscoveryWorkflow full(cfg);
  for (int i = 0; i < 10; ++i) full.run_trial();

  // interrupted after 5 trials, resumed from the checkpoint text
  DiscoveryWorkflow first(cfg);
  for (int i = 0; i < 5; ++i) first.run_trial();
  const std::string ck = first.checkpoint_text();
  DiscoveryWorkflow resumed(cfg, ck);
  CHECK(resumed.trial_index() == 5);
  for (int i = 0; i < 5; ++i) resumed.run_trial();

  CHECK(resumed.kb().to_text() == full.kb().to_text());
}

TEST_CASE("run_discovery writes the run directory artifacts") {
  const RunConfig cfg = small_config(31, {"uniform_motion", "free_fall"}, 6,
                                     "/tmp/physlaw_wf9");
  DiscoveryWorkflow wf(cfg);
  const RunSummary s = wf.run_discovery();
  CHECK(s.trials <= 6);
  CHECK(std::filesystem::exists(cfg.output_dir + "/config.txt"));
  CHECK(std::filesystem::exists(cfg.output_dir + "/trials.log"));
  CHECK(std::filesystem::exists(cfg.output_dir + "/kb.txt"));
  CHECK(std::filesystem::exists(cfg.output_dir + "/summary.txt"));
  CHECK(std::filesystem::exists(cfg.output_dir + "/checkpoint.txt"));
  // the config echo is verbatim
  std::ifstream f(cfg.output_dir + "/config.txt");
  std::ostringstream buf;
  buf << f.rdbuf();
  CHECK(buf.str() == cfg.to_text());
  std::filesystem::remove_all(cfg.output_dir);
}
