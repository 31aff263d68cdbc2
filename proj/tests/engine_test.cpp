#include <gtest/gtest.h>

#include <random>

#include "cvanet/engine.hpp"
#include "cvanet/error.hpp"
#include "cvanet/pipeline.hpp"
#include "support.hpp"

namespace cvanet {
namespace {

RunConfig lowest_id_run(const Scenario& s, double range = 100.0) {
  RunConfig cfg;
  cfg.scenario = &s;
  cfg.cluster.algorithm = Algorithm::kLowestId;
  cfg.cluster.range = range;
  return cfg;
}

TEST(RunSimulation, TrioTwoStaticSteps) {
  const Scenario s = test::trio_scenario(2);
  std::vector<TimestepRecord> records;
  const RunResult r = run_simulation(lowest_id_run(s), [&](const TimestepRecord& rec) { records.push_back(rec); });
  EXPECT_EQ(r.n_events, 2u);
  ASSERT_EQ(records.size(), 6u);
  for (int k = 0; k < 2; ++k) {
    const auto& a = records[3 * k];
    const auto& b = records[3 * k + 1];
    const auto& c = records[3 * k + 2];
    EXPECT_EQ(a.t, k);
    EXPECT_EQ(a.role, Role::kClusterHead);
    EXPECT_EQ(a.cluster, "A");
    EXPECT_EQ(a.dist_ch, 0.0);
    EXPECT_EQ(b.role, Role::kClusterMember);
    EXPECT_EQ(b.cluster, "A");
    EXPECT_EQ(b.dist_ch, 50.0);
    EXPECT_EQ(b.degree, 1u);
    EXPECT_EQ(c.role, Role::kUnclustered);
    EXPECT_FALSE(c.cluster);
    EXPECT_FALSE(c.dist_ch);
  }
}

TEST(RunSimulation, SingleIsolatedVehicle) {
  Scenario s;
  s.timesteps.push_back(Timestep{0, {test::vehicle("A", 0, 0, 1, 0)}});
  std::vector<TimestepRecord> records;
  const RunResult r = run_simulation(lowest_id_run(s), [&](const TimestepRecord& rec) { records.push_back(rec); });
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].role, Role::kUnclustered);
  EXPECT_EQ(r.summary.avg_num_clusters, 0.0);
}

TEST(RunSimulation, CancelBeforeFirstEvent) {
  const Scenario s = test::trio_scenario(2);
  std::stop_source stop;
  stop.request_stop();
  std::size_t records = 0;
  EXPECT_THROW(run_simulation(lowest_id_run(s), [&](const TimestepRecord&) { ++records; }, {}, stop.get_token()),
               RunCancelled);
  EXPECT_EQ(records, 0u);
}

TEST(RunSimulation, CancelMidRunStopsAtNextEvent) {
  const Scenario s = test::trio_scenario(10);
  std::stop_source stop;
  std::size_t records = 0;
  EXPECT_THROW(run_simulation(
                   lowest_id_run(s), [&](const TimestepRecord&) { ++records; },
                   [&](double p) {
                     if (p >= 0.3) stop.request_stop();
                   },
                   stop.get_token()),
               RunCancelled);
  EXPECT_EQ(records, 9u);
}

TEST(RunSimulation, RejectsUnrunnableScenarioAndBadConfig) {
  Scenario dup;
  dup.timesteps.push_back(Timestep{0, {test::vehicle("A", 0, 0, 1, 0), test::vehicle("A", 1, 0, 1, 0)}});
  EXPECT_THROW(run_simulation(lowest_id_run(dup), {}), ConfigError);
  EXPECT_THROW(run_simulation(lowest_id_run(Scenario{}), {}), ConfigError);
  const Scenario trio = test::trio_scenario(1);
  EXPECT_THROW(run_simulation(lowest_id_run(trio, 0.0), {}), ConfigError);
}

TEST(RunSimulation, RecordCountOrderingAndProgress) {
  std::mt19937_64 rng(8);
  const Scenario s = test::random_walk_scenario(rng, 80, 40, 1000.0, 0.05);
  std::size_t expected = 0;
  for (const auto& ts : s.timesteps) expected += ts.vehicles.size();

  std::vector<TimestepRecord> records;
  std::vector<double> progress;
  RunConfig cfg = lowest_id_run(s, 150);
  cfg.cluster.algorithm = Algorithm::kMobility;
  const RunResult r = run_simulation(
      cfg, [&](const TimestepRecord& rec) { records.push_back(rec); }, [&](double p) { progress.push_back(p); });
  EXPECT_EQ(records.size(), expected);
  EXPECT_EQ(r.n_records, expected);
  EXPECT_EQ(r.n_events, s.timesteps.size());
  EXPECT_EQ(progress.size(), s.timesteps.size());
  EXPECT_TRUE(std::is_sorted(progress.begin(), progress.end()));
  EXPECT_EQ(progress.back(), 1.0);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& a = records[i - 1];
    const auto& b = records[i];
    ASSERT_TRUE(a.t < b.t || (a.t == b.t && a.veh < b.veh));
  }
  for (const auto& rec : records) {
    if (rec.role == Role::kClusterMember) {
      ASSERT_TRUE(rec.cluster && rec.dist_ch);
      EXPECT_LE(*rec.dist_ch, 150.0);
    } else if (rec.role == Role::kClusterHead) {
      EXPECT_EQ(rec.cluster, rec.veh);
      EXPECT_EQ(rec.dist_ch, 0.0);
    } else {
      EXPECT_FALSE(rec.cluster || rec.dist_ch);
    }
  }
}

TEST(RunSimulation, ReplayIsByteIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(21);
  const Scenario s = test::random_walk_scenario(rng, 150, 30, 1200.0, 0.05);
  ClusterConfig cfg;
  cfg.algorithm = Algorithm::kHighestDegree;
  cfg.range = 180;
  std::string first_report;
  const auto first = run_pipeline(s, cfg, ReportFormat::kJsonl, [&](std::string_view c) { first_report += c; });
  for (const unsigned threads : {1u, 4u}) {
    std::string report;
    const auto again = run_pipeline(s, cfg, ReportFormat::kJsonl, [&](std::string_view c) { report += c; }, {}, {},
                                    threads);
    EXPECT_EQ(report, first_report);
    EXPECT_EQ(again.summary_json, first.summary_json);
    EXPECT_EQ(again.graph_csv, first.graph_csv);
  }
}

TEST(RunSimulation, KeepStatesRetainsEveryStep) {
  const Scenario s = test::trio_scenario(3);
  RunConfig cfg = lowest_id_run(s);
  cfg.keep_states = true;
  const RunResult r = run_simulation(cfg, {});
  ASSERT_EQ(r.states.size(), 3u);
  EXPECT_EQ(r.states[2].roles.at("A"), Role::kClusterHead);
}

}  // namespace
}  // namespace cvanet
