#include <gtest/gtest.h>

#include <random>

#include "cvanet/engine.hpp"
#include "cvanet/error.hpp"
#include "cvanet/postproc.hpp"
#include "support.hpp"

namespace cvanet {
namespace {

// Hand-built state: `heads` are CHs, `members` map CM -> CH, the rest unclustered.
ClusterState make_state(double t, const std::vector<std::string>& ids, const std::vector<std::string>& heads,
                        const std::map<std::string, std::string>& members) {
  ClusterState s;
  s.time = t;
  for (const auto& id : ids) s.roles[id] = Role::kUnclustered;
  for (const auto& h : heads) {
    s.roles[h] = Role::kClusterHead;
    s.members[h];
    s.idle_count[h] = 0;
    s.contention[h] = 0;
  }
  for (const auto& [m, h] : members) {
    s.roles[m] = Role::kClusterMember;
    s.cluster_of[m] = h;
    s.members[h].push_back(m);
  }
  return s;
}

Timestep timestep_for(const ClusterState& s) {
  Timestep ts;
  ts.time = s.time;
  for (const auto& [id, role] : s.roles) ts.vehicles.push_back(test::vehicle(id, 0, 0, 0, 0));
  return ts;
}

MetricsAccumulator trio_accumulator() {
  MetricsAccumulator acc;
  for (int k = 0; k < 2; ++k) {
    const auto s = make_state(k, {"A", "B", "C"}, {"A"}, {{"B", "A"}});
    acc.accumulate(s, timestep_for(s));
  }
  return acc;
}

TEST(Accumulate, TrioSeries) {
  const auto acc = trio_accumulator();
  EXPECT_EQ(acc.series(), (std::vector<SeriesPoint>{{0, 3, 1, 1, 1}, {1, 3, 1, 1, 1}}));
}

TEST(Accumulate, TrioIntervals) {
  const auto iv = trio_accumulator().intervals(1.0);
  ASSERT_EQ(iv.size(), 2u);
  EXPECT_EQ(iv[0], (IntervalStat{"A", IntervalKind::kClusterHead, 0, 2, 2.0, ""}));
  EXPECT_EQ(iv[1], (IntervalStat{"B", IntervalKind::kClusterMember, 0, 2, 2.0, "A"}));
}

TEST(Accumulate, EmptyStreamHasNoPoints) {
  MetricsAccumulator acc;
  EXPECT_TRUE(acc.series().empty());
  EXPECT_THROW(acc.finalize(1.0), UsageError);
}

TEST(Accumulate, OutOfOrderStateIsUsageError) {
  MetricsAccumulator acc;
  const auto s1 = make_state(1, {"A"}, {}, {});
  acc.accumulate(s1, timestep_for(s1));
  const auto s0 = make_state(0, {"A"}, {}, {});
  EXPECT_THROW(acc.accumulate(s0, timestep_for(s0)), UsageError);
  EXPECT_THROW(acc.accumulate(s1, timestep_for(s1)), UsageError);
}

TEST(Finalize, TrioSummary) {
  const MetricsSummary m = trio_accumulator().finalize(1.0);
  EXPECT_EQ(m.avg_ch_duration_s, 2.0);
  EXPECT_EQ(m.avg_cm_duration_s, 2.0);
  EXPECT_EQ(m.avg_ch_changes_per_vehicle, 0.0);
  EXPECT_EQ(m.avg_num_clusters, 1.0);
  EXPECT_EQ(m.avg_num_cm, 1.0);
  EXPECT_EQ(m.avg_num_unclustered, 1.0);
  EXPECT_EQ(m.n_timesteps, 2u);
  EXPECT_EQ(m.n_vehicles, 3u);
}

TEST(Finalize, ChSwitchSplitsMemberInterval) {
  MetricsAccumulator acc;
  for (int k = 0; k < 10; ++k) {
    const auto s = k < 5 ? make_state(k, {"A", "B", "D"}, {"A"}, {{"B", "A"}})
                         : make_state(k, {"A", "B", "D"}, {"A", "D"}, {{"B", "D"}});
    acc.accumulate(s, timestep_for(s));
  }
  std::vector<IntervalStat> b_intervals;
  for (const auto& iv : acc.intervals(0.5)) {
    if (iv.veh == "B") b_intervals.push_back(iv);
  }
  ASSERT_EQ(b_intervals.size(), 2u);
  EXPECT_EQ(b_intervals[0].ch, "A");
  EXPECT_EQ(b_intervals[0].n_steps, 5u);
  EXPECT_EQ(b_intervals[1].ch, "D");
  EXPECT_EQ(b_intervals[1].start_t, 5.0);
  EXPECT_EQ(b_intervals[1].duration, 2.5);
  EXPECT_EQ(acc.ch_acquisitions(), 1u);
  EXPECT_DOUBLE_EQ(acc.finalize(0.5).avg_ch_changes_per_vehicle, 1.0 / 3.0);
}

TEST(Finalize, AllUnclustered) {
  MetricsAccumulator acc;
  for (int k = 0; k < 4; ++k) {
    const auto s = make_state(k, {"A", "B", "C", "D"}, {}, {});
    acc.accumulate(s, timestep_for(s));
  }
  const auto m = acc.finalize(1.0);
  EXPECT_EQ(m.avg_ch_duration_s, 0.0);
  EXPECT_EQ(m.avg_cm_duration_s, 0.0);
  EXPECT_EQ(m.avg_num_clusters, 0.0);
  EXPECT_EQ(m.avg_num_unclustered, 4.0);
}

TEST(Finalize, DepartureClosesIntervalAndReturnCountsAsAcquisition) {
  MetricsAccumulator acc;
  const std::vector<ClusterState> states = {
      make_state(0, {"A", "B"}, {"A"}, {{"B", "A"}}),
      make_state(1, {"B"}, {}, {}),
      make_state(2, {"A", "B"}, {"A"}, {{"B", "A"}}),
  };
  for (const auto& s : states) acc.accumulate(s, timestep_for(s));
  EXPECT_EQ(acc.ch_acquisitions(), 1u);
  const auto m = acc.finalize(1.0);
  EXPECT_EQ(m.avg_ch_duration_s, 1.0);  // two one-step CH intervals
  EXPECT_EQ(m.avg_cm_duration_s, 1.0);
}

TEST(EmitGraphCsv, TrioBytes) {
  const auto acc = trio_accumulator();
  EXPECT_EQ(emit_graph_csv(acc.series()), "t,n_vehicles,n_clusters,n_cm,n_unclustered\n0,3,1,1,1\n1,3,1,1,1\n");
  EXPECT_EQ(emit_graph_csv({}), "t,n_vehicles,n_clusters,n_cm,n_unclustered\n");
  const std::vector<SeriesPoint> half = {{0.0, 1, 0, 0, 1}, {0.5, 1, 0, 0, 1}};
  EXPECT_EQ(emit_graph_csv(half), "t,n_vehicles,n_clusters,n_cm,n_unclustered\n0,1,0,0,1\n0.5,1,0,0,1\n");
}

TEST(EmitReport, EncodingsOfTrioRecords) {
  const TimestepRecord b{0, "B", 50, 0, 10, 90, 1, Role::kClusterMember, "A", 50.0};
  const TimestepRecord c{0, "C", 200, 0, 20, 270, 0, Role::kUnclustered, std::nullopt, std::nullopt};
  const std::vector<TimestepRecord> records = {c, b};  // emitted in (t, veh) order regardless
  EXPECT_EQ(emit_report(records, ReportFormat::kCsv),
            "t,veh,x,y,speed,angle,degree,role,cluster,dist_ch\n"
            "0,B,50,0,10,90,1,CM,A,50\n"
            "0,C,200,0,20,270,0,UNCLUSTERED,,\n");
  EXPECT_EQ(emit_report(records, ReportFormat::kJsonl),
            "{\"t\":0,\"veh\":\"B\",\"x\":50,\"y\":0,\"speed\":10,\"angle\":90,\"degree\":1,\"role\":\"CM\","
            "\"cluster\":\"A\",\"dist_ch\":50}\n"
            "{\"t\":0,\"veh\":\"C\",\"x\":200,\"y\":0,\"speed\":20,\"angle\":270,\"degree\":0,"
            "\"role\":\"UNCLUSTERED\",\"cluster\":null,\"dist_ch\":null}\n");
}

TEST(EmitReport, EmptyReports) {
  EXPECT_EQ(emit_report({}, ReportFormat::kCsv), "t,veh,x,y,speed,angle,degree,role,cluster,dist_ch\n");
  EXPECT_EQ(emit_report({}, ReportFormat::kJsonl), "");
}

TEST(EmitReport, EscapesAwkwardIds) {
  const TimestepRecord r{1.25, "a,\"b\"", 0, 0, 0, 0, 0, Role::kUnclustered, std::nullopt, std::nullopt};
  EXPECT_EQ(emit_report(std::vector{r}, ReportFormat::kCsv).substr(report_header(ReportFormat::kCsv).size()), "1.25,\"a,\"\"b\"\"\",0,0,0,0,0,UNCLUSTERED,,\n");
  EXPECT_NE(emit_report(std::vector{r}, ReportFormat::kJsonl).find(R"("veh":"a,\"b\"")"), std::string::npos);
}

TEST(SummaryJson, ExactFieldNames) {
  EXPECT_EQ(summary_to_json(trio_accumulator().finalize(1.0)),
            "{\n"
            "  \"avg_ch_duration_s\": 2,\n"
            "  \"avg_cm_duration_s\": 2,\n"
            "  \"avg_ch_changes_per_vehicle\": 0,\n"
            "  \"avg_num_clusters\": 1,\n"
            "  \"avg_num_cm\": 1,\n"
            "  \"avg_num_unclustered\": 1,\n"
            "  \"n_timesteps\": 2,\n"
            "  \"n_vehicles\": 3,\n"
            "  \"nominal_dt\": 1\n"
            "}\n");
}

TEST(PostprocProperties, ConservationBoundsAndIdempotence) {
  std::mt19937_64 rng(5150);
  const Scenario s = test::random_walk_scenario(rng, 100, 60, 1200.0, 0.05);
  for (const Algorithm a : {Algorithm::kLowestId, Algorithm::kHighestDegree, Algorithm::kMobility}) {
    RunConfig cfg;
    cfg.scenario = &s;
    cfg.cluster.algorithm = a;
    cfg.cluster.range = 200;
    cfg.keep_states = true;
    const RunResult run = run_simulation(cfg, {});

    MetricsAccumulator acc;
    for (std::size_t k = 0; k < run.states.size(); ++k) acc.accumulate(run.states[k], s.timesteps[k]);
    const MetricsSummary summary = acc.finalize(s.nominal_dt);
    EXPECT_EQ(summary, run.summary);

    std::size_t min_c = SIZE_MAX, max_c = 0, min_u = SIZE_MAX, max_u = 0, min_m = SIZE_MAX, max_m = 0;
    for (const auto& p : acc.series()) {
      EXPECT_EQ(p.n_clusters + p.n_cm + p.n_unclustered, p.n_vehicles);
      min_c = std::min(min_c, p.n_clusters), max_c = std::max(max_c, p.n_clusters);
      min_m = std::min(min_m, p.n_cm), max_m = std::max(max_m, p.n_cm);
      min_u = std::min(min_u, p.n_unclustered), max_u = std::max(max_u, p.n_unclustered);
    }
    EXPECT_GE(summary.avg_num_clusters, static_cast<double>(min_c));
    EXPECT_LE(summary.avg_num_clusters, static_cast<double>(max_c));
    EXPECT_GE(summary.avg_num_cm, static_cast<double>(min_m));
    EXPECT_LE(summary.avg_num_cm, static_cast<double>(max_m));
    EXPECT_GE(summary.avg_num_unclustered, static_cast<double>(min_u));
    EXPECT_LE(summary.avg_num_unclustered, static_cast<double>(max_u));
    for (const double v : {summary.avg_ch_duration_s, summary.avg_cm_duration_s, summary.avg_ch_changes_per_vehicle}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }

    // Per-vehicle step totals per role equal the interval sums.
    std::map<std::string, std::size_t> ch_steps, cm_steps;
    for (const auto& st : run.states) {
      for (const auto& [id, role] : st.roles) {
        if (role == Role::kClusterHead) ++ch_steps[id];
        if (role == Role::kClusterMember) ++cm_steps[id];
      }
    }
    std::map<std::string, std::size_t> ch_iv, cm_iv;
    for (const auto& iv : acc.intervals(1.0)) {
      (iv.kind == IntervalKind::kClusterHead ? ch_iv : cm_iv)[iv.veh] += iv.n_steps;
    }
    EXPECT_EQ(ch_iv, ch_steps);
    EXPECT_EQ(cm_iv, cm_steps);
  }
}

}  // namespace
}  // namespace cvanet
