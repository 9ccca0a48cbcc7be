#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "orbitfilter/error.hpp"
#include "orbitfilter/models.hpp"
#include "orbitfilter/pipeline.hpp"
#include "orbitfilter/report.hpp"

using namespace orbitfilter;

namespace {

LinkParams table_link() {
  const std::array<CalibrationPoint, 2> pts{{{420, 3.96}, {272, 2.61}}};
  return calibrate(pts).params;
}

// Labels only; the pixels are never looked at when predictions are supplied.
std::vector<LabeledImage> labelled(std::size_t artificial, std::size_t natural) {
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < artificial; ++i) out.push_back({Tensor({1}), Label::Artificial, "a"});
  for (std::size_t i = 0; i < natural; ++i) out.push_back({Tensor({1}), Label::Natural, "n"});
  return out;
}

std::vector<Label> truth_of(const std::vector<LabeledImage>& set) {
  std::vector<Label> out;
  for (const auto& s : set) out.push_back(s.label);
  return out;
}

}  // namespace

TEST(BentPipe, SendsEverythingWithNoEdgeTime) {
  const auto test = labelled(273, 147);
  const RunReport r = run_bent_pipe(test, table_link());
  EXPECT_EQ(r.n_transmitted, 420u);
  EXPECT_EQ(r.edge_time_s, 0.0);
  EXPECT_FALSE(r.metrics.has_value());
  EXPECT_NEAR(r.transmission_time_s, 3.96, 1e-12);
  EXPECT_EQ(r.total_s, r.transmission_time_s);
  EXPECT_EQ(format_fixed(r.total_s, 2), "3.96");
}

TEST(BentPipe, SingleImageCostsAPlusB) {
  const LinkParams link{0.3, 0.02, 0.0, 0};
  EXPECT_DOUBLE_EQ(run_bent_pipe(labelled(1, 0), link).total_s, 0.32);
}

TEST(EdgeFilter, OracleClassifierSendsExactlyTheArtificialImages) {
  const auto test = labelled(30, 70);
  const RunReport r = run_edge_filter(test, truth_of(test), "oracle", 1000, table_link(), 1e6);
  EXPECT_EQ(r.n_transmitted, 30u);
  ASSERT_TRUE(r.metrics);
  EXPECT_EQ(r.metrics->recall, 1.0);
  EXPECT_EQ(r.metrics->precision, 1.0);
  EXPECT_DOUBLE_EQ(r.edge_time_s, 100 * 1000 / 1e6);
}

TEST(EdgeFilter, ConstantNaturalSendsNothing) {
  const auto test = labelled(30, 70);
  const std::vector<Label> none(test.size(), Label::Natural);
  const RunReport r = run_edge_filter(test, none, "never", 1000, table_link(), 1e6);
  EXPECT_EQ(r.n_transmitted, 0u);
  EXPECT_EQ(r.transmission_time_s, 0.0);
  EXPECT_EQ(r.metrics->recall, 0.0);
}

TEST(EdgeFilter, ConservationAndFilterDominance) {
  Rng rng(3, "scenarios");
  const LinkParams link = table_link();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t art = rng.below(60), nat = 1 + rng.below(60);
    const auto test = labelled(art, nat);
    std::vector<Label> pred;
    for (std::size_t i = 0; i < test.size(); ++i) pred.push_back(rng.below(2) ? Label::Artificial : Label::Natural);
    const std::size_t macs = 1 + rng.below(5'000'000);
    const double rate = rng.uniform(1e8, 1e10);
    const RunReport e = run_edge_filter(test, pred, "m", macs, link, rate);
    const RunReport b = run_bent_pipe(test, link);
    const auto rejected = static_cast<std::size_t>(std::count(pred.begin(), pred.end(), Label::Natural));
    EXPECT_EQ(e.n_transmitted + rejected, e.n_input);
    EXPECT_EQ(e.n_transmitted, e.metrics->tp + e.metrics->fp);
    EXPECT_LE(e.transmission_time_s, b.transmission_time_s);
    if (rejected > 0) { EXPECT_LT(e.transmission_time_s, b.transmission_time_s); }
    EXPECT_EQ(e.total_s, e.edge_time_s + e.transmission_time_s);

    // Break-even: with at least one image sent both modes pay the session
    // latency, so edge filtering wins iff its compute is cheaper than the
    // transmission it saves.
    if (e.n_transmitted > 0) {
      const double saved = link.per_image_s * static_cast<double>(e.n_input - e.n_transmitted);
      const bool wins = e.total_s < b.total_s;
      const double margin = std::fabs(e.edge_time_s - saved);
      if (margin > 1e-9) { EXPECT_EQ(wins, e.edge_time_s < saved) << "trial " << trial; }
    }
  }
}

TEST(EdgeFilter, RejectsUntrainedModelAndBadRate) {
  const auto test = labelled(1, 1);
  Model m = build_msnet();
  EXPECT_THROW(run_edge_filter(test, m, table_link(), 1e9), Error);
  const std::vector<Label> pred(2, Label::Natural);
  EXPECT_THROW(run_edge_filter(test, pred, "x", 1, table_link(), 0.0), ConfigError);
}

TEST(EdgeFilter, DefaultRatePutsMsNetAtReferenceTime) {
  const double t = 420.0 * static_cast<double>(mac_count(build_msnet()).total) / default_mac_rate();
  EXPECT_NEAR(t, 0.64, 1e-12);
  EXPECT_EQ(format_fixed(t, 2), "0.64");
}

TEST(Report, TotalIsEdgePlusTransmissionForEveryTableColumn) {
  const LinkParams link = table_link();
  struct Column {
    const char* name;
    double edge, transmission, total;
  };
  const std::array<Column, 5> cols{{{"simple_cnn", 0.81, 2.66, 3.47},
                                    {"mobilenet_v2_lite", 1.18, 2.65, 3.83},
                                    {"shufflenet_lite", 1.02, 2.65, 3.67},
                                    {"msnet", 0.64, 2.61, 3.25},
                                    {"", 0.0, 3.96, 3.96}}};
  for (const Column& c : cols) {
    const RunReport r = make_report(*c.name ? RunMode::EdgeFilter : RunMode::BentPipe, c.name, 420,
                                    272, c.edge, c.transmission, std::nullopt, link);
    EXPECT_EQ(r.total_s, c.edge + c.transmission);
    EXPECT_EQ(format_fixed(r.total_s, 2), format_fixed(c.total, 2)) << c.name;
  }
}

TEST(Compare, SavingAgainstBentPipe) {
  const LinkParams link = table_link();
  std::vector<RunReport> rows{
      make_report(RunMode::BentPipe, "", 420, 420, 0.0, 3.96, std::nullopt, link),
      make_report(RunMode::EdgeFilter, "msnet", 420, 272, 0.64, 2.61, metrics_from_counts(1, 0, 0, 0), link)};
  const ComparisonTable t = compare(rows);
  ASSERT_TRUE(t.time_saved_pct[1]);
  EXPECT_NEAR(*t.time_saved_pct[1], 100.0 * (3.96 - 3.25) / 3.96, 1e-12);
  EXPECT_EQ(format_fixed(*t.time_saved_pct[1], 1), "17.9");
  EXPECT_NEAR(*t.time_saved_pct[0], 0.0, 0.0);
}

TEST(Compare, SingleRowHasNoDeltasAndIdenticalRowsZero) {
  const LinkParams link = table_link();
  const RunReport b = make_report(RunMode::BentPipe, "", 10, 10, 0.0, 1.0, std::nullopt, link);
  EXPECT_FALSE(compare({b}).time_saved_pct[0].has_value());
  const ComparisonTable two = compare({b, b});
  EXPECT_EQ(*two.time_saved_pct[1], 0.0);
}

TEST(Compare, RejectsInconsistentRows) {
  const LinkParams link = table_link();
  LinkParams other = link;
  other.per_image_s *= 2;
  const RunReport a = make_report(RunMode::BentPipe, "", 10, 10, 0.0, 1.0, std::nullopt, link);
  const RunReport b = make_report(RunMode::BentPipe, "", 11, 11, 0.0, 1.0, std::nullopt, link);
  const RunReport c = make_report(RunMode::BentPipe, "", 10, 10, 0.0, 1.0, std::nullopt, other);
  EXPECT_THROW(compare({a, b}), Error);
  EXPECT_THROW(compare({a, c}), Error);
  EXPECT_THROW(compare({}), Error);
}

TEST(Compare, ForcedTableCountsReproduceTransmissionRow) {
  // Oracle-stub predictions with exactly the table's accept counts.
  const LinkParams link = table_link();
  const std::array<std::pair<std::size_t, double>, 5> cols{{{420, 3.96}, {276, 2.66}, {282, 2.65}, {279, 2.65}, {272, 2.61}}};
  for (const auto& [accepted, seconds] : cols) {
    const auto test = labelled(accepted, 420 - accepted);
    const RunReport r = run_edge_filter(test, truth_of(test), "stub", 0, link, 1.0);
    EXPECT_EQ(r.n_transmitted, accepted);
    EXPECT_LT(std::fabs(r.transmission_time_s - seconds) / seconds, 0.02) << accepted;
  }
}
