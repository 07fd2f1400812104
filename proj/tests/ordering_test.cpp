// Slower statistical checks at sigma = 0.1 over 20 noise seeds.
#include <gtest/gtest.h>

#include "invgame/experiments.hpp"

namespace invgame {
namespace {

std::vector<double> column(const std::vector<ResultRow>& rows, EstimationMethod m, ObservationKind k,
                           bool position) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.method != m || r.kind != k || r.failed()) continue;
    out.push_back(position ? *r.position_error : r.d_cos);
  }
  return out;
}

TEST(Ordering, JointBeatsBaselineAtTwentySeeds) {
  MonteCarloConfig c;
  c.sigmas = {0.1};
  c.seeds = 20;
  c.master_seed = 20240;
  const auto rows = run_monte_carlo(c);

  const auto joint_partial = column(rows, EstimationMethod::kJoint, ObservationKind::kPartial, false);
  const auto base_partial = column(rows, EstimationMethod::kBaseline, ObservationKind::kPartial, false);
  ASSERT_EQ(joint_partial.size(), 20u);  // every estimate well-conditioned
  ASSERT_FALSE(base_partial.empty());
  EXPECT_LT(quantile(joint_partial, 0.5), quantile(base_partial, 0.5));

  // full-state: mean joint position error below the baseline's median
  const auto joint_full = column(rows, EstimationMethod::kJoint, ObservationKind::kFull, true);
  const auto base_full = column(rows, EstimationMethod::kBaseline, ObservationKind::kFull, true);
  ASSERT_EQ(joint_full.size(), 20u);
  ASSERT_FALSE(base_full.empty());
  double mean = 0.0;
  for (double v : joint_full) mean += v / joint_full.size();
  EXPECT_LT(mean, quantile(base_full, 0.5));
}

}  // namespace
}  // namespace invgame
