#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cycorr/errors.hpp"
#include "cycorr/metrics.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace cycorr;
using cycorr::testing::Rng;

namespace {

BinaryMask mask_from(std::uint32_t h, std::uint32_t w, std::vector<std::uint8_t> bits) {
  BinaryMask m(h, w, Resolution::Image);
  m.bits = std::move(bits);
  return m;
}

BinaryMask random_mask(Rng& rng, std::uint32_t h, std::uint32_t w, double p) {
  BinaryMask m(h, w, Resolution::Image);
  for (auto& b : m.bits) b = rng.uniform() < p;
  return m;
}

std::string csv(const std::vector<AffordanceSummary>& s) {
  std::ostringstream out;
  write_summary_csv(out, s);
  return out.str();
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("IoU examples") {
    const auto a = mask_from(2, 2, {1, 1, 0, 0});
    const auto b = mask_from(2, 2, {0, 1, 1, 0});
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, mask_from(2, 2, {0, 0, 1, 1})) == 0.0);
    CHECK(iou(mask_from(2, 2, {0, 0, 0, 0}), mask_from(2, 2, {0, 0, 0, 0})) == 1.0);
    CHECK_THROWS_AS(iou(a, BinaryMask(1, 4, Resolution::Image)), DimensionError);
  }

  TEST_CASE("weighted F-beta edge cases") {
    const auto gt = mask_from(3, 3, {0, 0, 0, 0, 1, 1, 0, 1, 1});
    CHECK(weighted_fbeta(gt, gt) == doctest::Approx(1.0).epsilon(1e-12));
    // The zero-padded dependency kernel dilutes errors near the border, so an
    // empty prediction on a tiny image still earns partial credit.
    const double empty = weighted_fbeta(BinaryMask(3, 3, Resolution::Image), gt);
    CHECK(empty < 1.0);
    CHECK(empty == doctest::Approx(oracle::weighted_fbeta(std::vector<double>(9, 0.0), gt)).epsilon(1e-9));
    CHECK_THROWS_AS(weighted_fbeta(gt, BinaryMask(3, 3, Resolution::Image)), UndefinedMetricError);
    std::vector<double> bad(9, 0.5);
    bad[4] = 1.5;
    CHECK_THROWS_AS(weighted_fbeta(bad, gt), DataError);
    CHECK_THROWS_AS(weighted_fbeta(std::vector<double>(8, 0.0), gt), DimensionError);
    WeightedFbetaParams p;
    p.kernel_size = 6;
    CHECK_THROWS_AS(weighted_fbeta(gt, gt, p), ConfigError);
  }

  TEST_CASE("property: weighted F-beta matches the transcribed reference") {
    Rng rng(41);
    for (int inst = 0; inst < 40; ++inst) {
      const std::uint32_t h = 1 + rng.below(30), w = 1 + rng.below(30);
      auto gt = random_mask(rng, h, w, rng.uniform(0.05, 0.6));
      gt.bits[rng.below(h * w)] = 1;
      std::vector<double> pred(std::size_t{h} * w);
      const bool binary = inst % 2 == 0;
      for (double& v : pred) v = binary ? double(rng.uniform() < 0.4) : rng.uniform();
      const double got = weighted_fbeta(pred, gt);
      const double want = oracle::weighted_fbeta(pred, gt);
      CHECK(got >= 0.0);
      CHECK(got <= 1.0 + 1e-12);
      CHECK(std::abs(got - want) < 1e-6);
    }
  }

  TEST_CASE("property: distance transform matches brute force") {
    Rng rng(42);
    for (int inst = 0; inst < 30; ++inst) {
      const std::uint32_t h = 1 + rng.below(25), w = 1 + rng.below(25);
      const auto m = random_mask(rng, h, w, rng.uniform(0.0, 0.3));
      const auto d = squared_distance_transform(m);
      for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t c = 0; c < w; ++c) {
          double best = std::numeric_limits<double>::infinity();
          for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x)
              if (m.at(y, x)) {
                const double dy = double(y) - r, dx = double(x) - c;
                best = std::min(best, dy * dy + dx * dx);
              }
          CHECK(d[std::size_t{r} * w + c] == best);
        }
    }
  }

  TEST_CASE("aggregation is independent of report order") {
    std::vector<MetricReport> reports;
    Rng rng(43);
    for (int i = 0; i < 25; ++i)
      reports.push_back({"p" + std::to_string(i), "s", "t", i % 3 == 0 ? "cut" : "grasp", rng.uniform(), rng.uniform()});
    const auto base = csv(aggregate(reports));
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
      for (std::size_t i = reports.size() - 1; i > 0; --i)
        std::swap(reports[i], reports[rng.below(static_cast<std::uint32_t>(i + 1))]);
      CHECK(csv(aggregate(reports)) == base);
    }
    const auto s = aggregate(reports);
    REQUIRE(s.size() == 2);
    CHECK(s[0].affordance == "cut");
    CHECK(s[0].count == 9);
    CHECK(s[1].count == 16);
  }

  TEST_CASE("histogram bins") {
    std::vector<MetricReport> r{{"a", "", "", "g", 0.0, 0}, {"b", "", "", "g", 0.05, 0}, {"c", "", "", "g", 0.5, 0},
                                {"d", "", "", "g", 1.0, 0}, {"e", "", "", "h", 1.0, 0}};
    const auto h = iou_histogram(r, "g", 20);
    REQUIRE(h.size() == 20);
    CHECK(h[0] == 1);
    CHECK(h[1] == 1);
    CHECK(h[10] == 1);
    CHECK(h[19] == 1);
    CHECK(iou_histogram(r, "h", 4)[3] == 1);
    CHECK_THROWS_AS(iou_histogram(r, "g", 0), ConfigError);
  }

  TEST_CASE("CSV formats") {
    std::ostringstream report;
    write_report_csv(report, {{"s:t:grasp", "s", "t", "grasp", 0.5, 0.25}});
    CHECK(report.str() == "pair_id,support_id,target_id,affordance,iou,fwb\ns:t:grasp,s,t,grasp,0.500000,0.250000\n");
    CHECK(csv({{"grasp", 2, 0.75, 0.125}}) == "affordance,count,mean_iou,mean_fwb\ngrasp,2,0.750000,0.125000\n");
    std::ostringstream hist;
    write_histogram_csv(hist, {{"a", "", "", "g", 1.0, 0}}, 2);
    CHECK(hist.str() == "affordance,bin_lo,bin_hi,count\ng,0.000000,0.500000,0\ng,0.500000,1.000000,1\n");
  }
}
