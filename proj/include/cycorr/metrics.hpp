#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cycorr/descriptor_io.hpp"

namespace cycorr {

/// Intersection over union; two empty masks score 1.
double iou(const BinaryMask& pred, const BinaryMask& gt);

struct WeightedFbetaParams {
  double beta = 1.0;
  double sigma = 5.0;        // dependency kernel spread
  int kernel_size = 7;       // odd; dependency kernel support
  double alpha = std::log(0.5) / 5.0;  // background distance attenuation
};

/// Weighted F-beta measure of a soft foreground map against a binary ground
/// truth. Foreground errors are smoothed by a Gaussian dependency kernel
/// (background errors first take the value of their nearest foreground
/// pixel); background errors are weighted by 2 - exp(alpha * distance to the
/// foreground). Throws UndefinedMetricError on an empty ground truth.
///
/// Nearest-foreground ties are broken by the smallest row-major index.
double weighted_fbeta(std::span<const double> pred, const BinaryMask& gt,
                      const WeightedFbetaParams& params = {});
double weighted_fbeta(const BinaryMask& pred, const BinaryMask& gt, const WeightedFbetaParams& params = {});

// Squared Euclidean distance of every pixel to the nearest set pixel
// (infinity when the mask is empty).
std::vector<double> squared_distance_transform(const BinaryMask& mask);

struct MetricReport {
  std::string pair_id;
  std::string support_id;
  std::string target_id;
  std::string affordance;
  double iou = 0.0;
  double f_w_beta = 0.0;
};

struct AffordanceSummary {
  std::string affordance;
  std::size_t count = 0;
  double mean_iou = 0.0;
  double mean_f_w_beta = 0.0;
};

/// Per-affordance means, sorted by affordance label. Reports are summed in
/// pair_id order so the result does not depend on execution order.
std::vector<AffordanceSummary> aggregate(std::vector<MetricReport> reports);

// Equal-width IoU bins over [0, 1]; a value of exactly 1 lands in the last bin.
std::vector<std::size_t> iou_histogram(const std::vector<MetricReport>& reports, const std::string& affordance,
                                       std::size_t bins = 20);

void write_report_csv(std::ostream& out, const std::vector<MetricReport>& reports);
void write_summary_csv(std::ostream& out, const std::vector<AffordanceSummary>& summary);
void write_histogram_csv(std::ostream& out, const std::vector<MetricReport>& reports, std::size_t bins = 20);

}  // namespace cycorr
