#include "cycorr/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact 1-D squared distance transform of a sampled function (lower envelope
// of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const std::size_t n = f.size();
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  auto meet = [&](std::size_t q, std::size_t p) {
    return ((f[q] + double(q) * double(q)) - (f[p] + double(p) * double(p))) / (2.0 * (double(q) - double(p)));
  };
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = meet(q, v[static_cast<std::size_t>(k)]);
    while (s <= z[static_cast<std::size_t>(k)]) {
      --k;
      s = meet(q, v[static_cast<std::size_t>(k)]);
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = kInf;
  }
  d.assign(n, kInf);
  if (k < 0) return;
  std::size_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < double(q)) ++j;
    const double off = double(q) - double(v[j]);
    d[q] = off * off + f[v[j]];
  }
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

double iou(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) throw DimensionError("IoU of masks with different sizes");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool a = pred.bits[i] != 0, b = gt.bits[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
  const std::size_t h = mask.height, w = mask.width;
  std::vector<double> grid(h * w);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = mask.bits[i] ? 0.0 : kInf;
  std::vector<double> line, out;
  for (std::size_t x = 0; x < w; ++x) {
    line.resize(h);
    for (std::size_t y = 0; y < h; ++y) line[y] = grid[y * w + x];
    edt_1d(line, out);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = out[y];
  }
  for (std::size_t y = 0; y < h; ++y) {
    line.assign(grid.begin() + static_cast<std::ptrdiff_t>(y * w), grid.begin() + static_cast<std::ptrdiff_t>((y + 1) * w));
    edt_1d(line, out);
    std::copy(out.begin(), out.end(), grid.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  return grid;
}

double weighted_fbeta(std::span<const double> pred, const BinaryMask& gt, const WeightedFbetaParams& params) {
  if (pred.size() != gt.bits.size()) throw DimensionError("prediction and ground truth sizes differ");
  if (params.kernel_size < 1 || params.kernel_size % 2 == 0) throw ConfigError("kernel size must be odd");
  if (!gt.any()) throw UndefinedMetricError("weighted F-measure is undefined for an empty ground truth");
  for (double p : pred)
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("prediction values must lie in [0,1]");

  const int h = static_cast<int>(gt.height), w = static_cast<int>(gt.width);
  const auto idx = [w](int y, int x) { return static_cast<std::size_t>(y * w + x); };
  const int half = params.kernel_size / 2;

  std::vector<double> err(pred.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(pred[i] - (gt.bits[i] ? 1.0 : 0.0));
  const std::vector<double> dist2 = squared_distance_transform(gt);

  // Background pixels the dependency kernel can reach from a foreground
  // pixel inherit the error of their nearest foreground pixel.
  std::vector<double> spread = err;
  const double reach2 = 2.0 * half * half;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = idx(y, x);
      if (gt.bits[i]) continue;
      if (dist2[i] > reach2) {
        spread[i] = 0.0;
        continue;
      }
      const int r = static_cast<int>(std::ceil(std::sqrt(dist2[i])));
      std::size_t nearest = std::numeric_limits<std::size_t>::max();
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          const std::size_t j = idx(yy, xx);
          if (!gt.bits[j]) continue;
          const double d2 = double(yy - y) * (yy - y) + double(xx - x) * (xx - x);
          if (d2 == dist2[i] && j < nearest) nearest = j;
        }
      spread[i] = err[nearest];
    }

  std::vector<double> taps(static_cast<std::size_t>(params.kernel_size));
  double tap_sum = 0.0;
  for (int t = -half; t <= half; ++t) {
    taps[static_cast<std::size_t>(t + half)] = std::exp(-double(t * t) / (2.0 * params.sigma * params.sigma));
    tap_sum += taps[static_cast<std::size_t>(t + half)];
  }
  for (double& t : taps) t /= tap_sum;

  double fg_count = 0.0, fg_weighted = 0.0, bg_weighted = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = idx(y, x);
      if (gt.bits[i]) {
        double blurred = 0.0;
        for (int dy = -half; dy <= half; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -half; dx <= half; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            blurred += taps[static_cast<std::size_t>(dy + half)] * taps[static_cast<std::size_t>(dx + half)] *
                       spread[idx(yy, xx)];
          }
        }
        fg_weighted += std::min(err[i], blurred);
        fg_count += 1.0;
      } else {
        bg_weighted += err[i] * (2.0 - std::exp(params.alpha * std::sqrt(dist2[i])));
      }
    }

  const double tp = fg_count - fg_weighted;
  const double recall = 1.0 - fg_weighted / fg_count;
  const double precision = (tp + bg_weighted) > 0.0 ? tp / (tp + bg_weighted) : 0.0;
  const double b2 = params.beta * params.beta;
  const double denom = recall + b2 * precision;
  const double q = denom > 0.0 ? (1.0 + b2) * recall * precision / denom : 0.0;
  return std::clamp(q, 0.0, 1.0);
}

double weighted_fbeta(const BinaryMask& pred, const BinaryMask& gt, const WeightedFbetaParams& params) {
  std::vector<double> soft(pred.bits.begin(), pred.bits.end());
  return weighted_fbeta(soft, gt, params);
}

std::vector<AffordanceSummary> aggregate(std::vector<MetricReport> reports) {
  std::sort(reports.begin(), reports.end(),
            [](const MetricReport& a, const MetricReport& b) { return a.pair_id < b.pair_id; });
  std::map<std::string, AffordanceSummary> groups;
  for (const auto& r : reports) {
    auto& g = groups[r.affordance];
    g.affordance = r.affordance;
    ++g.count;
    g.mean_iou += r.iou;
    g.mean_f_w_beta += r.f_w_beta;
  }
  std::vector<AffordanceSummary> out;
  for (auto& [_, g] : groups) {
    g.mean_iou /= double(g.count);
    g.mean_f_w_beta /= double(g.count);
    out.push_back(g);
  }
  return out;
}

std::vector<std::size_t> iou_histogram(const std::vector<MetricReport>& reports, const std::string& affordance,
                                       std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (const auto& r : reports) {
    if (r.affordance != affordance) continue;
    const double v = std::clamp(r.iou, 0.0, 1.0);
    counts[std::min(bins - 1, static_cast<std::size_t>(v * double(bins)))]++;
  }
  return counts;
}

void write_report_csv(std::ostream& out, const std::vector<MetricReport>& reports) {
  out << "pair_id,support_id,target_id,affordance,iou,fwb\n";
  for (const auto& r : reports)
    out << r.pair_id << ',' << r.support_id << ',' << r.target_id << ',' << r.affordance << ','
        << fixed(r.iou) << ',' << fixed(r.f_w_beta) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<AffordanceSummary>& summary) {
  out << "affordance,count,mean_iou,mean_fwb\n";
  for (const auto& s : summary)
    out << s.affordance << ',' << s.count << ',' << fixed(s.mean_iou) << ',' << fixed(s.mean_f_w_beta) << '\n';
}

void write_histogram_csv(std::ostream& out, const std::vector<MetricReport>& reports, std::size_t bins) {
  std::set<std::string> labels;
  for (const auto& r : reports) labels.insert(r.affordance);
  out << "affordance,bin_lo,bin_hi,count\n";
  for (const auto& label : labels) {
    const auto counts = iou_histogram(reports, label, bins);
    for (std::size_t b = 0; b < bins; ++b)
      out << label << ',' << fixed(double(b) / double(bins)) << ',' << fixed(double(b + 1) / double(bins)) << ','
          << counts[b] << '\n';
  }
}

}  // namespace cycorr
