#include "cycorr/crf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>

#include "cycorr/errors.hpp"
#include "cycorr/matrix.hpp"
#include "cycorr/permutohedral.hpp"

namespace cycorr {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> inverse_sqrt(std::vector<double> v) {
  for (double& x : v) x = x > 0.0 ? 1.0 / std::sqrt(x) : 0.0;
  return v;
}

// Applies v -> sum_m w_m * N_m^{-1/2} K_m N_m^{-1/2} v, where K_m is a kernel
// matrix over all pixel pairs (self included) and N_m its row sums.
class PairwiseOperator {
 public:
  virtual ~PairwiseOperator() = default;
  virtual std::vector<double> apply(std::span<const double> v) const = 0;
};

class ExactPairwise final : public PairwiseOperator {
 public:
  ExactPairwise(const RgbImage& rgb, const CrfConfig& cfg) : n_(rgb.pixel_count()), combined_(n_, n_) {
    const std::uint32_t w = rgb.width;
    auto add_kernel = [&](double weight, double sxy, std::optional<double> srgb) {
      if (weight == 0.0) return;
      Matrix k(n_, n_);
      std::vector<double> row_sum(n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        const double yi = double(i / w), xi = double(i % w);
        const std::uint8_t* ci = rgb.pixels.data() + 3 * i;
        for (std::size_t j = i; j < n_; ++j) {
          const double dy = yi - double(j / w), dx = xi - double(j % w);
          double e = (dx * dx + dy * dy) / (2.0 * sxy * sxy);
          if (srgb) {
            const std::uint8_t* cj = rgb.pixels.data() + 3 * j;
            double c2 = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
              const double dc = double(ci[ch]) - double(cj[ch]);
              c2 += dc * dc;
            }
            e += c2 / (2.0 * *srgb * *srgb);
          }
          const double kv = std::exp(-e);
          k(i, j) = kv;
          k(j, i) = kv;
        }
      }
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) row_sum[i] += k(i, j);
      const auto inv = inverse_sqrt(row_sum);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) combined_(i, j) += weight * inv[i] * k(i, j) * inv[j];
    };
    add_kernel(cfg.gaussian_w, cfg.gaussian_sxy, std::nullopt);
    add_kernel(cfg.bilateral_w, cfg.bilateral_sxy, cfg.bilateral_srgb);
  }

  std::vector<double> apply(std::span<const double> v) const override {
    std::vector<double> out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = combined_.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) s += row[j] * v[j];
      out[i] = s;
    }
    return out;
  }

 private:
  std::size_t n_;
  Matrix combined_;
};

// Spatial Gaussian filtered separably (truncated at 6 sigma), bilateral
// kernel approximated on the permutohedral lattice.
class LatticePairwise final : public PairwiseOperator {
 public:
  LatticePairwise(const RgbImage& rgb, const CrfConfig& cfg)
      : h_(rgb.height), w_(rgb.width), gaussian_w_(cfg.gaussian_w), bilateral_w_(cfg.bilateral_w) {
    const std::size_t n = rgb.pixel_count();
    const std::vector<double> ones(n, 1.0);
    if (gaussian_w_ > 0.0) {
      const int radius = static_cast<int>(std::ceil(6.0 * cfg.gaussian_sxy));
      taps_.resize(static_cast<std::size_t>(radius) + 1);
      for (int t = 0; t <= radius; ++t)
        taps_[static_cast<std::size_t>(t)] = std::exp(-double(t * t) / (2.0 * cfg.gaussian_sxy * cfg.gaussian_sxy));
      gaussian_norm_ = inverse_sqrt(separable(ones));
    }
    if (bilateral_w_ > 0.0) {
      std::vector<double> features(n * 5);
      for (std::size_t i = 0; i < n; ++i) {
        features[i * 5 + 0] = double(i % w_) / cfg.bilateral_sxy;
        features[i * 5 + 1] = double(i / w_) / cfg.bilateral_sxy;
        for (int ch = 0; ch < 3; ++ch)
          features[i * 5 + 2 + static_cast<std::size_t>(ch)] = double(rgb.pixels[3 * i + static_cast<std::size_t>(ch)]) / cfg.bilateral_srgb;
      }
      lattice_.emplace(features, n, 5);
      bilateral_norm_ = inverse_sqrt(lattice_->filter(ones, 1));
    }
  }

  std::vector<double> apply(std::span<const double> v) const override {
    const std::size_t n = v.size();
    std::vector<double> out(n, 0.0);
    std::vector<double> tmp(n);
    if (gaussian_w_ > 0.0) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = gaussian_norm_[i] * v[i];
      const auto f = separable(tmp);
      for (std::size_t i = 0; i < n; ++i) out[i] += gaussian_w_ * gaussian_norm_[i] * f[i];
    }
    if (bilateral_w_ > 0.0) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = bilateral_norm_[i] * v[i];
      const auto f = lattice_->filter(tmp, 1);
      for (std::size_t i = 0; i < n; ++i) out[i] += bilateral_w_ * bilateral_norm_[i] * f[i];
    }
    return out;
  }

 private:
  std::vector<double> separable(std::span<const double> v) const {
    const int radius = static_cast<int>(taps_.size()) - 1;
    const int h = static_cast<int>(h_), w = static_cast<int>(w_);
    std::vector<double> rows(v.size(), 0.0), out(v.size(), 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int t = std::max(-radius, -x); t <= std::min(radius, w - 1 - x); ++t)
          s += taps_[static_cast<std::size_t>(std::abs(t))] * v[static_cast<std::size_t>(y * w + x + t)];
        rows[static_cast<std::size_t>(y * w + x)] = s;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int t = std::max(-radius, -y); t <= std::min(radius, h - 1 - y); ++t)
          s += taps_[static_cast<std::size_t>(std::abs(t))] * rows[static_cast<std::size_t>((y + t) * w + x)];
        out[static_cast<std::size_t>(y * w + x)] = s;
      }
    return out;
  }

  std::uint32_t h_, w_;
  double gaussian_w_, bilateral_w_;
  std::vector<double> taps_;
  std::vector<double> gaussian_norm_, bilateral_norm_;
  std::optional<PermutohedralLattice> lattice_;
};

}  // namespace

void CrfConfig::validate() const {
  if (iterations < 0) throw ConfigError("CRF iterations must be non-negative");
  if (gaussian_w < 0.0 || bilateral_w < 0.0) throw ConfigError("CRF kernel weights must be non-negative");
  if (gaussian_w > 0.0 && !(gaussian_sxy > 0.0)) throw ConfigError("gaussian_sxy must be positive");
  if (bilateral_w > 0.0 && !(bilateral_sxy > 0.0 && bilateral_srgb > 0.0))
    throw ConfigError("bilateral scales must be positive");
  if (!std::isfinite(background_energy)) throw ConfigError("background energy must be finite");
  if (!(unary_scale > 0.0 && std::isfinite(unary_scale))) throw ConfigError("unary scale must be positive");
}

UnaryEnergies unaries_from_scores(std::span<const double> score_map, std::uint32_t height,
                                  std::uint32_t width, double background_energy) {
  if (score_map.size() != std::size_t{height} * width) throw DimensionError("score map size mismatch");
  UnaryEnergies u;
  u.height = height;
  u.width = width;
  u.foreground.resize(score_map.size());
  u.background.assign(score_map.size(), -background_energy);
  for (std::size_t i = 0; i < score_map.size(); ++i) {
    if (!std::isfinite(score_map[i])) throw DataError("score map contains non-finite values");
    u.foreground[i] = -score_map[i];
  }
  return u;
}

MeanFieldResult mean_field(std::span<const double> score_map, const RgbImage& rgb, const CrfConfig& config,
                           bool keep_history, CrfBackend backend) {
  config.validate();
  if (score_map.size() != rgb.pixel_count()) throw DimensionError("score map and image sizes differ");
  if (rgb.pixels.size() != rgb.pixel_count() * 3) throw DimensionError("RGB buffer size mismatch");
  const std::size_t n = rgb.pixel_count();
  const UnaryEnergies unary = unaries_from_scores(score_map, rgb.height, rgb.width, config.background_energy);

  // Everything is tracked as the foreground-minus-background logit.
  std::vector<double> unary_gap(n), logit(n);
  for (std::size_t i = 0; i < n; ++i) {
    unary_gap[i] = config.unary_scale * (unary.background[i] - unary.foreground[i]);
    logit[i] = unary_gap[i];
  }

  MeanFieldResult res;
  auto record = [&] {
    if (!keep_history) return;
    std::vector<double> fg(n);
    for (std::size_t i = 0; i < n; ++i) fg[i] = sigmoid(logit[i]);
    res.history.push_back(std::move(fg));
  };
  record();

  if (config.iterations > 0 && (config.gaussian_w > 0.0 || config.bilateral_w > 0.0)) {
    std::unique_ptr<PairwiseOperator> pairwise;
    const bool exact = backend == CrfBackend::Exact ||
                       (backend == CrfBackend::Auto && n <= config.exact_pixel_limit);
    if (exact)
      pairwise = std::make_unique<ExactPairwise>(rgb, config);
    else
      pairwise = std::make_unique<LatticePairwise>(rgb, config);

    std::vector<double> agreement(n);
    for (int it = 0; it < config.iterations; ++it) {
      // Q_fg - Q_bg per pixel
      for (std::size_t i = 0; i < n; ++i) agreement[i] = 2.0 * sigmoid(logit[i]) - 1.0;
      const auto message = pairwise->apply(agreement);
      for (std::size_t i = 0; i < n; ++i) logit[i] = unary_gap[i] + message[i];
      record();
    }
  } else {
    for (int it = 0; it < config.iterations; ++it) record();
  }

  res.mask = BinaryMask(rgb.height, rgb.width, Resolution::Image);
  res.foreground.resize(n);
  res.background.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.foreground[i] = sigmoid(logit[i]);
    res.background[i] = sigmoid(-logit[i]);
    res.mask.bits[i] = logit[i] > 0.0 ? 1 : 0;
  }
  return res;
}

BinaryMask refine(std::span<const double> score_map, const RgbImage& rgb, const CrfConfig& config) {
  return mean_field(score_map, rgb, config).mask;
}

}  // namespace cycorr
