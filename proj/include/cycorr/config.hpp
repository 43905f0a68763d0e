#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cycorr/crf.hpp"
#include "cycorr/matcher.hpp"

namespace cycorr {

struct PipelineConfig {
  MatcherConfig matcher;
  CrfConfig crf;                    // background_energy is filled in per pair
  double coverage_threshold = 0.5;  // image mask -> patch grid
  double saliency_threshold = 0.5;

  void validate() const;
};

enum class PairMode : std::uint8_t { Intra, Inter };
std::string_view to_string(PairMode m);
PairMode parse_pair_mode(std::string_view text);

struct RunSettings {
  PipelineConfig pipeline;
  std::filesystem::path dataset;  // index file
  PairMode mode = PairMode::Intra;
  std::filesystem::path out_dir = ".";
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::size_t histogram_bins = 20;
};

/*
 * Recognised keys (config file lines are `key = value`, '#' starts a comment):
 *
 *   dataset, mode (intra|inter), out_dir, workers, histogram_bins, seed,
 *   variant (full|forward-only|backward-only), tau_qt, tau_tr, k_q, k_t,
 *   kmeans_max_iters, normalize_descriptors, ablation_background_energy,
 *   coverage_threshold, saliency_threshold,
 *   crf_iters, crf_gaussian_sxy, crf_gaussian_w, crf_bilateral_sxy,
 *   crf_bilateral_srgb, crf_bilateral_w, crf_unary_scale, crf_exact_pixel_limit
 */
void apply_setting(RunSettings& settings, std::string_view key, std::string_view value);

// Applies every `key=value` line of a config file on top of settings.
void load_config_file(RunSettings& settings, const std::filesystem::path& path);

// Splits "key=value"; throws ConfigError when there is no '='.
std::pair<std::string, std::string> split_override(std::string_view text);

std::vector<std::string> known_setting_keys();

}  // namespace cycorr
