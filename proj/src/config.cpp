#include "cycorr/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, v));
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

using Setter = std::function<void(RunSettings&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"dataset", [](RunSettings& s, auto, auto v) { s.dataset = std::string(v); }},
      {"mode", [](RunSettings& s, auto, auto v) { s.mode = parse_pair_mode(v); }},
      {"out_dir", [](RunSettings& s, auto, auto v) { s.out_dir = std::string(v); }},
      {"workers", [](RunSettings& s, auto k, auto v) { s.workers = to_size(k, v); }},
      {"histogram_bins", [](RunSettings& s, auto k, auto v) { s.histogram_bins = to_size(k, v); }},
      {"seed", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.seed = to_size(k, v); }},
      {"variant", [](RunSettings& s, auto, auto v) { s.pipeline.matcher.variant = parse_variant(v); }},
      {"tau_qt", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.tau_qt = to_double(k, v); }},
      {"tau_tr", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.tau_tr = to_double(k, v); }},
      {"k_q", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.k_q = to_size(k, v); }},
      {"k_t", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.k_t = to_size(k, v); }},
      {"kmeans_max_iters", [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.max_iters = to_size(k, v); }},
      {"normalize_descriptors",
       [](RunSettings& s, auto k, auto v) { s.pipeline.matcher.normalize_descriptors = to_bool(k, v); }},
      {"ablation_background_energy",
       [](RunSettings& s, auto k, auto v) {
         if (v == "auto" || v.empty())
           s.pipeline.matcher.ablation_background_energy.reset();
         else
           s.pipeline.matcher.ablation_background_energy = to_double(k, v);
       }},
      {"coverage_threshold", [](RunSettings& s, auto k, auto v) { s.pipeline.coverage_threshold = to_double(k, v); }},
      {"saliency_threshold", [](RunSettings& s, auto k, auto v) { s.pipeline.saliency_threshold = to_double(k, v); }},
      {"crf_iters",
       [](RunSettings& s, auto k, auto v) { s.pipeline.crf.iterations = static_cast<int>(to_size(k, v)); }},
      {"crf_gaussian_sxy", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.gaussian_sxy = to_double(k, v); }},
      {"crf_gaussian_w", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.gaussian_w = to_double(k, v); }},
      {"crf_bilateral_sxy", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.bilateral_sxy = to_double(k, v); }},
      {"crf_bilateral_srgb", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.bilateral_srgb = to_double(k, v); }},
      {"crf_bilateral_w", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.bilateral_w = to_double(k, v); }},
      {"crf_unary_scale", [](RunSettings& s, auto k, auto v) { s.pipeline.crf.unary_scale = to_double(k, v); }},
      {"crf_exact_pixel_limit",
       [](RunSettings& s, auto k, auto v) { s.pipeline.crf.exact_pixel_limit = to_size(k, v); }},
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  matcher.validate();
  crf.validate();
  if (!(coverage_threshold > 0.0 && coverage_threshold <= 1.0))
    throw ConfigError("coverage_threshold must lie in (0, 1]");
  if (!(saliency_threshold >= 0.0 && saliency_threshold < 1.0))
    throw ConfigError("saliency_threshold must lie in [0, 1)");
}

std::string_view to_string(PairMode m) { return m == PairMode::Intra ? "intra" : "inter"; }

PairMode parse_pair_mode(std::string_view text) {
  if (text == "intra") return PairMode::Intra;
  if (text == "inter") return PairMode::Inter;
  throw ConfigError(fmt::format("unknown pair mode '{}'", text));
}

void apply_setting(RunSettings& settings, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(fmt::format("unknown setting '{}'", key));
  it->second(settings, key, value);
}

std::pair<std::string, std::string> split_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", text));
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

void load_config_file(RunSettings& settings, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    try {
      const auto [k, v] = split_override(body);
      apply_setting(settings, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
}

std::vector<std::string> known_setting_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace cycorr
