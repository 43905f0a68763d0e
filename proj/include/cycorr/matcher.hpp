#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cycorr/descriptor_io.hpp"
#include "cycorr/grouping.hpp"
#include "cycorr/matrix.hpp"

namespace cycorr {

enum class Variant : std::uint8_t { Full, ForwardOnly, BackwardOnly };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct MatcherConfig {
  double tau_qt = 0.2;   // forward (query centroid -> target centroid) temperature
  double tau_tr = 0.02;  // backward (target centroid -> reference patch) temperature
  std::size_t k_q = 10;
  std::size_t k_t = 10;
  Variant variant = Variant::Full;
  // Score threshold for the single-direction variants, normally chosen by a
  // sweep over held-out pairs. Ignored by the full matcher.
  std::optional<double> ablation_background_energy;
  std::uint64_t seed = 0;
  bool normalize_descriptors = false;
  std::size_t max_iters = 300;

  void validate() const;
};

/// Pairwise cosine similarity between the rows of a and b, clamped to [-1, 1].
/// Throws DegenerateDescriptorError on a zero-norm row.
Matrix cosine_similarity(const Matrix& a, const Matrix& b);

// Softmax of logits / temperature along each row, with max subtraction.
Matrix row_softmax(const Matrix& logits, double temperature);

struct ForwardMatch {
  Matrix a_qt;               // K_Q x K_T, rows sum to 1
  std::vector<double> v_qt;  // column sums of a_qt; they add up to K_Q
};

struct BackwardMatch {
  Matrix a_tr;               // K_T x N_R over every reference patch
  std::vector<double> p_tq;  // mass each target centroid sends into the query mask
};

ForwardMatch forward_match(const CentroidSet& query, const CentroidSet& target, double tau_qt);

/// Matches target centroids against the full reference grid (not just the
/// query region) so that matches landing elsewhere on the support count
/// against the candidate.
BackwardMatch backward_match(const CentroidSet& target, const DescriptorGrid& reference,
                             const BinaryMask& query_mask, double tau_tr);

struct FusedScores {
  std::vector<double> s_t;        // per target centroid
  std::vector<double> score_map;  // grid resolution, 0 outside the target mask
};

FusedScores fuse_scores(const std::vector<double>& v_qt, const std::vector<double>& p_tq,
                        const CentroidSet& target);

// Score below which the refinement treats a pixel as background. Uses the
// cluster counts stored in the config.
double decision_threshold(const MatcherConfig& config);

struct MatchResult {
  Matrix a_qt;
  std::vector<double> v_qt;
  Matrix a_tr;
  std::vector<double> p_tq;
  std::vector<double> s_t;        // scores of the configured variant
  std::vector<double> score_map;  // grid resolution of the target
  std::uint32_t grid_height = 0;
  std::uint32_t grid_width = 0;
  double tau_qt = 0.0;
  double tau_tr = 0.0;
  std::size_t effective_k_q = 0;
  std::size_t effective_k_t = 0;
  Variant variant = Variant::Full;
  double background_energy = 0.0;
  CentroidSet query_set;
  CentroidSet target_set;
};

/// Full matching step: clusters the query region and the target mask, runs
/// both matching directions and fuses the scores according to the variant.
/// Masks are at grid resolution.
MatchResult match_variant(const DescriptorGrid& support, const BinaryMask& query_mask,
                          const DescriptorGrid& target, const BinaryMask& target_mask,
                          const MatcherConfig& config);

}  // namespace cycorr
