#include "cycorr/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    if (!(s > 0.0)) throw DegenerateDescriptorError("zero-norm descriptor row " + std::to_string(r));
    out[r] = s;
  }
  return out;
}

Matrix grid_matrix(const DescriptorGrid& grid) {
  Matrix m(grid.patch_count(), grid.dim());
  auto src = grid.data();
  std::copy(src.begin(), src.end(), m.data().begin());
  return m;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::ForwardOnly: return "forward-only";
    case Variant::BackwardOnly: return "backward-only";
  }
  return "full";
}

Variant parse_variant(std::string_view text) {
  if (text == "full") return Variant::Full;
  if (text == "forward-only") return Variant::ForwardOnly;
  if (text == "backward-only") return Variant::BackwardOnly;
  throw ConfigError("unknown variant '" + std::string(text) + "'");
}

void MatcherConfig::validate() const {
  if (!(tau_qt > 0.0 && std::isfinite(tau_qt))) throw ConfigError("tau_qt must be positive");
  if (!(tau_tr > 0.0 && std::isfinite(tau_tr))) throw ConfigError("tau_tr must be positive");
  if (k_q == 0 || k_t == 0) throw ConfigError("cluster counts must be at least 1");
  if (ablation_background_energy && !std::isfinite(*ablation_background_energy))
    throw ConfigError("ablation background energy must be finite");
}

Matrix cosine_similarity(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("descriptor dimensions differ");
  const auto na = row_norms(a);
  const auto nb = row_norms(b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto x = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto y = b.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < x.size(); ++d) dot += x[d] * y[d];
      out(i, j) = std::clamp(dot / std::sqrt(na[i] * nb[j]), -1.0, 1.0);
    }
  }
  return out;
}

Matrix row_softmax(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    const double top = *std::max_element(in.begin(), in.end()) / temperature;
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] / temperature - top);
      sum += dst[c];
    }
    for (double& v : dst) v /= sum;
  }
  return out;
}

ForwardMatch forward_match(const CentroidSet& query, const CentroidSet& target, double tau_qt) {
  ForwardMatch fm;
  fm.a_qt = row_softmax(cosine_similarity(query.centroids, target.centroids), tau_qt);
  fm.v_qt.assign(target.centroids.rows(), 0.0);
  for (std::size_t q = 0; q < fm.a_qt.rows(); ++q)
    for (std::size_t t = 0; t < fm.a_qt.cols(); ++t) fm.v_qt[t] += fm.a_qt(q, t);
  return fm;
}

BackwardMatch backward_match(const CentroidSet& target, const DescriptorGrid& reference,
                             const BinaryMask& query_mask, double tau_tr) {
  if (query_mask.height != reference.height_patches() || query_mask.width != reference.width_patches())
    throw DimensionError("query mask is not at the reference grid resolution");
  if (!query_mask.any()) throw EmptyRegionError("query mask selects no reference patch");

  BackwardMatch bm;
  bm.a_tr = row_softmax(cosine_similarity(target.centroids, grid_matrix(reference)), tau_tr);
  bm.p_tq.assign(bm.a_tr.rows(), 0.0);
  for (std::size_t t = 0; t < bm.a_tr.rows(); ++t) {
    double mass = 0.0;
    for (std::size_t p = 0; p < reference.patch_count(); ++p)
      if (query_mask.bits[p]) mass += bm.a_tr(t, p);
    bm.p_tq[t] = std::clamp(mass, 0.0, 1.0);
  }
  return bm;
}

FusedScores fuse_scores(const std::vector<double>& v_qt, const std::vector<double>& p_tq,
                        const CentroidSet& target) {
  if (v_qt.size() != p_tq.size() || v_qt.size() != target.k)
    throw DimensionError("vote and probability vectors disagree in length");
  FusedScores fs;
  fs.s_t.resize(v_qt.size());
  for (std::size_t t = 0; t < v_qt.size(); ++t) fs.s_t[t] = v_qt[t] * p_tq[t];
  fs.score_map.assign(target.assignment.size(), 0.0);
  for (std::size_t p = 0; p < target.assignment.size(); ++p)
    if (target.assignment[p] >= 0) fs.score_map[p] = fs.s_t[static_cast<std::size_t>(target.assignment[p])];
  return fs;
}

double decision_threshold(const MatcherConfig& config) {
  const double kq = static_cast<double>(config.k_q);
  const double kt = static_cast<double>(config.k_t);
  switch (config.variant) {
    case Variant::Full:
      return kq / (2.0 * kt);
    case Variant::ForwardOnly:
      return config.ablation_background_energy.value_or(kq / kt);
    case Variant::BackwardOnly:
      return config.ablation_background_energy.value_or(0.5);
  }
  return kq / (2.0 * kt);
}

MatchResult match_variant(const DescriptorGrid& support, const BinaryMask& query_mask,
                          const DescriptorGrid& target, const BinaryMask& target_mask,
                          const MatcherConfig& config) {
  config.validate();
  if (support.dim() != target.dim()) throw DimensionError("support and target descriptor dimensions differ");
  const ClusterOptions opts{config.max_iters, config.normalize_descriptors};

  MatchResult r;
  r.query_set = cluster(support, query_mask, config.k_q, config.seed, opts);
  r.target_set = cluster(target, target_mask, config.k_t, config.seed, opts);
  r.effective_k_q = r.query_set.k;
  r.effective_k_t = r.target_set.k;

  ForwardMatch fm = forward_match(r.query_set, r.target_set, config.tau_qt);
  BackwardMatch bm = backward_match(r.target_set, support, query_mask, config.tau_tr);

  std::vector<double> v = fm.v_qt;
  std::vector<double> p = bm.p_tq;
  if (config.variant == Variant::ForwardOnly) std::fill(p.begin(), p.end(), 1.0);
  if (config.variant == Variant::BackwardOnly) std::fill(v.begin(), v.end(), 1.0);
  FusedScores fs = fuse_scores(v, p, r.target_set);

  MatcherConfig effective = config;
  effective.k_q = r.effective_k_q;
  effective.k_t = r.effective_k_t;

  r.a_qt = std::move(fm.a_qt);
  r.v_qt = std::move(fm.v_qt);
  r.a_tr = std::move(bm.a_tr);
  r.p_tq = std::move(bm.p_tq);
  r.s_t = std::move(fs.s_t);
  r.score_map = std::move(fs.score_map);
  r.grid_height = target.height_patches();
  r.grid_width = target.width_patches();
  r.tau_qt = config.tau_qt;
  r.tau_tr = config.tau_tr;
  r.variant = config.variant;
  r.background_energy = decision_threshold(effective);
  return r;
}

}  // namespace cycorr
