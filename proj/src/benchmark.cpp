#include "cycorr/benchmark.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cycorr/crf.hpp"
#include "cycorr/errors.hpp"

namespace cycorr {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::string> shared_affordances(const ObjectRecord& a, const ObjectRecord& b) {
  std::vector<std::string> out;
  std::set_intersection(a.affordances.begin(), a.affordances.end(), b.affordances.begin(), b.affordances.end(),
                        std::back_inserter(out));
  return out;
}

// Rethrows the active exception annotated with the pair, keeping ingestion
// and configuration problems distinguishable from pipeline failures.
[[noreturn]] void rethrow_with_context(const PairTask& task) {
  const std::string ctx = "pair " + task.pair_id();
  try {
    throw;
  } catch (const IngestionError& e) {
    throw IngestionError(fmt::format("{}: {}", ctx, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", ctx, e.what()));
  } catch (const Error& e) {
    throw PipelineError(fmt::format("{}: {}", ctx, e.what()));
  }
}

struct ScoredPair {
  std::vector<double> score_image;
  const RgbImage* rgb = nullptr;
  const BinaryMask* gt = nullptr;
};

ScoredPair score_task(const PairTask& task, const PipelineConfig& config, const ObjectCache& cache) {
  const ObjectData& s = cache.get(task.support.object_id);
  const ObjectData& t = cache.get(task.target.object_id);
  const BinaryMask region = target_region(t.grid, t.target_mask, config);
  const MatchResult m = score_pair(s.grid, s.gt_masks.at(task.affordance), t.grid, region, config);
  ScoredPair out;
  out.score_image = upsample_map(m.score_map, m.grid_height, m.grid_width, t.grid.source_image_size(),
                                 t.grid.stride());
  out.rgb = &t.image;
  out.gt = &t.gt_masks.at(task.affordance);
  return out;
}

}  // namespace

bool ObjectRecord::has_affordance(const std::string& affordance) const {
  return std::binary_search(affordances.begin(), affordances.end(), affordance);
}

std::vector<ObjectRecord> read_index(const fs::path& index_file) {
  std::ifstream in(index_file);
  if (!in) throw IngestionError(fmt::format("cannot open dataset index {}", index_file.string()));
  const fs::path base = index_file.parent_path();
  std::vector<ObjectRecord> records;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok.size() != 4)
      throw IngestionError(fmt::format("{}:{}: expected 4 fields, got {}", index_file.string(), lineno, tok.size()));
    ObjectRecord r;
    r.object_id = tok[0];
    r.class_name = tok[1];
    r.directory = base / tok[2];
    r.affordances = split(tok[3], ',');
    std::sort(r.affordances.begin(), r.affordances.end());
    r.affordances.erase(std::unique(r.affordances.begin(), r.affordances.end()), r.affordances.end());
    if (!seen.insert(r.object_id).second)
      throw IngestionError(fmt::format("{}:{}: duplicate object id '{}'", index_file.string(), lineno, r.object_id));
    records.push_back(std::move(r));
  }
  return records;
}

void write_index(const fs::path& index_file, const std::vector<ObjectRecord>& records) {
  std::ofstream out(index_file);
  if (!out) throw IngestionError(fmt::format("cannot write {}", index_file.string()));
  const fs::path base = index_file.parent_path();
  for (const auto& r : records) {
    std::string affs;
    for (const auto& a : r.affordances) affs += (affs.empty() ? "" : ",") + a;
    out << r.object_id << ' ' << r.class_name << ' ' << fs::relative(r.directory, base).generic_string() << ' '
        << affs << '\n';
  }
}

std::vector<PairTask> enumerate_pairs(std::vector<ObjectRecord> records, PairMode mode) {
  std::sort(records.begin(), records.end(),
            [](const ObjectRecord& a, const ObjectRecord& b) { return a.object_id < b.object_id; });
  std::vector<PairTask> tasks;
  for (const auto& s : records)
    for (const auto& t : records) {
      if (s.object_id == t.object_id) continue;
      const bool same_class = s.class_name == t.class_name;
      if (same_class != (mode == PairMode::Intra)) continue;
      for (const auto& aff : shared_affordances(s, t)) tasks.push_back({s, t, aff, mode});
    }
  return tasks;
}

ObjectData load_object(const ObjectRecord& record) {
  for (const auto& p : {record.image_path(), record.descriptor_path()})
    if (!fs::exists(p)) throw IngestionError(fmt::format("{}: missing {}", record.object_id, p.string()));
  try {
    ObjectData d{read_descriptor_file(record.descriptor_path()), read_rgb_png(record.image_path()), {}, {}};
    const ImageSize size{d.image.height, d.image.width};
    if (d.grid.source_image_size() != size)
      throw DimensionError(fmt::format("descriptor grid was computed for a {}x{} image, image is {}x{}",
                                       d.grid.source_image_size().height, d.grid.source_image_size().width,
                                       size.height, size.width));
    for (const auto& aff : record.affordances) {
      BinaryMask m = read_mask_png(record.mask_path(aff));
      if (m.height != size.height || m.width != size.width)
        throw DimensionError(fmt::format("mask '{}' does not match the image size", aff));
      if (!m.any()) throw DataError(fmt::format("mask '{}' is empty", aff));
      d.gt_masks.emplace(aff, std::move(m));
    }
    if (fs::exists(record.target_mask_path())) {
      BinaryMask m = read_mask_png(record.target_mask_path());
      if (m.height != size.height || m.width != size.width)
        throw DimensionError("target mask does not match the image size");
      d.target_mask = std::move(m);
    }
    return d;
  } catch (const Error& e) {
    throw IngestionError(fmt::format("{}: {}", record.object_id, e.what()));
  }
}

ObjectCache::ObjectCache(const std::vector<PairTask>& tasks) {
  for (const auto& t : tasks)
    for (const ObjectRecord* r : {&t.support, &t.target})
      if (!objects_.contains(r->object_id)) objects_.emplace(r->object_id, load_object(*r));
}

const ObjectData& ObjectCache::get(const std::string& object_id) const {
  const auto it = objects_.find(object_id);
  if (it == objects_.end()) throw IngestionError(fmt::format("object '{}' is not loaded", object_id));
  return it->second;
}

BinaryMask target_region(const DescriptorGrid& grid, const std::optional<BinaryMask>& explicit_mask,
                         const PipelineConfig& config) {
  if (explicit_mask) return downsample_mask(*explicit_mask, grid, config.coverage_threshold);
  if (auto sal = saliency_mask(grid, config.saliency_threshold)) return *sal;
  return BinaryMask(grid.height_patches(), grid.width_patches(), Resolution::Grid, true);
}

MatchResult score_pair(const DescriptorGrid& support, const BinaryMask& query_mask_image,
                       const DescriptorGrid& target, const BinaryMask& target_region_grid,
                       const PipelineConfig& config) {
  config.validate();
  const BinaryMask query = downsample_mask(query_mask_image, support, config.coverage_threshold);
  return match_variant(support, query, target, target_region_grid, config.matcher);
}

TransferResult transfer(const DescriptorGrid& support, const BinaryMask& query_mask_image,
                        const DescriptorGrid& target, const RgbImage& target_rgb,
                        const BinaryMask& target_region_grid, const PipelineConfig& config) {
  const ImageSize size = target.source_image_size();
  if (target_rgb.height != size.height || target_rgb.width != size.width)
    throw DimensionError("target image does not match its descriptor grid");
  TransferResult r;
  r.match = score_pair(support, query_mask_image, target, target_region_grid, config);
  r.score_image = upsample_map(r.match.score_map, r.match.grid_height, r.match.grid_width, size, target.stride());
  CrfConfig crf = config.crf;
  crf.background_energy = r.match.background_energy;
  r.mask = refine(r.score_image, target_rgb, crf);
  return r;
}

MetricReport run_pair(const PairTask& task, const PipelineConfig& config, const ObjectCache& cache) {
  try {
    const ObjectData& s = cache.get(task.support.object_id);
    const ObjectData& t = cache.get(task.target.object_id);
    const BinaryMask region = target_region(t.grid, t.target_mask, config);
    const TransferResult tr = transfer(s.grid, s.gt_masks.at(task.affordance), t.grid, t.image, region, config);
    const BinaryMask& gt = t.gt_masks.at(task.affordance);
    MetricReport rep;
    rep.pair_id = task.pair_id();
    rep.support_id = task.support.object_id;
    rep.target_id = task.target.object_id;
    rep.affordance = task.affordance;
    rep.iou = iou(tr.mask, gt);
    rep.f_w_beta = weighted_fbeta(tr.mask, gt);
    return rep;
  } catch (...) {
    rethrow_with_context(task);
  }
}

MetricReport run_pair(const PairTask& task, const PipelineConfig& config) {
  std::optional<ObjectCache> cache;
  try {
    cache.emplace(std::vector<PairTask>{task});
  } catch (...) {
    rethrow_with_context(task);
  }
  return run_pair(task, config, *cache);
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<MetricReport> run_tasks(const std::vector<PairTask>& tasks, const PipelineConfig& config,
                                    std::size_t workers) {
  config.validate();
  const ObjectCache cache(tasks);
  std::vector<MetricReport> reports(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) { reports[i] = run_pair(tasks[i], config, cache); });
  return reports;
}

double sweep_background_energy(const std::vector<PairTask>& tasks, const PipelineConfig& config,
                               const ObjectCache& cache, std::size_t workers, const SweepOptions& options) {
  if (options.calibration_stride == 0 || options.steps < 2) throw ConfigError("invalid sweep options");
  std::vector<const PairTask*> calib;
  for (std::size_t i = 0; i < tasks.size(); i += options.calibration_stride) calib.push_back(&tasks[i]);
  if (calib.empty()) return decision_threshold(config.matcher);

  std::vector<ScoredPair> scored(calib.size());
  parallel_for(calib.size(), workers, [&](std::size_t i) {
    try {
      scored[i] = score_task(*calib[i], config, cache);
    } catch (...) {
      rethrow_with_context(*calib[i]);
    }
  });
  double max_score = 0.0;
  for (const auto& s : scored)
    for (double v : s.score_image) max_score = std::max(max_score, v);
  if (!(max_score > 0.0)) return decision_threshold(config.matcher);

  const std::size_t n_thr = options.steps - 1;
  std::vector<double> ious(n_thr * calib.size());
  parallel_for(ious.size(), workers, [&](std::size_t job) {
    const std::size_t k = job / calib.size(), i = job % calib.size();
    CrfConfig crf = config.crf;
    crf.background_energy = max_score * double(k + 1) / double(options.steps);
    ious[job] = iou(refine(scored[i].score_image, *scored[i].rgb, crf), *scored[i].gt);
  });

  double best_thr = 0.0, best_iou = -1.0;
  for (std::size_t k = 0; k < n_thr; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < calib.size(); ++i) sum += ious[k * calib.size() + i];
    const double mean = sum / double(calib.size());
    if (mean > best_iou) {
      best_iou = mean;
      best_thr = max_score * double(k + 1) / double(options.steps);
    }
  }
  return best_thr;
}

std::vector<AblationRow> run_ablation(const std::vector<ObjectRecord>& records, const std::vector<Variant>& variants,
                                      const PipelineConfig& config, std::size_t workers,
                                      const SweepOptions& options) {
  config.validate();
  const std::vector<PairTask> tasks = enumerate_pairs(records, PairMode::Intra);
  const ObjectCache cache(tasks);
  std::vector<AblationRow> rows;
  for (Variant variant : variants) {
    PipelineConfig vc = config;
    vc.matcher.variant = variant;
    if (variant != Variant::Full && !vc.matcher.ablation_background_energy)
      vc.matcher.ablation_background_energy = sweep_background_energy(tasks, vc, cache, workers, options);
    std::vector<MetricReport> reports(tasks.size());
    parallel_for(tasks.size(), workers, [&](std::size_t i) { reports[i] = run_pair(tasks[i], vc, cache); });
    for (const auto& s : aggregate(reports))
      rows.push_back({variant, s.affordance, decision_threshold(vc.matcher), s.count, s.mean_iou, s.mean_f_w_beta});
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,affordance,threshold,n_pairs,iou,fwb\n";
  for (const auto& r : rows)
    out << to_string(r.variant) << ',' << r.affordance << ',' << fmt::format("{:.6f}", r.threshold) << ','
        << r.n_pairs << ',' << fmt::format("{:.6f}", r.mean_iou) << ',' << fmt::format("{:.6f}", r.mean_f_w_beta)
        << '\n';
}

}  // namespace cycorr
