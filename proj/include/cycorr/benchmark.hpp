#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cycorr/config.hpp"
#include "cycorr/descriptor_io.hpp"
#include "cycorr/image_io.hpp"
#include "cycorr/matcher.hpp"
#include "cycorr/metrics.hpp"

namespace cycorr {

/*
 * Dataset index: one object per line, whitespace separated,
 *
 *   <object_id> <class_name> <directory> <affordance>[,<affordance>...]
 *
 * Blank lines and lines starting with '#' are skipped. Directories are
 * relative to the index file. Each object directory holds image.png,
 * descriptors.afdg, masks/<affordance>.png and optionally target_mask.png.
 */
struct ObjectRecord {
  std::string object_id;
  std::string class_name;
  std::filesystem::path directory;
  std::vector<std::string> affordances;  // sorted, unique

  std::filesystem::path image_path() const { return directory / "image.png"; }
  std::filesystem::path descriptor_path() const { return directory / "descriptors.afdg"; }
  std::filesystem::path mask_path(const std::string& affordance) const {
    return directory / "masks" / (affordance + ".png");
  }
  std::filesystem::path target_mask_path() const { return directory / "target_mask.png"; }
  bool has_affordance(const std::string& affordance) const;
};

std::vector<ObjectRecord> read_index(const std::filesystem::path& index_file);
void write_index(const std::filesystem::path& index_file, const std::vector<ObjectRecord>& records);

struct PairTask {
  ObjectRecord support;
  ObjectRecord target;
  std::string affordance;
  PairMode mode = PairMode::Intra;

  std::string pair_id() const { return support.object_id + ":" + target.object_id + ":" + affordance; }
};

/// Ordered (support, target) pairs without self pairs, one task per shared
/// affordance. Intra keeps same-class pairs, inter keeps cross-class pairs.
/// Tasks come out sorted by (support id, target id, affordance).
std::vector<PairTask> enumerate_pairs(std::vector<ObjectRecord> records, PairMode mode);

// Everything a pair needs from one object, loaded and checked.
struct ObjectData {
  DescriptorGrid grid;
  RgbImage image;
  std::map<std::string, BinaryMask> gt_masks;
  std::optional<BinaryMask> target_mask;
};

ObjectData load_object(const ObjectRecord& record);

// Read-only store of every object referenced by a task list.
class ObjectCache {
 public:
  explicit ObjectCache(const std::vector<PairTask>& tasks);
  const ObjectData& get(const std::string& object_id) const;

 private:
  std::map<std::string, ObjectData> objects_;
};

// Target region at grid resolution: the explicit mask if given, else the
// thresholded saliency channel, else the whole grid.
BinaryMask target_region(const DescriptorGrid& grid, const std::optional<BinaryMask>& explicit_mask,
                         const PipelineConfig& config);

struct TransferResult {
  MatchResult match;
  std::vector<double> score_image;  // image resolution
  BinaryMask mask;                  // image resolution
};

// Score map only, no refinement.
MatchResult score_pair(const DescriptorGrid& support, const BinaryMask& query_mask_image,
                       const DescriptorGrid& target, const BinaryMask& target_region_grid,
                       const PipelineConfig& config);

TransferResult transfer(const DescriptorGrid& support, const BinaryMask& query_mask_image,
                        const DescriptorGrid& target, const RgbImage& target_rgb,
                        const BinaryMask& target_region_grid, const PipelineConfig& config);

MetricReport run_pair(const PairTask& task, const PipelineConfig& config, const ObjectCache& cache);
MetricReport run_pair(const PairTask& task, const PipelineConfig& config);

std::size_t resolve_workers(std::size_t requested);

// Runs fn(i) for i in [0, n) on a pool of workers. If any call throws, the
// exception of the lowest failing index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Reports in task order, independent of the worker count.
std::vector<MetricReport> run_tasks(const std::vector<PairTask>& tasks, const PipelineConfig& config,
                                    std::size_t workers);

struct AblationRow {
  Variant variant = Variant::Full;
  std::string affordance;
  double threshold = 0.0;
  std::size_t n_pairs = 0;
  double mean_iou = 0.0;
  double mean_f_w_beta = 0.0;
};

struct SweepOptions {
  std::size_t calibration_stride = 5;  // every n-th task calibrates the threshold
  std::size_t steps = 20;              // candidate thresholds max*i/steps, 0 < i < steps
};

/// Background energy for a single-direction variant, chosen by mean IoU over
/// the calibration tasks. Ties go to the smaller threshold.
double sweep_background_energy(const std::vector<PairTask>& tasks, const PipelineConfig& config,
                               const ObjectCache& cache, std::size_t workers, const SweepOptions& options = {});

/// Per-variant, per-affordance means over the intra-class pairs. Variants
/// without an explicit ablation threshold get one from the sweep.
std::vector<AblationRow> run_ablation(const std::vector<ObjectRecord>& records, const std::vector<Variant>& variants,
                                      const PipelineConfig& config, std::size_t workers,
                                      const SweepOptions& options = {});

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace cycorr
