// Command-line front end: transfer, evaluate, ablate, skill, inspect.
//
// Exit codes: 0 ok, 2 unreadable or malformed input, 3 pipeline failure,
// 4 bad configuration or usage.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cycorr/benchmark.hpp"
#include "cycorr/config.hpp"
#include "cycorr/descriptor_io.hpp"
#include "cycorr/errors.hpp"
#include "cycorr/image_io.hpp"
#include "cycorr/metrics.hpp"
#include "cycorr/skills.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitIngestion = 2;
constexpr int kExitPipeline = 3;
constexpr int kExitConfig = 4;

struct CommonFlags {
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> variant;
  std::optional<double> tau_qt;
  std::optional<double> tau_tr;
  std::optional<std::size_t> k_q;
  std::optional<std::size_t> k_t;
  std::optional<int> crf_iters;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common_flags(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config_path, "key=value config file");
  app.add_option("--set", f.overrides, "override a config key (key=value), repeatable");
  app.add_option("--variant", f.variant, "full | forward-only | backward-only");
  app.add_option("--tau-qt", f.tau_qt, "forward matching temperature");
  app.add_option("--tau-tr", f.tau_tr, "backward matching temperature");
  app.add_option("--kq", f.k_q, "query cluster count");
  app.add_option("--kt", f.k_t, "target cluster count");
  app.add_option("--crf-iters", f.crf_iters, "mean-field iterations");
  app.add_option("--workers", f.workers, "parallel tasks (0 = all cores)");
  app.add_option("--seed", f.seed, "clustering seed");
  app.add_option("--out-dir", f.out_dir, "output directory");
}

// Config file first, then --set overrides, then dedicated flags.
cycorr::RunSettings resolve_settings(const CommonFlags& f) {
  cycorr::RunSettings s;
  if (f.config_path) cycorr::load_config_file(s, *f.config_path);
  for (const auto& o : f.overrides) {
    const auto [k, v] = cycorr::split_override(o);
    cycorr::apply_setting(s, k, v);
  }
  auto& m = s.pipeline.matcher;
  if (f.variant) m.variant = cycorr::parse_variant(*f.variant);
  if (f.tau_qt) m.tau_qt = *f.tau_qt;
  if (f.tau_tr) m.tau_tr = *f.tau_tr;
  if (f.k_q) m.k_q = *f.k_q;
  if (f.k_t) m.k_t = *f.k_t;
  if (f.seed) m.seed = *f.seed;
  if (f.crf_iters) {
    if (*f.crf_iters < 0) throw cycorr::ConfigError("--crf-iters must be non-negative");
    s.pipeline.crf.iterations = *f.crf_iters;
  }
  if (f.workers) s.workers = *f.workers;
  if (f.out_dir) s.out_dir = *f.out_dir;
  s.pipeline.validate();
  return s;
}

// Loading failures of any kind are reported as ingestion problems.
template <typename Fn>
auto load(const fs::path& path, Fn&& fn) {
  if (!fs::exists(path)) throw cycorr::IngestionError(fmt::format("missing input {}", path.string()));
  try {
    return fn(path);
  } catch (const cycorr::IngestionError&) {
    throw;
  } catch (const cycorr::Error& e) {
    throw cycorr::IngestionError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cycorr::IngestionError(fmt::format("cannot write {}", path.string()));
  out << text;
}

template <typename Writer>
void write_csv(const fs::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cycorr::IngestionError(fmt::format("cannot write {}", path.string()));
  w(out);
}

struct TransferArgs {
  std::string support_image, support_descriptors, query_mask;
  std::string target_image, target_descriptors;
  std::optional<std::string> target_mask;
};

int cmd_transfer(const TransferArgs& a, const cycorr::RunSettings& s) {
  const auto support = load(a.support_descriptors, cycorr::read_descriptor_file);
  const auto target = load(a.target_descriptors, cycorr::read_descriptor_file);
  const auto support_rgb = load(a.support_image, cycorr::read_rgb_png);
  const auto target_rgb = load(a.target_image, cycorr::read_rgb_png);
  const auto query = load(a.query_mask, cycorr::read_mask_png);
  std::optional<cycorr::BinaryMask> explicit_target;
  if (a.target_mask) explicit_target = load(*a.target_mask, cycorr::read_mask_png);

  const cycorr::ImageSize ssize = support.source_image_size();
  if (support_rgb.height != ssize.height || support_rgb.width != ssize.width || query.height != ssize.height ||
      query.width != ssize.width)
    throw cycorr::IngestionError("support image, query mask and support descriptors disagree on image size");
  const cycorr::ImageSize tsize = target.source_image_size();
  if (target_rgb.height != tsize.height || target_rgb.width != tsize.width)
    throw cycorr::IngestionError("target image and target descriptors disagree on image size");
  if (explicit_target && (explicit_target->height != tsize.height || explicit_target->width != tsize.width))
    throw cycorr::IngestionError("target mask does not match the target image size");

  cycorr::TransferResult r;
  try {
    const auto region = cycorr::target_region(target, explicit_target, s.pipeline);
    r = cycorr::transfer(support, query, target, target_rgb, region, s.pipeline);
  } catch (const cycorr::ConfigError&) {
    throw;
  } catch (const cycorr::Error& e) {
    throw cycorr::PipelineError(e.what());
  }

  fs::create_directories(s.out_dir);
  cycorr::write_mask_png(s.out_dir / "mask.png", r.mask);
  cycorr::write_score_pfm(s.out_dir / "score.pfm", r.score_image, tsize.height, tsize.width);

  const auto& m = s.pipeline.matcher;
  std::string source = "default";
  if (m.variant == cycorr::Variant::Full)
    source = "cluster_counts";
  else if (m.ablation_background_energy)
    source = "configured";
  ordered_json j;
  j["variant"] = std::string(cycorr::to_string(m.variant));
  j["tau_qt"] = m.tau_qt;
  j["tau_tr"] = m.tau_tr;
  j["k_q"] = m.k_q;
  j["k_t"] = m.k_t;
  j["effective_k_q"] = r.match.effective_k_q;
  j["effective_k_t"] = r.match.effective_k_t;
  j["background_energy"] = r.match.background_energy;
  j["threshold_source"] = source;
  j["crf_iterations"] = s.pipeline.crf.iterations;
  j["seed"] = m.seed;
  j["mask_pixels"] = r.mask.count();
  write_text(s.out_dir / "summary.json", j.dump(2) + "\n");
  return 0;
}

int cmd_evaluate(const cycorr::RunSettings& s) {
  if (s.dataset.empty()) throw cycorr::ConfigError("evaluate needs --dataset or dataset=<index>");
  const auto records = cycorr::read_index(s.dataset);
  const auto tasks = cycorr::enumerate_pairs(records, s.mode);
  const auto reports = cycorr::run_tasks(tasks, s.pipeline, s.workers);
  fs::create_directories(s.out_dir);
  const std::string mode(cycorr::to_string(s.mode));
  write_csv(s.out_dir / fmt::format("report_{}.csv", mode),
            [&](std::ostream& o) { cycorr::write_report_csv(o, reports); });
  write_csv(s.out_dir / fmt::format("summary_{}.csv", mode),
            [&](std::ostream& o) { cycorr::write_summary_csv(o, cycorr::aggregate(reports)); });
  write_csv(s.out_dir / fmt::format("histogram_{}.csv", mode),
            [&](std::ostream& o) { cycorr::write_histogram_csv(o, reports, s.histogram_bins); });
  for (const auto& row : cycorr::aggregate(reports))
    fmt::print("{:<12} n={:<4} iou={:.3f} fwb={:.3f}\n", row.affordance, row.count, row.mean_iou,
               row.mean_f_w_beta);
  return 0;
}

int cmd_ablate(const cycorr::RunSettings& s) {
  if (s.dataset.empty()) throw cycorr::ConfigError("ablate needs --dataset or dataset=<index>");
  const auto records = cycorr::read_index(s.dataset);
  const auto rows = cycorr::run_ablation(
      records, {cycorr::Variant::Full, cycorr::Variant::ForwardOnly, cycorr::Variant::BackwardOnly}, s.pipeline,
      s.workers);
  fs::create_directories(s.out_dir);
  write_csv(s.out_dir / "ablation.csv", [&](std::ostream& o) { cycorr::write_ablation_csv(o, rows); });
  cycorr::write_ablation_csv(std::cout, rows);
  return 0;
}

struct SkillArgs {
  std::string mask, depth, skill = "grasp";
  int connectivity = 8;
  std::optional<std::vector<double>> plane;
};

ordered_json point_json(const cycorr::Point3& p) { return ordered_json::array({p.x, p.y, p.z}); }

int cmd_skill(const SkillArgs& a) {
  const auto mask = load(a.mask, cycorr::read_mask_png);
  const auto depth = load(a.depth, cycorr::read_depth_file);
  if (mask.height != depth.height || mask.width != depth.width)
    throw cycorr::IngestionError("mask and depth map sizes differ");
  const auto comps = cycorr::connected_components(mask, a.connectivity);

  std::optional<std::size_t> selected;
  std::optional<cycorr::SupportPlane> plane;
  if (a.plane) {
    if (a.plane->size() != 4) throw cycorr::ConfigError("--plane takes nx ny nz offset");
    plane = cycorr::SupportPlane{{(*a.plane)[0], (*a.plane)[1], (*a.plane)[2]}, (*a.plane)[3]};
  }
  if (a.skill == "select" && !comps.components.empty()) selected = cycorr::select_next(comps, depth, plane);

  for (const auto& c : comps.components) {
    ordered_json j;
    j["component_id"] = c.id;
    j["skill"] = a.skill;
    j["pixels"] = c.pixels.size();
    try {
      if (a.skill == "grasp") {
        const auto pose = cycorr::grasp_pose(c, depth);
        j["position"] = point_json(pose.position);
        j["yaw"] = pose.yaw;
        j["isotropic"] = pose.isotropic;
      } else if (a.skill == "contain") {
        const auto xy = cycorr::containment_point(c, depth);
        j["position"] = ordered_json::array({xy.x, xy.y});
        j["yaw"] = nullptr;
      } else {
        const auto pose = cycorr::grasp_pose(c, depth);
        j["position"] = point_json(pose.position);
        j["yaw"] = pose.yaw;
        j["selected"] = selected == c.id;
      }
    } catch (const cycorr::DegenerateGeometryError& e) {
      j["position"] = nullptr;
      j["yaw"] = nullptr;
      j["error"] = e.what();
      if (a.skill == "select") j["selected"] = selected == c.id;
    }
    std::cout << j.dump() << '\n';
  }
  return 0;
}

int cmd_inspect(const std::string& path) {
  const auto grid = load(path, cycorr::read_descriptor_file);
  ordered_json j;
  j["format_version"] = cycorr::kDescriptorFormatVersion;
  j["height_patches"] = grid.height_patches();
  j["width_patches"] = grid.width_patches();
  j["dim"] = grid.dim();
  j["patch_size"] = grid.patch_size();
  j["stride"] = grid.stride();
  j["image_height"] = grid.source_image_size().height;
  j["image_width"] = grid.source_image_size().width;
  j["saliency"] = grid.saliency().has_value();
  if (const auto sal = cycorr::saliency_mask(grid)) j["salient_patches"] = sal->count();
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-region transfer between images through cyclic descriptor correspondence"};
  app.set_version_flag("--version", fmt::format("cycorr 1.0.0 (descriptor format {})",
                                                int{cycorr::kDescriptorFormatVersion}));
  app.require_subcommand(1);

  CommonFlags flags;

  TransferArgs ta;
  auto* transfer = app.add_subcommand("transfer", "segment the query part in a target image");
  add_common_flags(*transfer, flags);
  transfer->add_option("--support-image", ta.support_image)->required();
  transfer->add_option("--support-descriptors", ta.support_descriptors)->required();
  transfer->add_option("--query-mask", ta.query_mask)->required();
  transfer->add_option("--target-image", ta.target_image)->required();
  transfer->add_option("--target-descriptors", ta.target_descriptors)->required();
  transfer->add_option("--target-mask", ta.target_mask);

  std::optional<std::string> dataset, mode;
  auto* evaluate = app.add_subcommand("evaluate", "score every pair of a dataset index");
  add_common_flags(*evaluate, flags);
  evaluate->add_option("--dataset", dataset, "dataset index file");
  evaluate->add_option("--mode", mode, "intra | inter");

  auto* ablate = app.add_subcommand("ablate", "compare the full matcher with its single-direction variants");
  add_common_flags(*ablate, flags);
  ablate->add_option("--dataset", dataset, "dataset index file");

  SkillArgs sa;
  auto* skill = app.add_subcommand("skill", "grasp / containment / next-object geometry from a mask");
  skill->add_option("--mask", sa.mask)->required();
  skill->add_option("--depth", sa.depth)->required();
  skill->add_option("--skill", sa.skill)->check(CLI::IsMember({"grasp", "contain", "select"}));
  skill->add_option("--connectivity", sa.connectivity)->check(CLI::IsMember({4, 8}));
  skill->add_option("--plane", sa.plane, "support plane: nx ny nz offset")->expected(4);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "print the header of a descriptor file");
  inspect->add_option("file", inspect_path)->required();

  if (argc <= 1) {
    std::cout << app.help();
    return kExitConfig;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*skill) return cmd_skill(sa);
    if (*inspect) return cmd_inspect(inspect_path);
    cycorr::RunSettings s = resolve_settings(flags);
    if (dataset) s.dataset = *dataset;
    if (mode) s.mode = cycorr::parse_pair_mode(*mode);
    if (*transfer) return cmd_transfer(ta, s);
    if (*evaluate) return cmd_evaluate(s);
    if (*ablate) return cmd_ablate(s);
  } catch (const cycorr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cycorr::IngestionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitIngestion;
  } catch (const cycorr::FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitIngestion;
  } catch (const cycorr::Error& e) {
    std::cerr << "pipeline error: " << e.what() << '\n';
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return 0;
}
