#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cycorr/skills.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace cycorr;

namespace {

// Runs the CLI with stdout and stderr sent to files in `dir`; returns the exit status.
int cli(const TempDir& dir, const std::string& args) {
  const std::string cmd = std::string("\"") + CYCORR_CLI_PATH + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string transfer_args(const fs::path& root) {
  const fs::path s = root / "c00_s", t = root / "c00_t";
  return "transfer --support-image " + (s / "image.png").string() + " --support-descriptors " +
         (s / "descriptors.afdg").string() + " --query-mask " + (s / "masks" / "grasp.png").string() +
         " --target-image " + (t / "image.png").string() + " --target-descriptors " +
         (t / "descriptors.afdg").string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and version") {
    TempDir dir("cli_usage");
    CHECK(cli(dir, "") == 4);
    CHECK(cli(dir, "--version") == 0);
    CHECK(slurp(dir / "stdout.txt").find("cycorr 1.0.0 (descriptor format 1)") != std::string::npos);
    CHECK(cli(dir, "frobnicate") == 4);
  }

  TEST_CASE("transfer writes mask, score map and summary") {
    TempDir dir("cli_transfer");
    testing::write_planted_suite(dir.path(), 1, 0.0);
    const fs::path out = dir / "out";
    REQUIRE(cli(dir, transfer_args(dir.path()) + " --out-dir " + out.string()) == 0);
    const BinaryMask mask = read_mask_png(out / "mask.png");
    const BinaryMask gt = read_mask_png(dir / "c00_t" / "masks" / "grasp.png");
    CHECK(mask.bits == gt.bits);
    CHECK(fs::file_size(out / "score.pfm") > 128u * 128u * 4u);
    const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(j["variant"] == "full");
    CHECK(j["threshold_source"] == "cluster_counts");
    CHECK(j["mask_pixels"] == gt.count());
    CHECK(j["tau_qt"] == 0.2);
  }

  TEST_CASE("transfer options and failures") {
    TempDir dir("cli_transfer_opts");
    testing::write_planted_suite(dir.path(), 1, 0.0);
    const fs::path out = dir / "fwd";
    REQUIRE(cli(dir, transfer_args(dir.path()) + " --variant forward-only --set ablation_background_energy=2.5 " +
                         "--kq 4 --out-dir " + out.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(j["variant"] == "forward-only");
    CHECK(j["k_q"] == 4);
    CHECK(j["background_energy"] == 2.5);
    CHECK(j["threshold_source"] == "configured");

    CHECK(cli(dir, transfer_args(dir.path()) + " --set bogus=1 --out-dir " + out.string()) == 4);
    fs::remove(dir / "c00_t" / "descriptors.afdg");
    CHECK(cli(dir, transfer_args(dir.path()) + " --out-dir " + out.string()) == 2);
    CHECK_FALSE(slurp(dir / "stderr.txt").empty());
  }

  TEST_CASE("evaluate writes per-pair and summary tables") {
    TempDir dir("cli_evaluate");
    const fs::path index =
        testing::write_dataset(dir.path(), 8, {{"mug", "grasp"}, {"mug", "grasp"}, {"pan", "scoop"}});
    REQUIRE(cli(dir, "evaluate --dataset " + index.string() + " --workers 2 --out-dir " + (dir / "o").string()) == 0);
    CHECK(line_count(dir / "o" / "report_intra.csv") == 3);
    CHECK(line_count(dir / "o" / "summary_intra.csv") == 2);
    CHECK(line_count(dir / "o" / "histogram_intra.csv") == 21);

    // No cross-class pair shares an affordance: an empty table, not an error.
    REQUIRE(cli(dir, "evaluate --dataset " + index.string() + " --mode inter --out-dir " + (dir / "o").string()) == 0);
    CHECK(slurp(dir / "o" / "report_inter.csv") == "pair_id,support_id,target_id,affordance,iou,fwb\n");
    CHECK(cli(dir, "evaluate --dataset " + (dir / "nope.txt").string()) == 2);
    CHECK(cli(dir, "evaluate --dataset " + index.string() + " --mode sideways") == 4);
  }

  TEST_CASE("skill prints one JSON line per component") {
    TempDir dir("cli_skill");
    BinaryMask m(6, 10, Resolution::Image);
    for (std::uint32_t c = 0; c < 4; ++c) m.set(1, c, true);
    for (std::uint32_t r = 0; r < 5; ++r) m.set(r, 8, true);
    m.set(5, 5, true);
    write_mask_png(dir / "m.png", m);
    DepthMap d{6, 10, std::vector<float>(60, 1.0f), {}};
    d.values[8] = 0.5f;
    write_depth_file(dir / "d.bin", d);

    REQUIRE(cli(dir, "skill --mask " + (dir / "m.png").string() + " --depth " + (dir / "d.bin").string() +
                         " --skill select") == 0);
    std::istringstream lines(slurp(dir / "stdout.txt"));
    std::vector<nlohmann::json> js;
    for (std::string l; std::getline(lines, l);) js.push_back(nlohmann::json::parse(l));
    REQUIRE(js.size() == 3);
    CHECK(js[0]["component_id"] == 0);
    CHECK(js[0]["pixels"] == 5);
    CHECK(js[0]["selected"] == true);
    CHECK(js[1]["selected"] == false);
    CHECK(js[2]["pixels"] == 1);
    CHECK(js[2].contains("error"));

    // On a flat depth map the vertical stroke is a pure y axis.
    d.values[8] = 1.0f;
    write_depth_file(dir / "d.bin", d);
    REQUIRE(cli(dir, "skill --mask " + (dir / "m.png").string() + " --depth " + (dir / "d.bin").string()) == 0);
    const auto first = nlohmann::json::parse(slurp(dir / "stdout.txt").substr(0, slurp(dir / "stdout.txt").find('\n')));
    CHECK(first["skill"] == "grasp");
    CHECK(first["yaw"].get<double>() == doctest::Approx(-1.5707963267948966));
    CHECK(cli(dir, "skill --mask " + (dir / "m.png").string() + " --depth " + (dir / "m.png").string()) == 2);
    CHECK(cli(dir, "skill --mask " + (dir / "m.png").string() + " --depth " + (dir / "d.bin").string() +
                       " --connectivity 6") == 4);
  }

  TEST_CASE("inspect prints the descriptor header") {
    TempDir dir("cli_inspect");
    testing::write_planted_suite(dir.path(), 1, 0.0);
    REQUIRE(cli(dir, "inspect " + (dir / "c00_s" / "descriptors.afdg").string()) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "stdout.txt"));
    CHECK(j["height_patches"] == 32);
    CHECK(j["dim"] == 16);
  }
}
