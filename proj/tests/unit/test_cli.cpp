#include <doctest.h>

#include <fstream>
#include <sstream>

#include "partreg/cli.hpp"
#include "partreg/io.hpp"
#include "support.hpp"

using namespace partreg;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Template, assignment and `n` random poses with ground truth under `dir`.
void make_dataset(const fs::path& dir, int n) {
  const std::string d = dir.string();
  REQUIRE(run({"--seed", "1", "--out-dir", d, "gen-model"}).code == 0);
  for (int i = 0; i < n; ++i) {
    const auto r = run({"--seed", std::to_string(100 + i), "--out-dir", d, "--template", d + "/template.bprt",
                        "gen-pose", "--name", "pose" + std::to_string(i) + ".json", "--assignment",
                        d + "/assignment.json"});
    REQUIRE(r.code == 0);
  }
}

double oracle_mje_mm(const MatX3& p, const MatX3& g) {
  double total = 0.0;
  for (int j = 0; j < p.rows(); ++j) {
    total += ((p.row(j) - p.row(kPelvis)) - (g.row(j) - g.row(kPelvis))).norm();
  }
  return 1000.0 * total / p.rows();
}

}  // namespace

TEST_CASE("help and parse errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"gen-model"}).code == 2);  // no seed
  const auto dir = test::scratch_dir("cli_errors").string();
  CHECK(run({"--seed", "1", "--out-dir", dir, "gen-pose", "--preset", "dab"}).code == 2);
  CHECK(run({"--seed", "1", "--out-dir", dir, "gen-model", "--vertices", "100"}).code == 2);
  CHECK(run({"--format", "xml", "--seed", "1", "gen-model"}).code == 2);
  CHECK(run({"eval", dir + "/missing.json"}).code == 2);
}

TEST_CASE("eval of predictions equal to the truth is zero") {
  const auto dir = test::scratch_dir("cli_eval_zero");
  make_dataset(dir, 2);
  const json manifest{{"template_path", "template.bprt"},
                      {"entries", {{{"pred_path", "pose0.json"}, {"gt_path", "pose0.json"}},
                                   {{"pred_path", "pose1.json"}, {"gt_path", "pose1.json"}}}}};
  io::write_json(dir / "manifest.json", manifest);
  const auto r = run({"--out-dir", dir.string(), "eval", (dir / "manifest.json").string()});
  REQUIRE(r.code == 0);
  const json report = io::read_json(dir / "report.json");
  CHECK(report["aggregate"]["mje"].get<double>() == 0.0);
  CHECK(report["aggregate"]["pve"].get<double>() == 0.0);
  CHECK(report["aggregate"]["pamje"].get<double>() < 1e-9);
  CHECK(report["aggregate"]["n_samples"].get<int>() == 2);
  CHECK(report["per_sample"].size() == 2);

  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "metric,value_mm");
}

TEST_CASE("eval rejects empty and malformed manifests") {
  const auto dir = test::scratch_dir("cli_eval_bad");
  make_dataset(dir, 1);
  io::write_json(dir / "empty.json", json{{"template_path", "template.bprt"}, {"entries", json::array()}});
  CHECK(run({"--out-dir", dir.string(), "eval", (dir / "empty.json").string()}).code == 2);
  CHECK_FALSE(fs::exists(dir / "report.json"));

  io::write_json(dir / "opt.json", json{{"template_path", "template.bprt"},
                                        {"entries", {{{"pred_path", "pose0.json"}, {"gt_path", "pose0.json"}}}},
                                        {"options", {{"mask", "h36m17"}}}});
  CHECK(run({"--out-dir", dir.string(), "eval", (dir / "opt.json").string()}).code == 2);

  io::write_json(dir / "gone.json", json{{"template_path", "template.bprt"},
                                         {"entries", {{{"pred_path", "nope.json"}, {"gt_path", "pose0.json"}}}}});
  CHECK(run({"--out-dir", dir.string(), "eval", (dir / "gone.json").string()}).code == 2);
}

TEST_CASE("eval aggregate is the mean of independently computed per-sample errors") {
  const auto dir = test::scratch_dir("cli_eval_mean");
  make_dataset(dir, 10);
  json entries = json::array();
  for (int i = 0; i < 10; ++i) {
    entries.push_back({{"pred_path", "pose" + std::to_string(i) + ".json"},
                       {"gt_path", "pose" + std::to_string((i + 3) % 10) + ".json"}});
  }
  io::write_json(dir / "manifest.json", json{{"template_path", "template.bprt"}, {"entries", entries}});
  REQUIRE(run({"--out-dir", dir.string(), "eval", (dir / "manifest.json").string()}).code == 0);

  const BodyTemplate tmpl = io::load_template(dir / "template.bprt");
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto p = io::load_pose(dir / ("pose" + std::to_string(i) + ".json"));
    const auto g = io::load_pose(dir / ("pose" + std::to_string((i + 3) % 10) + ".json"));
    sum += oracle_mje_mm(forward(tmpl, p.pose, p.trans).joints3d, forward(tmpl, g.pose, g.trans).joints3d);
  }
  const json report = io::read_json(dir / "report.json");
  CHECK(report["aggregate"]["mje"].get<double>() == doctest::Approx(sum / 10).epsilon(1e-12));
  double per_sample = 0.0;
  for (const auto& s : report["per_sample"]) per_sample += s["mje"].get<double>();
  CHECK(report["aggregate"]["mje"].get<double>() == doctest::Approx(per_sample / 10).epsilon(1e-14));
}

TEST_CASE("gradcheck is reproducible and rejects corrupt checkpoints") {
  const auto dir = test::scratch_dir("cli_gradcheck");
  const auto a = run({"--seed", "11", "gradcheck", "--instances", "3"});
  const auto b = run({"--seed", "11", "gradcheck", "--instances", "3"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(json::parse(a.out)["pass"].get<bool>());

  const std::string ck = (dir / "ck").string();
  CHECK(run({"--seed", "11", "gradcheck", "--instances", "1", "--save-checkpoint", ck}).code == 0);
  CHECK(run({"--seed", "11", "gradcheck", "--instances", "1", "--checkpoint", ck}).code == 0);
  std::ofstream(dir / "ck" / "manifest.json") << "{not json";
  CHECK(run({"--seed", "11", "gradcheck", "--instances", "1", "--checkpoint", ck}).code == 2);

  // An impossible tolerance is a compute failure.
  CHECK(run({"--seed", "11", "gradcheck", "--instances", "1", "--tolerance", "1e-300"}).code == 3);
}

TEST_CASE("loss of a prediction equal to the truth, and zero weights") {
  const auto dir = test::scratch_dir("cli_loss");
  make_dataset(dir, 1);
  const GroundTruth gt = io::ground_truth_from_json(io::read_json(dir / "pose0_gt.json"));
  Predictions p;
  p.j2d = p.aux_j2d = gt.j2d.coords;
  p.j3d = p.aux_j3d = gt.j3d.coords;
  p.pose = gt.pose;
  p.rd = gt.rd;
  io::write_json(dir / "same.json", io::predictions_to_json(p));
  const std::string d = dir.string();
  REQUIRE(run({"--out-dir", d, "loss", "--pred", d + "/same.json", "--gt", d + "/pose0_gt.json"}).code == 0);
  CHECK(io::read_json(dir / "loss.json")["l_total"].get<double>() == 0.0);

  REQUIRE(run({"--seed", "5", "--out-dir", d, "--template", d + "/template.bprt", "regress", "--pose",
               d + "/pose0.json", "--assignment", d + "/assignment.json"})
              .code == 0);
  io::write_json(dir / "zero.json", json{{"lambda_2d", 0}, {"lambda_3d", 0}, {"lambda_smpl", 0},
                                         {"lambda_rd", 0}, {"lambda_att", 0}});
  REQUIRE(run({"--out-dir", d, "loss", "--pred", d + "/pred_prediction.json", "--gt", d + "/pose0_gt.json",
               "--weights", d + "/zero.json"})
              .code == 0);
  const json zero = io::read_json(dir / "loss.json");
  CHECK(zero["l_total"].get<double>() == 0.0);
  CHECK(zero["l_pseg"].get<double>() > 0.0);

  CHECK(run({"--out-dir", d, "loss", "--pred", d + "/same.json"}).code == 2);
  CHECK(run({"--out-dir", d, "loss", "--pred", d + "/pose0_gt.json", "--gt", d + "/pose0_gt.json"}).code == 2);
}

TEST_CASE("refdepth is unchanged by a rigid motion of the body") {
  const auto dir = test::scratch_dir("cli_refdepth");
  make_dataset(dir, 1);
  const std::string d = dir.string();
  const auto base = io::load_pose(dir / "pose0.json");
  PoseShape moved = base.pose;
  const Mat3 r = Eigen::AngleAxisd(1.1, Vec3(0.3, -0.8, 0.5).normalized()).toRotationMatrix();
  moved = rotate_root(moved, r);
  io::save_pose(dir / "moved.json", moved, Vec3(0.4, -1.2, 3.0));

  const auto rd_of = [&](const std::string& pose, const std::string& out) {
    REQUIRE(run({"--out-dir", d + "/" + out, "--template", d + "/template.bprt", "refdepth", "--pose", pose,
                 "--assignment", d + "/assignment.json"})
                .code == 0);
    return io::rd_from_json(io::read_json(dir / out / "rd.json")).rd;
  };
  const auto a = rd_of(d + "/pose0.json", "a");
  const auto b = rd_of(d + "/moved.json", "b");
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(fs::exists(dir / "a" / "planes.json"));

  const auto csv = run({"--out-dir", d, "--format", "csv", "--template", d + "/template.bprt", "refdepth",
                        "--pose", d + "/pose0.json", "--planes-from", "part-centers"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("part,frontal,side,cross_section\n", 0) == 0);
}

TEST_CASE("rasterize writes labels and an image") {
  const auto dir = test::scratch_dir("cli_raster");
  make_dataset(dir, 1);
  const std::string d = dir.string();
  const auto r = run({"--out-dir", d, "--template", d + "/template.bprt", "rasterize", "--pose", d + "/pose0.json",
                      "--height", "40", "--width", "30"});
  REQUIRE(r.code == 0);
  const LabelMap labels = io::label_map_from_json(io::read_json(dir / "labels.json"));
  CHECK(labels.height == 40);
  CHECK(labels.width == 30);
  CHECK(fs::file_size(dir / "labels.png") > 0);
  const auto counts = json::parse(r.out)["pixel_counts"].get<std::vector<int>>();
  CHECK(counts.size() == 25);
  CHECK(counts[0] > 0);
  CHECK(counts[kPelvis + 1] + counts[kSpine1 + 1] > 0);
}

TEST_CASE("regress outputs") {
  const auto dir = test::scratch_dir("cli_regress");
  make_dataset(dir, 1);
  const std::string d = dir.string();
  const auto args = std::vector<std::string>{"--seed", "9", "--out-dir", d, "--template", d + "/template.bprt",
                                             "regress", "--pose", d + "/pose0.json"};
  const auto r = run(args);
  REQUIRE(r.code == 0);
  const json s = json::parse(r.out);
  CHECK(s["theta_shape"] == json{24, 3});
  CHECK(s["beta_size"] == 10);
  CHECK(s["rd_shape"] == json{24, 3});
  const auto first = io::read_json(dir / "pred_prediction.json");
  REQUIRE(run(args).code == 0);
  CHECK(io::read_json(dir / "pred_prediction.json") == first);

  const std::string ck = d + "/ck";
  REQUIRE(run({"--seed", "9", "gradcheck", "--instances", "1", "--save-checkpoint", ck, "--channels", "4"}).code == 0);
  CHECK(run({"--seed", "9", "--out-dir", d, "--template", d + "/template.bprt", "regress", "--pose",
             d + "/pose0.json", "--checkpoint", ck})
            .code == 2);  // channel mismatch
  CHECK(run({"--seed", "9", "--out-dir", d, "--template", d + "/template.bprt", "regress", "--pose",
             d + "/pose0.json", "--checkpoint", ck, "--channels", "4"})
            .code == 0);
}
