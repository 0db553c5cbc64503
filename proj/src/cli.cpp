#include "partreg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "partreg/gradcheck.hpp"
#include "partreg/io.hpp"
#include "partreg/metrics.hpp"
#include "partreg/pipeline.hpp"
#include "partreg/synthgen.hpp"

namespace partreg {

namespace {

using io::json;
namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string template_path;
  std::string out_dir = ".";
  std::string format = "json";
};

std::uint64_t need_seed(const Globals& g, const std::string& cmd) {
  if (!g.seed) throw InvalidArgument(cmd + " requires --seed");
  return *g.seed;
}

BodyTemplate need_template(const Globals& g, const std::string& cmd) {
  if (g.template_path.empty()) throw InvalidArgument(cmd + " requires --template");
  return io::load_template(g.template_path);
}

PartAssignment assignment_or_default(const std::string& path, const BodyTemplate& tmpl) {
  PartAssignment a = path.empty() ? assign_parts(tmpl.blend_weights) : io::load_assignment(path);
  try {
    a.validate(tmpl.num_vertices());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("assignment does not match template: ") + e.what());
  }
  return a;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void ensure_finite(const json& j, const std::string& what) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw std::runtime_error(what + ": non-finite output");
  }
  if (j.is_structured()) {
    for (const auto& v : j) ensure_finite(v, what);
  }
}

// ---- gen-model -----------------------------------------------------------

struct GenModelArgs {
  int vertices = 690;
  double noise = 0.0;
  std::string name = "template.bprt";
};

int cmd_gen_model(const Globals& g, const GenModelArgs& a, std::ostream& out) {
  GenSpec spec;
  spec.seed = need_seed(g, "gen-model");
  spec.vertex_count = a.vertices;
  spec.noise_scale = a.noise;
  const GeneratedModel m = gen_template(spec);
  const fs::path tpath = out_path(g, a.name);
  const fs::path apath = out_path(g, "assignment.json");
  io::save_template(tpath, m.tmpl);
  io::save_assignment(apath, m.assignment);
  out << json{{"template", tpath.string()},
              {"assignment", apath.string()},
              {"vertices", m.tmpl.num_vertices()},
              {"faces", m.tmpl.num_faces()},
              {"joints", m.tmpl.num_joints()},
              {"betas", m.tmpl.num_betas()}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// ---- gen-pose ------------------------------------------------------------

struct GenPoseArgs {
  std::string preset = "random";
  std::vector<double> trans;
  std::string name = "pose.json";
  std::string assignment;
  int size = kDefaultLabelSize;
};

int cmd_gen_pose(const Globals& g, const GenPoseArgs& a, std::ostream& out) {
  const std::uint64_t seed = need_seed(g, "gen-pose");
  const PoseShape pose = gen_pose(seed, parse_pose_preset(a.preset));
  Vec3 trans = Vec3::Zero();
  if (!a.trans.empty()) {
    require(a.trans.size() == 3, "--trans takes three values");
    trans = Vec3(a.trans[0], a.trans[1], a.trans[2]);
  }
  const fs::path ppath = out_path(g, a.name);
  io::save_pose(ppath, pose, trans);
  json summary{{"pose", ppath.string()}, {"preset", a.preset}};
  if (!g.template_path.empty()) {
    const BodyTemplate tmpl = need_template(g, "gen-pose");
    const PartAssignment assignment = assignment_or_default(a.assignment, tmpl);
    const PosedBody body = forward(tmpl, pose, trans);
    const WeakPerspectiveCamera cam = fit_front_camera(body.vertices, a.size, a.size);
    const GroundTruth gt = make_ground_truth(tmpl, assignment, pose, trans, cam, a.size, a.size);
    const fs::path gpath = out_path(g, fs::path(a.name).stem().string() + "_gt.json");
    io::write_json(gpath, io::ground_truth_to_json(gt));
    io::write_json(out_path(g, fs::path(a.name).stem().string() + "_camera.json"), io::camera_to_json(cam));
    summary["ground_truth"] = gpath.string();
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---- regress -------------------------------------------------------------

struct RegressArgs {
  std::string pose;
  std::string assignment;
  std::string checkpoint;
  int channels = 8;
  int size = kDefaultLabelSize;
  std::string name = "pred";
};

int cmd_regress(const Globals& g, const RegressArgs& a, std::ostream& out) {
  const std::uint64_t seed = need_seed(g, "regress");
  const BodyTemplate tmpl = need_template(g, "regress");
  require(a.channels >= 1, "--channels must be positive");
  require(a.size >= 4, "--size must be at least 4");
  const PartAssignment assignment = assignment_or_default(a.assignment, tmpl);
  const io::PoseFile input = io::load_pose(a.pose);

  BodyAwareModel model;
  if (a.checkpoint.empty()) {
    ModelConfig cfg;
    cfg.token_dim = token_dim_for(a.channels);
    model = init_model(cfg, seed);
  } else {
    model = io::load_checkpoint(a.checkpoint);
    if (model.config.token_dim != token_dim_for(a.channels)) {
      throw FormatError("checkpoint token_dim " + std::to_string(model.config.token_dim) +
                        " does not match --channels " + std::to_string(a.channels));
    }
  }

  const PosedBody body = forward(tmpl, input.pose, input.trans);
  const WeakPerspectiveCamera cam = fit_front_camera(body.vertices, a.size, a.size);
  const SegmentationMap parts = rasterize_parts(body, tmpl.faces, assignment, cam, a.size, a.size);
  const BackboneOutput backbone = synthetic_backbone(parts, a.channels, seed);
  Regression reg;
  const Predictions pred = predict(model, tmpl, backbone, &reg);

  const json pred_json = io::predictions_to_json(pred);
  ensure_finite(pred_json, "regress");
  const fs::path pose_path = out_path(g, a.name + "_pose.json");
  const fs::path pred_path = out_path(g, a.name + "_prediction.json");
  io::save_pose(pose_path, reg.pose);
  io::write_json(pred_path, pred_json);
  json summary{{"pose", pose_path.string()},
               {"prediction", pred_path.string()},
               {"camera", io::camera_to_json(reg.camera)},
               {"theta_shape", {reg.pose.theta.rows(), reg.pose.theta.cols()}},
               {"beta_size", reg.pose.beta.size()},
               {"rd_shape", {reg.rd.rd.rows(), reg.rd.rd.cols()}}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
};

struct Manifest {
  std::vector<std::pair<fs::path, fs::path>> entries;
  fs::path template_path;
  EvalOptions options;
  std::string mask_name = "all24";
};

Manifest read_manifest(const fs::path& path, const Globals& g) {
  const json j = io::read_json(path);
  const fs::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  if (!j.is_object()) throw FormatError("manifest: expected an object");
  Manifest m;
  try {
    if (!g.template_path.empty()) {
      m.template_path = g.template_path;
    } else if (j.contains("template_path")) {
      m.template_path = resolve(j["template_path"].get<std::string>());
    } else {
      throw FormatError("manifest: no template_path and no --template");
    }
    if (!j.contains("entries") || !j["entries"].is_array()) throw FormatError("manifest: missing entries");
    for (const auto& e : j["entries"]) {
      m.entries.emplace_back(resolve(e.at("pred_path").get<std::string>()),
                             resolve(e.at("gt_path").get<std::string>()));
    }
    if (j.contains("options")) {
      const json& o = j["options"];
      for (const auto& [key, value] : o.items()) {
        if (key == "mask") m.mask_name = value.get<std::string>();
        else if (key == "root_align") m.options.root_align = value.get<bool>();
        else if (key == "procrustes") m.options.procrustes = value.get<bool>();
        else throw FormatError("manifest: unknown option '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (m.entries.empty()) throw FormatError("manifest: no entries");
  try {
    m.options.mask = mask_preset(m.mask_name);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::vector<std::pair<std::string, double>> report_rows(const MetricReport& r) {
  std::vector<std::pair<std::string, double>> rows = {
      {"mje", r.mje}, {"pamje", r.pamje}, {"pve", r.pve},
      {"axis_mje_x", r.axis_mje.x()}, {"axis_mje_y", r.axis_mje.y()}, {"axis_mje_z", r.axis_mje.z()}};
  for (const auto& [name, v] : r.per_part_mje) rows.emplace_back("mje_" + name, v);
  return rows;
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream s;
  s << "metric,value_mm\n";
  for (const auto& [name, v] : report_rows(r)) s << name << ',' << fmt(v) << '\n';
  return s.str();
}

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const Manifest m = read_manifest(a.manifest, g);
  const BodyTemplate tmpl = io::load_template(m.template_path);

  // Inputs are fully read and validated before any metric is computed.
  std::vector<std::pair<io::PoseFile, io::PoseFile>> poses;
  for (const auto& [pred, gt] : m.entries) poses.emplace_back(io::load_pose(pred), io::load_pose(gt));

  std::vector<MetricReport> reports;
  json per_sample = json::array();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const PosedBody pb = forward(tmpl, poses[i].first.pose, poses[i].first.trans);
    const PosedBody gb = forward(tmpl, poses[i].second.pose, poses[i].second.trans);
    const MetricReport r = evaluate_sample({pb.joints3d, gb.joints3d, pb.vertices, gb.vertices}, m.options);
    reports.push_back(r);
    json row = io::metric_report_to_json(r);
    row["pred_path"] = m.entries[i].first.string();
    row["gt_path"] = m.entries[i].second.string();
    per_sample.push_back(std::move(row));
  }
  const MetricReport agg = aggregate_reports(reports);
  const json report{{"aggregate", io::metric_report_to_json(agg)},
                    {"per_sample", per_sample},
                    {"options",
                     {{"mask", m.mask_name},
                      {"root_align", m.options.root_align},
                      {"procrustes", m.options.procrustes}}}};
  ensure_finite(report, "eval");
  io::write_json(out_path(g, "report.json"), report);
  const std::string csv = report_csv(agg);
  std::ofstream(out_path(g, "report.csv")) << csv;
  if (g.format == "csv") {
    out << csv;
  } else {
    out << report["aggregate"].dump(2) << '\n';
  }
  return kExitOk;
}

// ---- refdepth ------------------------------------------------------------

struct RefDepthArgs {
  std::string pose;
  std::string assignment;
  std::string source = "joints";
};

int cmd_refdepth(const Globals& g, const RefDepthArgs& a, std::ostream& out) {
  const BodyTemplate tmpl = need_template(g, "refdepth");
  const PartAssignment assignment = assignment_or_default(a.assignment, tmpl);
  const io::PoseFile p = io::load_pose(a.pose);
  const PlaneSource source = a.source == "joints" ? PlaneSource::kJoints : PlaneSource::kPartCenters;

  const PosedBody body = forward(tmpl, p.pose, p.trans);
  const MatX3 centers = part_centers(body.vertices, assignment);
  const ReferencePlanes planes = build_planes(source == PlaneSource::kJoints ? body.joints3d : centers);
  const RelativeDepth rd = relative_depth(planes, centers);

  io::write_json(out_path(g, "rd.json"), io::rd_to_json(rd));
  io::write_json(out_path(g, "planes.json"), io::planes_to_json(planes));
  if (g.format == "csv") {
    out << "part,frontal,side,cross_section\n";
    for (int k = 0; k < kNumJoints; ++k) {
      out << kJointNames[k] << ',' << fmt(rd.rd(k, 0)) << ',' << fmt(rd.rd(k, 1)) << ','
          << fmt(rd.rd(k, 2)) << '\n';
    }
  } else {
    out << io::rd_to_json(rd).dump(2) << '\n';
  }
  return kExitOk;
}

// ---- rasterize -----------------------------------------------------------

struct RasterizeArgs {
  std::string pose;
  std::string assignment;
  std::string camera;
  int height = kDefaultLabelSize;
  int width = kDefaultLabelSize;
};

int cmd_rasterize(const Globals& g, const RasterizeArgs& a, std::ostream& out) {
  const BodyTemplate tmpl = need_template(g, "rasterize");
  const PartAssignment assignment = assignment_or_default(a.assignment, tmpl);
  require(a.height >= 1 && a.width >= 1, "image size must be positive");
  const io::PoseFile p = a.pose.empty() ? io::PoseFile{PoseShape::zero(), Vec3::Zero()} : io::load_pose(a.pose);
  const PosedBody body = forward(tmpl, p.pose, p.trans);
  const WeakPerspectiveCamera cam = a.camera.empty() ? fit_front_camera(body.vertices, a.height, a.width)
                                                     : io::camera_from_json(io::read_json(a.camera));
  const SegmentationMap seg = rasterize_parts(body, tmpl.faces, assignment, cam, a.height, a.width);
  const fs::path jpath = out_path(g, "labels.json");
  const fs::path ppath = out_path(g, "labels.png");
  io::write_json(jpath, io::label_map_to_json(seg));
  io::write_label_png(ppath, seg);
  io::write_json(out_path(g, "camera.json"), io::camera_to_json(cam));
  std::vector<int> counts(kNumJoints + 1, 0);
  for (int l : seg.labels) ++counts[static_cast<std::size_t>(l)];
  out << json{{"labels", jpath.string()}, {"png", ppath.string()}, {"pixel_counts", counts}}.dump(2)
      << '\n';
  return kExitOk;
}

// ---- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
  int instances = 20;
  double tolerance = 1e-6;
  std::string checkpoint;
  std::string save_checkpoint;
  int channels = 8;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a, std::ostream& out) {
  const std::uint64_t seed = need_seed(g, "gradcheck");
  require(a.instances >= 1, "--instances must be positive");
  require(a.tolerance > 0.0, "--tolerance must be positive");
  // Load first so a corrupt checkpoint fails before any work.
  std::optional<BodyAwareModel> model;
  if (!a.checkpoint.empty()) model = io::load_checkpoint(a.checkpoint);
  if (!a.save_checkpoint.empty()) {
    ModelConfig cfg;
    cfg.token_dim = token_dim_for(a.channels);
    const BodyAwareModel fresh = init_model(cfg, seed);
    io::save_checkpoint(a.save_checkpoint, fresh);
    if (!model) model = fresh;
  }

  std::vector<OpCheck> checks = run_gradient_suite(seed, a.instances);
  if (model) {
    const auto extra = check_model_blocks(*model, seed);
    checks.insert(checks.end(), extra.begin(), extra.end());
  }
  double worst = 0.0;
  json ops = json::array();
  for (const auto& c : checks) {
    worst = std::max(worst, c.max_rel_error);
    ops.push_back({{"op", c.op}, {"max_rel_error", c.max_rel_error}, {"instances", c.instances}});
  }
  const bool pass = std::isfinite(worst) && worst < a.tolerance;
  if (g.format == "csv") {
    out << "op,max_rel_error\n";
    for (const auto& c : checks) out << c.op << ',' << fmt(c.max_rel_error) << '\n';
  } else {
    out << json{{"seed", seed},
                {"ops", ops},
                {"max_rel_error", worst},
                {"tolerance", a.tolerance},
                {"pass", pass}}
               .dump(2)
        << '\n';
  }
  return pass ? kExitOk : kExitComputeError;
}

// ---- loss ----------------------------------------------------------------

struct LossArgs {
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::string weights;
};

int cmd_loss(const Globals& g, const LossArgs& a, std::ostream& out) {
  require(!a.pred.empty(), "loss requires at least one --pred");
  require(a.pred.size() == a.gt.size(), "--pred and --gt need the same number of files");
  const LossWeights w = a.weights.empty() ? LossWeights{} : io::loss_weights_from_json(io::read_json(a.weights));
  std::vector<std::pair<Predictions, GroundTruth>> inputs;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    try {
      inputs.emplace_back(io::predictions_from_json(io::read_json(a.pred[i])),
                          io::ground_truth_from_json(io::read_json(a.gt[i])));
    } catch (const FormatError& e) {
      throw FormatError(a.pred[i] + " / " + a.gt[i] + ": " + e.what());
    }
  }
  std::vector<LossReport> reports;
  for (const auto& [p, t] : inputs) {
    try {
      reports.push_back(total_loss(p, t, w));
    } catch (const InvalidArgument& e) {
      throw FormatError(std::string("prediction and ground truth disagree: ") + e.what());
    }
  }
  json report = io::loss_report_to_json(mean_report(reports));
  report["n_samples"] = reports.size();
  ensure_finite(report, "loss");
  io::write_json(out_path(g, "loss.json"), report);
  if (g.format == "csv") {
    out << "term,value\n";
    for (const auto& [k, v] : report.items()) out << k << ',' << v.dump() << '\n';
  } else {
    out << report.dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Body-aware part regression toolkit", "partreg"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Seed for every random draw");
  app.add_option("--template", g.template_path, "Body template (.bprt or .json)");
  app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();
  app.add_option("--format", g.format, "Stdout format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  GenModelArgs gm;
  auto* gen_model = app.add_subcommand("gen-model", "Generate a synthetic body template");
  gen_model->add_option("--vertices", gm.vertices, "Vertex count")->capture_default_str();
  gen_model->add_option("--noise", gm.noise, "Rest-vertex noise std-dev in metres");
  gen_model->add_option("--name", gm.name, "Template file name (.json selects JSON)")->capture_default_str();

  GenPoseArgs gp;
  auto* gen_pose_cmd = app.add_subcommand("gen-pose", "Generate a pose, plus ground truth with --template");
  gen_pose_cmd->add_option("--preset", gp.preset, "rest, t_pose, hands_behind_back, crouch or random")
      ->capture_default_str();
  gen_pose_cmd->add_option("--trans", gp.trans, "Global translation x y z")->expected(3);
  gen_pose_cmd->add_option("--name", gp.name, "Pose file name")->capture_default_str();
  gen_pose_cmd->add_option("--assignment", gp.assignment, "Part assignment JSON");
  gen_pose_cmd->add_option("--size", gp.size, "Label map size")->capture_default_str();

  RegressArgs rg;
  auto* regress_cmd = app.add_subcommand("regress", "Run the regressor on synthetic backbone features");
  regress_cmd->add_option("--pose", rg.pose, "Pose file rendered as the input")->required();
  regress_cmd->add_option("--assignment", rg.assignment, "Part assignment JSON");
  regress_cmd->add_option("--checkpoint", rg.checkpoint, "Checkpoint directory (default: random init)");
  regress_cmd->add_option("--channels", rg.channels, "Feature channels")->capture_default_str();
  regress_cmd->add_option("--size", rg.size, "Feature map size")->capture_default_str();
  regress_cmd->add_option("--name", rg.name, "Output file prefix")->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate (pred, gt) pose pairs listed in a manifest");
  eval->add_option("manifest", ev.manifest, "Manifest JSON")->required();

  RefDepthArgs rdp;
  auto* refdepth = app.add_subcommand("refdepth", "Relative depth of parts to the torso planes");
  refdepth->add_option("--pose", rdp.pose, "Pose file")->required();
  refdepth->add_option("--assignment", rdp.assignment, "Part assignment JSON");
  refdepth->add_option("--planes-from", rdp.source, "joints or part-centers")
      ->check(CLI::IsMember({"joints", "part-centers"}))
      ->capture_default_str();

  RasterizeArgs ra;
  auto* rasterize = app.add_subcommand("rasterize", "Render the part segmentation of a posed body");
  rasterize->add_option("--pose", ra.pose, "Pose file (default: rest pose)");
  rasterize->add_option("--assignment", ra.assignment, "Part assignment JSON");
  rasterize->add_option("--camera", ra.camera, "Camera JSON (default: fitted front view)");
  rasterize->add_option("--height", ra.height, "Image height")->capture_default_str();
  rasterize->add_option("--width", ra.width, "Image width")->capture_default_str();

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--instances", gc.instances, "Random instances per op")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--checkpoint", gc.checkpoint, "Also check the blocks of this checkpoint");
  gradcheck->add_option("--save-checkpoint", gc.save_checkpoint, "Write a seeded checkpoint here");
  gradcheck->add_option("--channels", gc.channels, "Feature channels of a saved checkpoint")
      ->capture_default_str();

  LossArgs la;
  auto* loss = app.add_subcommand("loss", "Loss report for prediction / ground-truth files");
  loss->add_option("--pred", la.pred, "Prediction JSON files")->required();
  loss->add_option("--gt", la.gt, "Ground-truth JSON files")->required();
  loss->add_option("--weights", la.weights, "Loss weights JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*gen_model) return cmd_gen_model(g, gm, out);
    if (*gen_pose_cmd) return cmd_gen_pose(g, gp, out);
    if (*regress_cmd) return cmd_regress(g, rg, out);
    if (*eval) return cmd_eval(g, ev, out);
    if (*refdepth) return cmd_refdepth(g, rdp, out);
    if (*rasterize) return cmd_rasterize(g, ra, out);
    if (*gradcheck) return cmd_gradcheck(g, gc, out);
    if (*loss) return cmd_loss(g, la, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    err << "compute error: " << e.what() << '\n';
    return kExitComputeError;
  }
  return kExitInvalidInput;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace partreg
