#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "partreg/attention.hpp"
#include "partreg/body_model.hpp"
#include "partreg/camera.hpp"
#include "partreg/losses.hpp"
#include "partreg/metrics.hpp"
#include "partreg/raster.hpp"
#include "partreg/ref_planes.hpp"
#include "partreg/transformer.hpp"

namespace partreg::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::uint32_t kTemplateVersion = 1;

// All readers throw FormatError on malformed content and on I/O failure.

/// "BPRT" little-endian binary: magic, u32 version, u32 V, F, J, n_beta, then
/// f64 arrays vertices_rest (V×3), faces (F×3), joints_rest (J×3), parent (J,
/// root = -1), blend_weights (V×J), shape_basis (V×3×n_beta), joint_regressor
/// (J×V), all row-major.
void write_template_binary(const fs::path& path, const BodyTemplate& tmpl);
BodyTemplate read_template_binary(const fs::path& path);

json template_to_json(const BodyTemplate& tmpl);
BodyTemplate template_from_json(const json& j);

/// Binary or JSON by extension (".json" selects JSON).
void save_template(const fs::path& path, const BodyTemplate& tmpl);
BodyTemplate load_template(const fs::path& path);

struct PoseFile {
  PoseShape pose;
  Vec3 trans = Vec3::Zero();
};
json pose_to_json(const PoseShape& ps, const Vec3& trans = Vec3::Zero());
PoseFile pose_from_json(const json& j);
void save_pose(const fs::path& path, const PoseShape& ps, const Vec3& trans = Vec3::Zero());
PoseFile load_pose(const fs::path& path);

json assignment_to_json(const PartAssignment& a);
PartAssignment assignment_from_json(const json& j);
void save_assignment(const fs::path& path, const PartAssignment& a);
PartAssignment load_assignment(const fs::path& path);

json rd_to_json(const RelativeDepth& rd);
RelativeDepth rd_from_json(const json& j);
json planes_to_json(const ReferencePlanes& planes);

json camera_to_json(const WeakPerspectiveCamera& cam);
WeakPerspectiveCamera camera_from_json(const json& j);

/// "BPRF": magic, u32 H, W, C, then H·W·C f64 row-major.
void write_feature_map(const fs::path& path, const FeatureMap& fm);
FeatureMap read_feature_map(const fs::path& path);
json feature_map_to_json(const FeatureMap& fm);
FeatureMap feature_map_from_json(const json& j);

json label_map_to_json(const LabelMap& m);
LabelMap label_map_from_json(const json& j);
/// 8-bit palette PNG; pixel value = label = palette index.
void write_label_png(const fs::path& path, const LabelMap& m);

json loss_report_to_json(const LossReport& r);
json metric_report_to_json(const MetricReport& r);
LossWeights loss_weights_from_json(const json& j);

/// Loss CLI inputs.
Predictions predictions_from_json(const json& j);
GroundTruth ground_truth_from_json(const json& j);
json predictions_to_json(const Predictions& p);
json ground_truth_to_json(const GroundTruth& g);

/// Directory with manifest.json plus one BPRF tensor per weight.
void save_checkpoint(const fs::path& dir, const BodyAwareModel& model);
BodyAwareModel load_checkpoint(const fs::path& dir);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

json matrix_to_json(const MatX& m);
MatX matrix_from_json(const json& j, Index rows, Index cols, const std::string& what);

}  // namespace partreg::io
