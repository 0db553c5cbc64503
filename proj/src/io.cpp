#include "partreg/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <vector>

#include <png.h>

namespace partreg::io {

namespace {

constexpr std::array<char, 4> kTemplateMagic = {'B', 'P', 'R', 'T'};
constexpr std::array<char, 4> kFeatureMagic = {'B', 'P', 'R', 'F'};

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw FormatError("cannot open " + path.string() + " for writing");
  }
  void magic(const std::array<char, 4>& m) { out_.write(m.data(), 4); }
  void u32(std::uint32_t v) {
    std::array<unsigned char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b.data()), 4);
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b.data()), 8);
  }
  void finish() {
    out_.flush();
    if (!out_) throw FormatError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open " + path.string());
  }
  void magic(const std::array<char, 4>& m) {
    std::array<char, 4> got{};
    read(got.data(), 4);
    if (got != m) {
      throw FormatError(path_.string() + ": bad magic, expected '" + std::string(m.data(), 4) + "'");
    }
  }
  std::uint32_t u32() {
    std::array<unsigned char, 4> b{};
    read(reinterpret_cast<char*>(b.data()), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    std::array<unsigned char, 8> b{};
    read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError(path_.string() + ": trailing bytes after payload");
    }
  }

 private:
  void read(char* dst, std::streamsize n) {
    in_.read(dst, n);
    if (in_.gcount() != n) throw FormatError(path_.string() + ": truncated file");
  }
  std::ifstream in_;
  fs::path path_;
};

int as_index(double v, const std::string& what) {
  if (!(v == std::floor(v)) || std::abs(v) > 1e9) throw FormatError(what + ": non-integer index");
  return static_cast<int>(v);
}

// Convert library validation failures into format errors for file inputs.
template <typename F>
auto checked(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw FormatError(what + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(what + ": missing key '" + key + "'");
  return j.at(key);
}

}  // namespace

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

json matrix_to_json(const MatX& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

MatX matrix_from_json(const json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected a nested array");
  const Index n = static_cast<Index>(j.size());
  if (rows >= 0 && n != rows) {
    throw FormatError(what + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(n));
  }
  if (n == 0) return MatX(0, std::max<Index>(cols, 0));
  const Index c = cols >= 0 ? cols : static_cast<Index>(j[0].size());
  MatX m(n, c);
  for (Index i = 0; i < n; ++i) {
    const json& r = j[i];
    if (!r.is_array() || static_cast<Index>(r.size()) != c) {
      throw FormatError(what + ": row " + std::to_string(i) + " must have " + std::to_string(c) + " entries");
    }
    for (Index k = 0; k < c; ++k) {
      if (!r[k].is_number()) throw FormatError(what + ": non-numeric entry");
      m(i, k) = r[k].get<double>();
    }
  }
  return m;
}

namespace {

VecX vector_from_json(const json& j, Index size, const std::string& what) {
  if (!j.is_array() || (size >= 0 && static_cast<Index>(j.size()) != size)) {
    throw FormatError(what + ": expected an array of " + std::to_string(size) + " numbers");
  }
  VecX v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(what + ": non-numeric entry");
    v[i] = j[i].get<double>();
  }
  return v;
}

json vector_to_json(const VecX& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

// ---- body template -------------------------------------------------------

void write_template_binary(const fs::path& path, const BodyTemplate& t) {
  t.validate();
  Writer w(path);
  w.magic(kTemplateMagic);
  w.u32(kTemplateVersion);
  const auto v = static_cast<std::uint32_t>(t.num_vertices());
  const auto f = static_cast<std::uint32_t>(t.num_faces());
  const auto nj = static_cast<std::uint32_t>(t.num_joints());
  const auto nb = static_cast<std::uint32_t>(t.num_betas());
  w.u32(v);
  w.u32(f);
  w.u32(nj);
  w.u32(nb);
  for (std::uint32_t i = 0; i < v; ++i) for (int c = 0; c < 3; ++c) w.f64(t.vertices_rest(i, c));
  for (std::uint32_t i = 0; i < f; ++i) for (int c = 0; c < 3; ++c) w.f64(t.faces(i, c));
  for (std::uint32_t i = 0; i < nj; ++i) for (int c = 0; c < 3; ++c) w.f64(t.joints_rest(i, c));
  for (std::uint32_t i = 0; i < nj; ++i) w.f64(t.parent[i]);
  for (std::uint32_t i = 0; i < v; ++i) for (std::uint32_t j = 0; j < nj; ++j) w.f64(t.blend_weights(i, j));
  for (std::uint32_t i = 0; i < v; ++i) {
    for (int c = 0; c < 3; ++c) {
      for (std::uint32_t k = 0; k < nb; ++k) w.f64(t.shape_basis[k](i, c));
    }
  }
  for (std::uint32_t j = 0; j < nj; ++j) for (std::uint32_t i = 0; i < v; ++i) w.f64(t.joint_regressor(j, i));
  w.finish();
}

BodyTemplate read_template_binary(const fs::path& path) {
  Reader r(path);
  r.magic(kTemplateMagic);
  const std::uint32_t version = r.u32();
  if (version != kTemplateVersion) {
    throw FormatError(path.string() + ": unsupported template version " + std::to_string(version));
  }
  const std::uint32_t v = r.u32(), f = r.u32(), nj = r.u32(), nb = r.u32();
  if (v == 0 || nj == 0 || v > 10'000'000 || f > 50'000'000 || nj > 1024 || nb > 1024) {
    throw FormatError(path.string() + ": implausible template dimensions");
  }
  BodyTemplate t;
  t.vertices_rest.resize(v, 3);
  t.faces.resize(f, 3);
  t.joints_rest.resize(nj, 3);
  t.parent.resize(nj);
  t.blend_weights.resize(v, nj);
  t.shape_basis.assign(nb, MatX3(v, 3));
  t.joint_regressor.resize(nj, v);
  const std::string what = path.string();
  for (std::uint32_t i = 0; i < v; ++i) for (int c = 0; c < 3; ++c) t.vertices_rest(i, c) = r.f64();
  for (std::uint32_t i = 0; i < f; ++i) for (int c = 0; c < 3; ++c) t.faces(i, c) = as_index(r.f64(), what);
  for (std::uint32_t i = 0; i < nj; ++i) for (int c = 0; c < 3; ++c) t.joints_rest(i, c) = r.f64();
  for (std::uint32_t i = 0; i < nj; ++i) t.parent[i] = as_index(r.f64(), what);
  for (std::uint32_t i = 0; i < v; ++i) for (std::uint32_t j = 0; j < nj; ++j) t.blend_weights(i, j) = r.f64();
  for (std::uint32_t i = 0; i < v; ++i) {
    for (int c = 0; c < 3; ++c) {
      for (std::uint32_t k = 0; k < nb; ++k) t.shape_basis[k](i, c) = r.f64();
    }
  }
  for (std::uint32_t j = 0; j < nj; ++j) for (std::uint32_t i = 0; i < v; ++i) t.joint_regressor(j, i) = r.f64();
  r.expect_end();
  checked(what, [&] { t.validate(); return 0; });
  return t;
}

json template_to_json(const BodyTemplate& t) {
  json j;
  j["format"] = "BPRT-json";
  j["version"] = kTemplateVersion;
  j["vertices_rest"] = matrix_to_json(t.vertices_rest);
  j["faces"] = matrix_to_json(t.faces.cast<double>());
  j["joints_rest"] = matrix_to_json(t.joints_rest);
  j["parent"] = t.parent;
  j["blend_weights"] = matrix_to_json(t.blend_weights);
  json basis = json::array();
  for (Index i = 0; i < t.num_vertices(); ++i) {
    json per_vertex = json::array();
    for (int c = 0; c < 3; ++c) {
      json coeffs = json::array();
      for (int k = 0; k < t.num_betas(); ++k) coeffs.push_back(t.shape_basis[k](i, c));
      per_vertex.push_back(std::move(coeffs));
    }
    basis.push_back(std::move(per_vertex));
  }
  j["shape_basis"] = std::move(basis);
  j["joint_regressor"] = matrix_to_json(t.joint_regressor);
  return j;
}

BodyTemplate template_from_json(const json& j) {
  const std::string what = "template json";
  return checked(what, [&] {
    BodyTemplate t;
    t.vertices_rest = matrix_from_json(field(j, "vertices_rest", what), -1, 3, what + ".vertices_rest");
    const Index v = t.vertices_rest.rows();
    const MatX faces = matrix_from_json(field(j, "faces", what), -1, 3, what + ".faces");
    t.faces.resize(faces.rows(), 3);
    for (Index f = 0; f < faces.rows(); ++f) {
      for (int c = 0; c < 3; ++c) t.faces(f, c) = as_index(faces(f, c), what);
    }
    t.parent = field(j, "parent", what).get<std::vector<int>>();
    const auto nj = static_cast<Index>(t.parent.size());
    t.joints_rest = matrix_from_json(field(j, "joints_rest", what), nj, 3, what + ".joints_rest");
    t.blend_weights = matrix_from_json(field(j, "blend_weights", what), v, nj, what + ".blend_weights");
    const json& basis = field(j, "shape_basis", what);
    if (!basis.is_array() || static_cast<Index>(basis.size()) != v) {
      throw FormatError(what + ".shape_basis: expected V entries");
    }
    const std::size_t nb = v > 0 && basis[0].is_array() && !basis[0].empty() ? basis[0][0].size() : 0;
    t.shape_basis.assign(nb, MatX3(v, 3));
    for (Index i = 0; i < v; ++i) {
      const MatX per_vertex = matrix_from_json(basis[i], 3, static_cast<Index>(nb), what + ".shape_basis");
      for (int c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < nb; ++k) t.shape_basis[k](i, c) = per_vertex(c, static_cast<Index>(k));
      }
    }
    t.joint_regressor = matrix_from_json(field(j, "joint_regressor", what), nj, v, what + ".joint_regressor");
    t.validate();
    return t;
  });
}

void save_template(const fs::path& path, const BodyTemplate& tmpl) {
  if (path.extension() == ".json") {
    write_json(path, template_to_json(tmpl));
  } else {
    write_template_binary(path, tmpl);
  }
}

BodyTemplate load_template(const fs::path& path) {
  if (path.extension() == ".json") return template_from_json(read_json(path));
  return read_template_binary(path);
}

// ---- pose, assignment, planes, camera ------------------------------------

json pose_to_json(const PoseShape& ps, const Vec3& trans) {
  json j;
  j["theta"] = matrix_to_json(ps.theta);
  j["beta"] = vector_to_json(ps.beta);
  j["trans"] = vector_to_json(trans);
  return j;
}

PoseFile pose_from_json(const json& j) {
  const std::string what = "pose json";
  return checked(what, [&] {
    PoseFile p;
    p.pose.theta = matrix_from_json(field(j, "theta", what), kNumJoints, 3, what + ".theta");
    p.pose.beta = vector_from_json(field(j, "beta", what), kNumBetas, what + ".beta");
    if (j.contains("trans")) p.trans = vector_from_json(j["trans"], 3, what + ".trans");
    p.pose.validate();
    if (!p.trans.allFinite()) throw FormatError(what + ": non-finite translation");
    return p;
  });
}

void save_pose(const fs::path& path, const PoseShape& ps, const Vec3& trans) {
  write_json(path, pose_to_json(ps, trans));
}

PoseFile load_pose(const fs::path& path) {
  try {
    return pose_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json assignment_to_json(const PartAssignment& a) {
  return json{{"part_of_vertex", a.part_of_vertex}};
}

PartAssignment assignment_from_json(const json& j) {
  return checked("assignment json", [&] {
    PartAssignment a;
    a.part_of_vertex = field(j, "part_of_vertex", "assignment json").get<std::vector<int>>();
    for (int p : a.part_of_vertex) require(p >= 0 && p < kNumJoints, "part index out of range");
    return a;
  });
}

void save_assignment(const fs::path& path, const PartAssignment& a) {
  write_json(path, assignment_to_json(a));
}

PartAssignment load_assignment(const fs::path& path) { return assignment_from_json(read_json(path)); }

json rd_to_json(const RelativeDepth& rd) { return json{{"rd", matrix_to_json(rd.rd)}}; }

RelativeDepth rd_from_json(const json& j) {
  RelativeDepth rd;
  rd.rd = matrix_from_json(field(j, "rd", "rd json"), kNumJoints, 3, "rd json.rd");
  return rd;
}

json planes_to_json(const ReferencePlanes& planes) {
  const auto one = [](const Plane& p) {
    json pts = json::array();
    for (const auto& q : p.points) pts.push_back({q.x(), q.y(), q.z()});
    return json{{"normal", {p.normal.x(), p.normal.y(), p.normal.z()}},
                {"offset", p.offset},
                {"points", pts}};
  };
  return json{{"frontal", one(planes.frontal)},
              {"side", one(planes.side)},
              {"cross_section", one(planes.cross_section)}};
}

json camera_to_json(const WeakPerspectiveCamera& cam) {
  return json{{"s", cam.s}, {"t", {cam.t.x(), cam.t.y()}}, {"R", matrix_to_json(cam.R)}};
}

WeakPerspectiveCamera camera_from_json(const json& j) {
  const std::string what = "camera json";
  return checked(what, [&] {
    WeakPerspectiveCamera cam;
    const json& s = field(j, "s", what);
    if (!s.is_number()) throw FormatError(what + ".s: expected a number");
    cam.s = s.get<double>();
    cam.t = vector_from_json(field(j, "t", what), 2, what + ".t");
    cam.R = matrix_from_json(field(j, "R", what), 3, 3, what + ".R");
    cam.validate();
    return cam;
  });
}

// ---- feature maps and label maps -----------------------------------------

void write_feature_map(const fs::path& path, const FeatureMap& fm) {
  fm.validate();
  Writer w(path);
  w.magic(kFeatureMagic);
  w.u32(static_cast<std::uint32_t>(fm.height));
  w.u32(static_cast<std::uint32_t>(fm.width));
  w.u32(static_cast<std::uint32_t>(fm.channels));
  for (double x : fm.data) w.f64(x);
  w.finish();
}

FeatureMap read_feature_map(const fs::path& path) {
  Reader r(path);
  r.magic(kFeatureMagic);
  const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0 || static_cast<std::uint64_t>(h) * w * c > 100'000'000ULL) {
    throw FormatError(path.string() + ": implausible feature map dimensions");
  }
  FeatureMap fm(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (double& x : fm.data) x = r.f64();
  r.expect_end();
  checked(path.string(), [&] { fm.validate(); return 0; });
  return fm;
}

json feature_map_to_json(const FeatureMap& fm) {
  json rows = json::array();
  for (int h = 0; h < fm.height; ++h) {
    json row = json::array();
    for (int w = 0; w < fm.width; ++w) {
      json px = json::array();
      for (int c = 0; c < fm.channels; ++c) px.push_back(fm.at(h, w, c));
      row.push_back(std::move(px));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

FeatureMap feature_map_from_json(const json& j) {
  const std::string what = "feature map json";
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty() || !j[0][0].is_array() ||
      j[0][0].empty()) {
    throw FormatError(what + ": expected a non-empty H×W×C nested array");
  }
  const int h = static_cast<int>(j.size()), w = static_cast<int>(j[0].size()),
            c = static_cast<int>(j[0][0].size());
  FeatureMap fm(h, w, c);
  for (int y = 0; y < h; ++y) {
    if (!j[y].is_array() || static_cast<int>(j[y].size()) != w) throw FormatError(what + ": ragged rows");
    for (int x = 0; x < w; ++x) {
      const json& px = j[y][x];
      if (!px.is_array() || static_cast<int>(px.size()) != c) throw FormatError(what + ": ragged channels");
      for (int k = 0; k < c; ++k) {
        if (!px[k].is_number()) throw FormatError(what + ": non-numeric entry");
        fm.at(y, x, k) = px[k].get<double>();
      }
    }
  }
  checked(what, [&] { fm.validate(); return 0; });
  return fm;
}

json label_map_to_json(const LabelMap& m) {
  json rows = json::array();
  for (int h = 0; h < m.height; ++h) {
    rows.push_back(std::vector<int>(m.labels.begin() + static_cast<std::ptrdiff_t>(h) * m.width,
                                    m.labels.begin() + static_cast<std::ptrdiff_t>(h + 1) * m.width));
  }
  return json{{"height", m.height}, {"width", m.width}, {"labels", rows}};
}

LabelMap label_map_from_json(const json& j) {
  const std::string what = "label map json";
  return checked(what, [&] {
    const json& rows = j.is_object() ? field(j, "labels", what) : j;
    if (!rows.is_array() || rows.empty()) throw FormatError(what + ": expected H rows");
    LabelMap m;
    m.height = static_cast<int>(rows.size());
    m.width = static_cast<int>(rows[0].size());
    for (const auto& r : rows) {
      if (!r.is_array() || static_cast<int>(r.size()) != m.width) throw FormatError(what + ": ragged rows");
      for (const auto& v : r) m.labels.push_back(v.get<int>());
    }
    if (m.width == 0) throw FormatError(what + ": empty rows");
    return m;
  });
}

void write_label_png(const fs::path& path, const LabelMap& m) {
  require(m.height >= 1 && m.width >= 1, "write_label_png: empty map");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (fp == nullptr) throw FormatError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FormatError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(m.width), static_cast<png_uint_32>(m.height), 8,
               PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // Background black, parts on a fixed hue wheel.
  std::array<png_color, 256> palette{};
  for (int i = 1; i < 256; ++i) {
    const int k = (i - 1) % kNumJoints;
    palette[i].red = static_cast<png_byte>(40 + (k * 97) % 216);
    palette[i].green = static_cast<png_byte>(40 + (k * 53 + 80) % 216);
    palette[i].blue = static_cast<png_byte>(40 + (k * 151 + 160) % 216);
  }
  png_set_PLTE(png, info, palette.data(), 256);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(m.width));
  for (int h = 0; h < m.height; ++h) {
    for (int w = 0; w < m.width; ++w) row[w] = static_cast<png_byte>(std::clamp(m.at(h, w), 0, 255));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// ---- reports -------------------------------------------------------------

json loss_report_to_json(const LossReport& r) {
  return json{{"l_2d", r.l_2d},       {"l_3d", r.l_3d},       {"l_smpl", r.l_smpl},
              {"l_rd", r.l_rd},       {"l_bseg", r.l_bseg},   {"l_pseg", r.l_pseg},
              {"l_aux2d", r.l_aux2d}, {"l_aux3d", r.l_aux3d}, {"l_afe", r.l_afe},
              {"l_bar", r.l_bar},     {"l_total", r.l_total}};
}

json metric_report_to_json(const MetricReport& r) {
  json parts = json::object();
  for (const auto& [k, v] : r.per_part_mje) parts[k] = v;
  return json{{"mje", r.mje},
              {"pamje", r.pamje},
              {"pve", r.pve},
              {"axis_mje", {r.axis_mje.x(), r.axis_mje.y(), r.axis_mje.z()}},
              {"per_part_mje", parts},
              {"n_samples", r.n_samples},
              {"units", "mm"}};
}

LossWeights loss_weights_from_json(const json& j) {
  const std::string what = "loss weights json";
  return checked(what, [&] {
    LossWeights w;
    if (!j.is_object()) throw FormatError(what + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number()) throw FormatError(what + ": '" + key + "' must be a number");
      const double v = value.get<double>();
      if (key == "lambda_2d") w.lambda_2d = v;
      else if (key == "lambda_3d") w.lambda_3d = v;
      else if (key == "lambda_smpl") w.lambda_smpl = v;
      else if (key == "lambda_rd") w.lambda_rd = v;
      else if (key == "lambda_att") w.lambda_att = v;
      else throw FormatError(what + ": unknown key '" + key + "'");
    }
    w.validate();
    return w;
  });
}

namespace {

KeypointSet keypoints_from_json(const json& j, Index dim, const std::string& what) {
  const MatX m = matrix_from_json(j, -1, dim + 1, what);
  KeypointSet k{m.leftCols(dim), m.col(dim)};
  k.validate();
  return k;
}

}  // namespace

Predictions predictions_from_json(const json& j) {
  const std::string what = "prediction json";
  return checked(what, [&] {
    Predictions p;
    p.j2d = matrix_from_json(field(j, "j2d", what), -1, 2, what + ".j2d");
    p.j3d = matrix_from_json(field(j, "j3d", what), -1, 3, what + ".j3d");
    p.aux_j2d = j.contains("aux_j2d") ? matrix_from_json(j["aux_j2d"], -1, 2, what + ".aux_j2d") : p.j2d;
    p.aux_j3d = j.contains("aux_j3d") ? matrix_from_json(j["aux_j3d"], -1, 3, what + ".aux_j3d") : p.j3d;
    p.pose = pose_from_json(j).pose;
    p.rd = rd_from_json(j);
    if (j.contains("body_logits")) p.body_logits = feature_map_from_json(j["body_logits"]);
    if (j.contains("part_logits")) p.part_logits = feature_map_from_json(j["part_logits"]);
    return p;
  });
}

GroundTruth ground_truth_from_json(const json& j) {
  const std::string what = "ground truth json";
  return checked(what, [&] {
    GroundTruth g;
    g.j2d = keypoints_from_json(field(j, "j2d", what), 2, what + ".j2d");
    g.j3d = keypoints_from_json(field(j, "j3d", what), 3, what + ".j3d");
    g.pose = pose_from_json(j).pose;
    g.rd = rd_from_json(j);
    if (j.contains("body_seg")) g.body_seg = label_map_from_json(j["body_seg"]);
    if (j.contains("part_seg")) g.part_seg = label_map_from_json(j["part_seg"]);
    return g;
  });
}

namespace {

json keypoints_to_json(const KeypointSet& k) {
  MatX m(k.coords.rows(), k.coords.cols() + 1);
  m << k.coords, k.confidence;
  return matrix_to_json(m);
}

}  // namespace

json predictions_to_json(const Predictions& p) {
  json j = pose_to_json(p.pose);
  j.erase("trans");
  j["j2d"] = matrix_to_json(p.j2d);
  j["j3d"] = matrix_to_json(p.j3d);
  j["aux_j2d"] = matrix_to_json(p.aux_j2d);
  j["aux_j3d"] = matrix_to_json(p.aux_j3d);
  j["rd"] = matrix_to_json(p.rd.rd);
  if (p.body_logits) j["body_logits"] = feature_map_to_json(*p.body_logits);
  if (p.part_logits) j["part_logits"] = feature_map_to_json(*p.part_logits);
  return j;
}

json ground_truth_to_json(const GroundTruth& g) {
  json j = pose_to_json(g.pose);
  j.erase("trans");
  j["j2d"] = keypoints_to_json(g.j2d);
  j["j3d"] = keypoints_to_json(g.j3d);
  j["rd"] = matrix_to_json(g.rd.rd);
  if (g.body_seg) j["body_seg"] = label_map_to_json(*g.body_seg);
  if (g.part_seg) j["part_seg"] = label_map_to_json(*g.part_seg);
  return j;
}

// ---- checkpoints ---------------------------------------------------------

namespace {

struct TensorSlot {
  std::string name;
  MatX* matrix = nullptr;
  VecX* vector = nullptr;
};

void append_block(std::vector<TensorSlot>& s, const std::string& prefix, AttentionBlockParams& b) {
  s.push_back({prefix + ".wq", &b.wq, nullptr});
  s.push_back({prefix + ".wk", &b.wk, nullptr});
  s.push_back({prefix + ".wv", &b.wv, nullptr});
  s.push_back({prefix + ".ln1.gain", nullptr, &b.ln1.gain});
  s.push_back({prefix + ".ln1.bias", nullptr, &b.ln1.bias});
  s.push_back({prefix + ".ln2.gain", nullptr, &b.ln2.gain});
  s.push_back({prefix + ".ln2.bias", nullptr, &b.ln2.bias});
}

void append_linear(std::vector<TensorSlot>& s, const std::string& prefix, Linear& l) {
  s.push_back({prefix + ".weight", &l.weight, nullptr});
  s.push_back({prefix + ".bias", nullptr, &l.bias});
}

std::vector<TensorSlot> slots(BodyAwareModel& m) {
  std::vector<TensorSlot> s;
  append_linear(s, "embed", m.embed);
  append_block(s, "encoder.0", m.encoder[0]);
  append_block(s, "encoder.1", m.encoder[1]);
  append_block(s, "head.block", m.head.block);
  append_linear(s, "head.rotation", m.head.rotation);
  append_linear(s, "head.depth", m.head.depth);
  append_linear(s, "head.shape", m.head.shape);
  append_linear(s, "head.camera", m.head.camera);
  return s;
}

std::string scale_name(ScaleMode m) {
  return m == ScaleMode::kKeyDim ? "key_dim" : "sequence_length";
}

}  // namespace

void save_checkpoint(const fs::path& dir, const BodyAwareModel& model) {
  fs::create_directories(dir);
  BodyAwareModel copy = model;
  json tensors = json::object();
  for (const auto& slot : slots(copy)) {
    const std::string file = slot.name + ".bprf";
    FeatureMap fm;
    if (slot.matrix != nullptr) {
      fm = FeatureMap(static_cast<int>(slot.matrix->rows()), static_cast<int>(slot.matrix->cols()), 1);
      for (Index i = 0; i < slot.matrix->rows(); ++i) {
        for (Index k = 0; k < slot.matrix->cols(); ++k) fm.at(static_cast<int>(i), static_cast<int>(k), 0) = (*slot.matrix)(i, k);
      }
    } else {
      fm = FeatureMap(static_cast<int>(slot.vector->size()), 1, 1);
      for (Index i = 0; i < slot.vector->size(); ++i) fm.at(static_cast<int>(i), 0, 0) = (*slot.vector)[i];
    }
    write_feature_map(dir / file, fm);
    tensors[slot.name] = file;
  }
  const ModelConfig& c = model.config;
  json manifest{{"format", "partreg-checkpoint"},
                {"version", 1},
                {"config",
                 {{"token_dim", c.token_dim},
                  {"hidden", c.hidden},
                  {"key_dim", c.key_dim},
                  {"heads", c.heads},
                  {"scale", scale_name(c.scale)}}},
                {"tensors", tensors}};
  write_json(dir / "manifest.json", manifest);
}

BodyAwareModel load_checkpoint(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const std::string what = (dir / "manifest.json").string();
  return checked(what, [&] {
    if (manifest.value("format", "") != "partreg-checkpoint" || manifest.value("version", 0) != 1) {
      throw FormatError(what + ": not a version-1 partreg checkpoint");
    }
    const json& cfg = field(manifest, "config", what);
    ModelConfig c;
    c.token_dim = cfg.at("token_dim").get<Index>();
    c.hidden = cfg.at("hidden").get<Index>();
    c.key_dim = cfg.at("key_dim").get<Index>();
    c.heads = cfg.at("heads").get<int>();
    const std::string scale = cfg.at("scale").get<std::string>();
    if (scale == "key_dim") c.scale = ScaleMode::kKeyDim;
    else if (scale == "sequence_length") c.scale = ScaleMode::kSequenceLength;
    else throw FormatError(what + ": unknown scale mode '" + scale + "'");
    if (c.token_dim < 1 || c.hidden < 1 || c.key_dim < 1 || c.heads < 1) {
      throw FormatError(what + ": non-positive dimensions");
    }

    // Shapes come from a fresh model with the same configuration.
    BodyAwareModel m = init_model(c, 0);
    const json& tensors = field(manifest, "tensors", what);
    for (auto& slot : slots(m)) {
      if (!tensors.contains(slot.name)) throw FormatError(what + ": missing tensor " + slot.name);
      const FeatureMap fm = read_feature_map(dir / tensors[slot.name].get<std::string>());
      if (slot.matrix != nullptr) {
        if (fm.height != slot.matrix->rows() || fm.width != slot.matrix->cols() || fm.channels != 1) {
          throw FormatError(what + ": tensor " + slot.name + " has the wrong shape");
        }
        for (Index i = 0; i < slot.matrix->rows(); ++i) {
          for (Index k = 0; k < slot.matrix->cols(); ++k) (*slot.matrix)(i, k) = fm.at(static_cast<int>(i), static_cast<int>(k), 0);
        }
      } else {
        if (fm.height != slot.vector->size() || fm.width != 1 || fm.channels != 1) {
          throw FormatError(what + ": tensor " + slot.name + " has the wrong shape");
        }
        for (Index i = 0; i < slot.vector->size(); ++i) (*slot.vector)[i] = fm.at(static_cast<int>(i), 0, 0);
      }
    }
    for (const auto* b : {&m.encoder[0], &m.encoder[1], &m.head.block}) b->validate();
    return m;
  });
}

}  // namespace partreg::io
