#pragma once

#include <filesystem>
#include <string>

#include "partreg/rng.hpp"
#include "partreg/synthgen.hpp"

namespace partreg::test {

inline const GeneratedModel& default_model() {
  static const GeneratedModel m = gen_template(GenSpec{});
  return m;
}

inline MatX random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  MatX m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Vec3 random_vec3(Rng& rng, double scale = 1.0) {
  return scale * Vec3(rng.normal(), rng.normal(), rng.normal());
}

inline Mat3 random_rotation(Rng& rng) {
  const Vec3 axis = random_vec3(rng).normalized();
  return Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), axis).toRotationMatrix();
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("partreg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace partreg::test
