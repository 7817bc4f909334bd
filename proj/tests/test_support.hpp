#pragma once

// Shared fixtures: tiny network configs and a lookup oracle over factorial
// synthetic data.

#include <map>
#include <string>
#include <tuple>

#include "linet/dataset.hpp"
#include "linet/expression_generator.hpp"
#include "linet/face_rotation.hpp"
#include "linet/landmark_transformer.hpp"
#include "linet/network_blocks.hpp"

namespace linet::testing {

inline BlockConfig tiny_blocks(int size, int stages, int width, int res_blocks = 1) {
  BlockConfig c;
  c.input_size = size;
  c.stages = stages;
  c.base_width = width;
  c.max_width = 4 * width;
  c.res_blocks = res_blocks;
  return c;
}

inline TransformerConfig tiny_transformer(int size = 32, int classes = 3) {
  TransformerConfig cfg;
  cfg.blocks = tiny_blocks(size, 2, 4);
  cfg.classifier = tiny_blocks(size, 2, 4);
  cfg.discriminator = tiny_blocks(size, 2, 4);
  cfg.identity_classes = classes;
  cfg.id_feature_dim = 8;
  return cfg;
}

inline RotationConfig tiny_rotation(int size = 32) {
  RotationConfig cfg;
  cfg.image = tiny_blocks(size, 2, 4);
  cfg.pose = tiny_blocks(size, 2, 4);
  cfg.pose_dim = 6;
  cfg.discriminator = tiny_blocks(size, 2, 4);
  cfg.pose_discriminator = tiny_blocks(size, 2, 4);
  return cfg;
}

inline GeneratorConfig tiny_generator(int size = 32) {
  GeneratorConfig cfg;
  cfg.blocks = tiny_blocks(size, 2, 4, 1);
  cfg.expression = tiny_blocks(size, 2, 4);
  cfg.style_dim = 6;
  cfg.discriminator = tiny_blocks(size, 2, 4);
  return cfg;
}

/// Small factorial set shared by tests; built once.
inline const Dataset& small_dataset() {
  static const Dataset ds = make_synthetic_dataset({4, 3, 3, 32, 5, 1});
  return ds;
}

inline std::string image_key(const Image& im) {
  return std::string(reinterpret_cast<const char*>(im.array().data()), std::size_t(im.size()) * sizeof(float));
}

/// Maps every landmark image of a dataset back to its (identity, expression, pose).
class LandmarkOracle {
 public:
  explicit LandmarkOracle(const Dataset& ds) : ds_(ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& r = ds.record(i);
      table_[image_key(ds.landmark_image(i))] = {r.identity, r.expression, r.pose};
    }
  }

  std::tuple<int, int, int> label(const Image& im) const { return table_.at(image_key(im)); }

  /// T*(a, b): identity of a with the motion of b, for every batch entry.
  template <typename Scalar>
  Var<Scalar> operator()(const Var<Scalar>& a, const Var<Scalar>& b) const {
    std::vector<const Image*> out;
    for (int n = 0; n < a.shape().n; ++n) {
      const auto [ia, ea, pa] = label(tensor_to_image(a.value(), n));
      const auto [ib, eb, pb] = label(tensor_to_image(b.value(), n));
      (void)ea, (void)pa, (void)ib;
      out.push_back(&ds_.landmark_image(ds_.at(ia, eb, pb)));
    }
    return Var<Scalar>(stack_images<Scalar>(out));
  }

 private:
  const Dataset& ds_;
  std::map<std::string, std::tuple<int, int, int>> table_;
};

}  // namespace linet::testing
