#pragma once

#include <vector>

#include <Eigen/Core>

#include "linet/tensor.hpp"

namespace linet {

/// Planar C x H x W float image with values nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width),
        data_(Eigen::ArrayXf::Constant(Eigen::Index(channels) * height * width, fill)) {}

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index size() const { return data_.size(); }
  bool same_shape(const Image& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  float& operator()(int c, int y, int x) { return data_[(Eigen::Index(c) * height_ + y) * width_ + x]; }
  float operator()(int c, int y, int x) const { return data_[(Eigen::Index(c) * height_ + y) * width_ + x]; }

  Eigen::ArrayXf& array() { return data_; }
  const Eigen::ArrayXf& array() const { return data_; }

  bool operator==(const Image& o) const { return same_shape(o) && (data_ == o.data_).all(); }

 private:
  int channels_ = 0, height_ = 0, width_ = 0;
  Eigen::ArrayXf data_;
};

/// Single-channel R x R rasterized landmark drawing.
using LandmarkImage = Image;
/// Three-channel RGB face.
using FaceImage = Image;

/// Mean absolute pixel difference, accumulated in double.
double image_l1(const Image& a, const Image& b);

/// Stacks equally shaped images into an (N, C, H, W) tensor.
template <typename Scalar>
Tensor<Scalar> stack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeMismatch("stack_images: empty batch");
  const Image& first = *images.front();
  Tensor<Scalar> t(Shape{int(images.size()), first.channels(), first.height(), first.width()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i]->same_shape(first)) throw ShapeMismatch("stack_images: mixed shapes");
    t.rows().row(Eigen::Index(i)) = images[i]->array().template cast<Scalar>().matrix().transpose();
  }
  return t;
}

template <typename Scalar>
Tensor<Scalar> stack_images(const std::vector<Image>& images) {
  std::vector<const Image*> ptrs;
  for (const auto& im : images) ptrs.push_back(&im);
  return stack_images<Scalar>(ptrs);
}

template <typename Scalar>
Image tensor_to_image(const Tensor<Scalar>& t, int n) {
  const Shape s = t.shape();
  Image im(s.c, s.h, s.w);
  im.array() = t.rows().row(n).transpose().array().template cast<float>();
  return im;
}

/// Rec. 601 luma of an RGB image; single-channel images pass through.
Image to_grayscale(const Image& im);

/// Left-right mirror.
Image mirror_horizontal(const Image& im);

}  // namespace linet
