#include "linet/image.hpp"

namespace linet {

double image_l1(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("image_l1: images differ in shape");
  if (a.size() == 0) return 0.0;
  return (a.array().cast<double>() - b.array().cast<double>()).abs().sum() / double(a.size());
}

Image to_grayscale(const Image& im) {
  if (im.channels() == 1) return im;
  if (im.channels() != 3) throw ShapeMismatch("to_grayscale expects 1 or 3 channels");
  Image out(1, im.height(), im.width());
  for (int y = 0; y < im.height(); ++y)
    for (int x = 0; x < im.width(); ++x)
      out(0, y, x) = float(0.299 * im(0, y, x) + 0.587 * im(1, y, x) + 0.114 * im(2, y, x));
  return out;
}

Image mirror_horizontal(const Image& im) {
  Image out(im.channels(), im.height(), im.width());
  for (int c = 0; c < im.channels(); ++c)
    for (int y = 0; y < im.height(); ++y)
      for (int x = 0; x < im.width(); ++x) out(c, y, x) = im(c, y, im.width() - 1 - x);
  return out;
}

}  // namespace linet
