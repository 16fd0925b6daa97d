#pragma once

#include <array>
#include <string>
#include <vector>

namespace ctct {

// Grayscale raster, row-major float intensities in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.f)
      : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

  float& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }

  bool same_size(const Image& o) const { return height == o.height && width == o.width; }
};

// 3x3 projective transform, row-major. Maps source -> destination coordinates
// (x, y, 1) with x = column, y = row.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography translation(double dx, double dy);
  static Homography rotation_deg(double degrees, double cx, double cy);
  static Homography shear_x(double factor, double cy);
  static Homography scale(double sx, double sy);
  // Homography mapping the unit corners of a w x h rectangle to four
  // jittered destination corners (dx/dy offsets per corner, order
  // TL, TR, BR, BL). Throws if the system is degenerate.
  static Homography from_corner_offsets(int w, int h, const std::array<double, 8>& offsets);

  double det() const;
  Homography inverse() const;           // throws Error{SingularHomography}
  Homography compose(const Homography& inner) const;  // this after inner
  void apply(double x, double y, double& ox, double& oy) const;
};

Image rgb_to_gray(const Image& r, const Image& g, const Image& b);
Image resize_fixed_height(const Image& img, int target_h);
// General bilinear resize to explicit dimensions.
Image resize_bilinear(const Image& img, int out_h, int out_w);
// Inverse-mapped bilinear warp; out-of-bounds source reads return `fill`.
Image warp_perspective(const Image& img, const Homography& h, float fill);
Image alpha_composite(const Image& fg, const Image& alpha, const Image& bg);

}  // namespace ctct
