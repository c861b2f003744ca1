#include "hsn/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hsn/error.hpp"

namespace hsn {

namespace {

std::vector<uint8_t> read_maybe_gzip(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");  // reads plain files transparently
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> out;
  std::vector<uint8_t> chunk(1 << 16);
  int n;
  while ((n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()))) > 0) out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError("corrupt gzip stream in '" + path + "'");
  return out;
}

uint32_t be32(const std::vector<uint8_t>& b, size_t at) {
  if (at + 4 > b.size()) throw FormatError("IDX header truncated");
  return uint32_t(b[at]) << 24 | uint32_t(b[at + 1]) << 16 | uint32_t(b[at + 2]) << 8 | uint32_t(b[at + 3]);
}

double pixel(std::span<const float> image, size_t rows, size_t cols, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return 0.0;
  return image[r * cols + c];
}

// bilinear read at fractional pixel coordinates (pixel centres at integers)
double bilinear(std::span<const float> image, size_t rows, size_t cols, double r, double c) {
  const double r0 = std::floor(r), c0 = std::floor(c);
  const double fr = r - r0, fc = c - c0;
  const long R = static_cast<long>(r0), C = static_cast<long>(c0);
  return (1 - fr) * ((1 - fc) * pixel(image, rows, cols, R, C) + fc * pixel(image, rows, cols, R, C + 1)) +
         fr * ((1 - fc) * pixel(image, rows, cols, R + 1, C) + fc * pixel(image, rows, cols, R + 1, C + 1));
}

double smooth_step(double s, double width) { return 0.5 * (1.0 + std::tanh(s / width)); }

}  // namespace

ImageSet read_idx_images(const std::string& path) {
  const auto b = read_maybe_gzip(path);
  if (be32(b, 0) != 0x803) throw FormatError("'" + path + "' is not an IDX image file");
  ImageSet set;
  const size_t n = be32(b, 4);
  set.rows = be32(b, 8);
  set.cols = be32(b, 12);
  if (b.size() != 16 + n * set.rows * set.cols) throw FormatError("IDX image payload size mismatch in '" + path + "'");
  set.pixels.assign(b.begin() + 16, b.end());
  return set;
}

std::vector<uint8_t> read_idx_labels(const std::string& path) {
  const auto b = read_maybe_gzip(path);
  if (be32(b, 0) != 0x801) throw FormatError("'" + path + "' is not an IDX label file");
  const size_t n = be32(b, 4);
  if (b.size() != 8 + n) throw FormatError("IDX label payload size mismatch in '" + path + "'");
  return {b.begin() + 8, b.end()};
}

std::vector<float> rotate_image(std::span<const uint8_t> image, size_t rows, size_t cols, double angle) {
  if (image.size() != rows * cols) throw ShapeError("image size does not match rows * cols");
  const std::vector<float> src(image.begin(), image.end());
  std::vector<float> out(rows * cols);
  const double cr = 0.5 * (rows - 1.0), cc = 0.5 * (cols - 1.0);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      // output (x, y) with y up; sample the source at the inverse rotation
      const double x = c - cc, y = cr - r;
      const double xs = ca * x + sa * y, ys = -sa * x + ca * y;
      out[r * cols + c] = static_cast<float>(bilinear(src, rows, cols, cr - ys, cc + xs));
    }
  return out;
}

std::pair<double, double> square_to_disc(double x, double y) {
  return {x * std::sqrt(1.0 - 0.5 * y * y), y * std::sqrt(1.0 - 0.5 * x * x)};
}

std::pair<double, double> disc_to_square(double u, double v) {
  const double s2 = 2.0 * std::numbers::sqrt2;
  const double a = 2.0 + u * u - v * v, b = 2.0 - u * u + v * v;
  auto root = [](double t) { return std::sqrt(std::max(t, 0.0)); };
  const double x = 0.5 * root(a + s2 * u) - 0.5 * root(a - s2 * u);
  const double y = 0.5 * root(b + s2 * v) - 0.5 * root(b - s2 * v);
  return {std::clamp(x, -1.0, 1.0), std::clamp(y, -1.0, 1.0)};
}

double sample_hemisphere(std::span<const float> image, size_t rows, size_t cols, const Vec3& p) {
  if (p.z() < 0.0) return 0.0;
  const auto [x, y] = disc_to_square(p.x(), p.y());
  // [-1, 1] spans the outer pixel edges
  const double c = 0.5 * (x + 1.0) * cols - 0.5;
  const double r = 0.5 * (1.0 - y) * rows - 0.5;
  return bilinear(image, rows, cols, r, c) / 255.0;
}

std::vector<double> sphere_mnist_build(std::span<const float> image, size_t rows, size_t cols,
                                       const TriangleMesh& sphere) {
  if (image.size() != rows * cols) throw ShapeError("image size does not match rows * cols");
  for (const auto& v : sphere.vertices)
    if (std::abs(v.norm() - 1.0) > 1e-6) throw GeometryError("sphere-MNIST needs a unit sphere centred at the origin");
  std::vector<double> out(sphere.n_vertices());
  for (size_t i = 0; i < out.size(); ++i) out[i] = sample_hemisphere(image, rows, cols, sphere.vertices[i]);
  return out;
}

std::vector<double> synthetic_edge_patterns(char pattern, const TriangleMesh& disc) {
  double radius = 0.0;
  for (const auto& v : disc.vertices) radius = std::max(radius, std::hypot(v.x(), v.y()));
  if (radius == 0.0) throw GeometryError("pattern mesh has no extent");
  const double w = 0.1 * radius, half_band = 0.25 * radius;
  std::vector<double> out(disc.n_vertices());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = disc.vertices[i].x(), y = disc.vertices[i].y();
    // coordinate across the edge, in the rotated frame of the pattern
    auto along = [&](double angle) { return std::cos(angle) * x + std::sin(angle) * y; };
    switch (pattern) {
      case 'a': out[i] = smooth_step(along(0.0), w); break;
      case 'b': out[i] = smooth_step(along(std::numbers::pi / 4), w); break;
      case 'c': out[i] = smooth_step(half_band - std::abs(along(0.0)), w); break;
      case 'd': out[i] = smooth_step(half_band - std::abs(along(std::numbers::pi / 2)), w); break;
      default: throw ShapeError(std::string("unknown pattern '") + pattern + "'");
    }
  }
  return out;
}

std::vector<double> sphere_mnist_digit(const ImageSet& images, size_t id, const TriangleMesh& sphere, double angle) {
  if (id >= images.count()) throw ShapeError("image " + std::to_string(id) + " out of range");
  const auto img = rotate_image(images.image(id), images.rows, images.cols, angle);
  return sphere_mnist_build(img, images.rows, images.cols, sphere);
}

double draw_angle(std::mt19937_64& rng) {
  return 2.0 * std::numbers::pi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SphereMnistSplit make_sphere_mnist(const ImageSet& images, std::span<const uint8_t> labels,
                                   const TriangleMesh& sphere, size_t n_train, size_t n_test, uint64_t seed,
                                   bool rotate) {
  if (labels.size() != images.count()) throw FormatError("image and label counts differ");
  if (n_train + n_test > images.count())
    throw ShapeError("requested " + std::to_string(n_train + n_test) + " digits, only " +
                     std::to_string(images.count()) + " available");
  std::mt19937_64 rng(seed);
  std::vector<size_t> order(images.count());
  for (size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
  SphereMnistSplit split;
  for (size_t k = 0; k < n_train + n_test; ++k) {
    const size_t id = order[k];
    const double angle = rotate ? draw_angle(rng) : 0.0;
    auto& dst = k < n_train ? split.train : split.test;
    dst.signals.push_back(sphere_mnist_digit(images, id, sphere, angle));
    dst.labels.push_back(labels[id]);
    dst.ids.push_back(id);
  }
  return split;
}

Augmentation draw_augmentation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.85, 1.15), angle(-std::numbers::pi / 8, std::numbers::pi / 8);
  Augmentation a;
  a.scale = scale(rng);
  a.angle = angle(rng);
  return a;
}

TriangleMesh apply_augmentation(const TriangleMesh& mesh, const Augmentation& aug) {
  const Eigen::Matrix3d R = Eigen::AngleAxisd(aug.angle, Vec3::UnitZ()).toRotationMatrix();
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = aug.scale * (R * v);
  return out;
}

TriangleMesh augment_shape(const TriangleMesh& mesh, std::mt19937_64& rng) {
  return apply_augmentation(mesh, draw_augmentation(rng));
}

std::vector<int> load_labels(const std::string& path, size_t expected, int n_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file '" + path + "'");
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream s(line);
    int v;
    if (!(s >> v)) throw FormatError("bad label '" + line + "' in '" + path + "'");
    if (v < 0 || v >= n_classes)
      throw FormatError("label " + std::to_string(v) + " out of range [0, " + std::to_string(n_classes) + ") in '" +
                        path + "'");
    labels.push_back(v);
  }
  if (labels.size() != expected)
    throw FormatError("'" + path + "' has " + std::to_string(labels.size()) + " labels, expected " +
                      std::to_string(expected));
  return labels;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::vector<ManifestEntry> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("path", 0) == 0)) continue;
    std::vector<std::string> cells;
    std::istringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3) throw FormatError("manifest line " + std::to_string(lineno) + ": expected path,label,split");
    rows.push_back({cells[0], cells[1], cells[2]});
  }
  return rows;
}

}  // namespace hsn
