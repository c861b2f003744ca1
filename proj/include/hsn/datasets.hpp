#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsn/mesh.hpp"

namespace hsn {

/// 8-bit grayscale images, row-major, row 0 at the top.
struct ImageSet {
  size_t rows = 0, cols = 0;
  std::vector<uint8_t> pixels;  // count * rows * cols
  size_t count() const { return rows && cols ? pixels.size() / (rows * cols) : 0; }
  std::span<const uint8_t> image(size_t k) const { return std::span(pixels).subspan(k * rows * cols, rows * cols); }
};

/// IDX image (magic 0x803) and label (0x801) files, gzip-compressed or plain.
ImageSet read_idx_images(const std::string& path);
std::vector<uint8_t> read_idx_labels(const std::string& path);

/// Rotates an image counter-clockwise by `angle` about its center, bilinear,
/// zero outside.
std::vector<float> rotate_image(std::span<const uint8_t> image, size_t rows, size_t cols, double angle);

/// Square [-1,1]^2 -> unit disc, (x sqrt(1 - y^2/2), y sqrt(1 - x^2/2)), and its inverse.
std::pair<double, double> square_to_disc(double x, double y);
std::pair<double, double> disc_to_square(double u, double v);

/// Image value seen at a point of the unit sphere: upper hemisphere points
/// project to the disc (u, v) = (x, y), pass through the inverse elliptical
/// map and are sampled bilinearly with pixel values scaled to [0, 1]; the
/// lower hemisphere is 0. Image x runs along columns, y up the rows.
double sample_hemisphere(std::span<const float> image, size_t rows, size_t cols, const Vec3& point);

/// Per-vertex signal of an image on a unit sphere. Throws GeometryError when
/// the mesh is not a unit sphere centred at the origin.
std::vector<double> sphere_mnist_build(std::span<const float> image, size_t rows, size_t cols,
                                       const TriangleMesh& sphere);

/// Fig. 5 inputs on a flat disc centred at the origin (smooth indicators, edge
/// width a tenth of the disc radius):
///  a  vertical edge (step across x = 0)      b  a rotated by 45 degrees
///  c  vertical band between two edges        d  c rotated by 90 degrees
std::vector<double> synthetic_edge_patterns(char pattern, const TriangleMesh& disc);

/// Rotated sphere-MNIST split: digits drawn without replacement by a seeded
/// permutation, each rotated in the image plane by an angle from U[0, 2 pi)
/// before mapping (rotations about the polar axis on the sphere).
struct DigitSignals {
  std::vector<std::vector<double>> signals;
  std::vector<int> labels;
  std::vector<size_t> ids;  // source image of each signal
};
struct SphereMnistSplit {
  DigitSignals train, test;
};
/// Signal of image `id` rotated by `angle` in the image plane.
std::vector<double> sphere_mnist_digit(const ImageSet& images, size_t id, const TriangleMesh& sphere, double angle);
/// Uniform angle in [0, 2 pi) from 53 random bits.
double draw_angle(std::mt19937_64& rng);

SphereMnistSplit make_sphere_mnist(const ImageSet& images, std::span<const uint8_t> labels,
                                   const TriangleMesh& sphere, size_t n_train, size_t n_test, uint64_t seed,
                                   bool rotate = true);

struct Augmentation {
  double scale = 1.0;  // U(0.85, 1.15)
  double angle = 0.0;  // U(-pi/8, pi/8), about the z axis
};
Augmentation draw_augmentation(std::mt19937_64& rng);
TriangleMesh apply_augmentation(const TriangleMesh& mesh, const Augmentation& aug);
TriangleMesh augment_shape(const TriangleMesh& mesh, std::mt19937_64& rng);

/// One label per line; exactly `expected` lines, each in [0, n_classes).
std::vector<int> load_labels(const std::string& path, size_t expected, int n_classes);

/// Manifest CSV rows: path,label,split (a header line starting with "path" is skipped).
/// `label` is a class id or, for segmentation, a label file path.
struct ManifestEntry {
  std::string path;
  std::string label;
  std::string split;
};
std::vector<ManifestEntry> load_manifest(const std::string& path);

}  // namespace hsn
