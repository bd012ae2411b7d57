#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedprune/tensor.hpp"

namespace fedprune {

/// Multi-label image set: images [N, C, H, W] in [0, 1], labels [N, L] in {0, 1}.
struct Dataset {
  Tensor images;
  Tensor labels;

  std::size_t size() const { return images.empty() ? 0 : images.dim(0); }
  std::size_t class_count() const { return labels.empty() ? 0 : labels.dim(1); }
  Shape image_shape() const {
    return Shape(images.shape().begin() + 1, images.shape().end());
  }

  Dataset subset(std::span<const std::size_t> indices) const;

  /// Throws InvalidArgument unless shapes agree, N >= 1, labels are binary,
  /// and every sample has at least one positive label.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

/// Server-side samples used to average component relevance.
using ReferenceSet = Dataset;

struct GeneratorConfig {
  std::size_t samples = 1;
  std::size_t classes = 8;
  Shape image_shape{3, 32, 32};
  std::uint64_t prototype_seed = 0;
  std::uint64_t sample_seed = 1;
  double noise_sigma = 0.1;
  std::size_t max_positives = 3;
};

/// One blocky spatial pattern per class, values in [0, 1]: [L, C, H, W].
Tensor class_prototypes(std::size_t classes, const Shape& image_shape,
                        std::uint64_t seed);

/// Each sample gets 1..max_positives classes (the first uniform, later ones
/// biased toward the neighbouring class so labels co-occur); its image is the
/// clipped sum of those classes' prototypes plus Gaussian noise.
Dataset generate(const GeneratorConfig& config);

struct PartitionSpec {
  std::size_t clients = 1;
  double alpha = 1.0;  // Dirichlet concentration; small values mean strong skew
  std::uint64_t seed = 0;
};

/// Label-skewed split. Each client draws a class-prevalence vector from
/// Dirichlet(alpha); every client is seeded with one sample, then each
/// remaining sample goes to a client drawn with weight equal to the summed
/// prevalence of the sample's positive classes. Returns sorted index lists
/// that are disjoint and cover [0, N).
std::vector<std::vector<std::size_t>> partition_indices(const Dataset& data,
                                                        const PartitionSpec& spec);
std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec);

/// "FPDS" | version u16 | N u32 | C, H, W u16 | L u16 | images f32 |
/// labels as bits, row-major, LSB first. Little-endian.
std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace fedprune
