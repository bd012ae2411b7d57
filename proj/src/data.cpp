#include "fedprune/data.hpp"

#include <algorithm>
#include <cmath>

#include "fedprune/binary_io.hpp"
#include "fedprune/errors.hpp"
#include "fedprune/rng.hpp"

namespace fedprune {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const std::size_t n = size();
  Shape ishape = images.shape();
  Shape lshape = labels.shape();
  ishape[0] = indices.size();
  lshape[0] = indices.size();
  Tensor img(ishape), lab(lshape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) {
      throw InvalidArgument("subset index " + std::to_string(indices[i]) +
                            " out of range for " + std::to_string(n) + " samples");
    }
    std::ranges::copy(images.row(indices[i]), img.row(i).begin());
    std::ranges::copy(labels.row(indices[i]), lab.row(i).begin());
  }
  return {std::move(img), std::move(lab)};
}

void Dataset::validate() const {
  if (images.rank() != 4) {
    throw InvalidArgument("images must be [N,C,H,W], got " + shape_string(images.shape()));
  }
  if (labels.rank() != 2 || labels.dim(0) != images.dim(0)) {
    throw InvalidArgument("labels " + shape_string(labels.shape()) +
                          " do not match images " + shape_string(images.shape()));
  }
  if (size() == 0 || class_count() == 0) throw InvalidArgument("empty dataset");
  for (std::size_t i = 0; i < size(); ++i) {
    bool positive = false;
    for (float y : labels.row(i)) {
      if (y != 0.0f && y != 1.0f) {
        throw InvalidArgument("sample " + std::to_string(i) + " has a non-binary label");
      }
      positive = positive || y == 1.0f;
    }
    if (!positive) {
      throw InvalidArgument("sample " + std::to_string(i) + " has no positive label");
    }
  }
}

Tensor class_prototypes(std::size_t classes, const Shape& image_shape,
                        std::uint64_t seed) {
  if (classes == 0 || image_shape.size() != 3 || shape_size(image_shape) == 0) {
    throw InvalidArgument("prototype geometry needs L >= 1 and a [C,H,W] shape");
  }
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  // fine 2x2 cells at 32x32 and low contrast against the sample noise keep
  // the task from saturating within a default run
  const std::size_t cell = std::max<std::size_t>(1, std::min(h, w) / 16);
  const std::size_t gh = (h + cell - 1) / cell, gw = (w + cell - 1) / cell;

  Rng rng(derive_seed(seed, {0x70726f74}));
  Tensor out({classes, c, h, w});
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<float> grid(c * gh * gw, 0.0f);
    bool any = false;
    for (auto& v : grid) {
      if (rng.uniform() < 0.35) {
        v = static_cast<float>(rng.uniform(0.04, 0.1));
        any = true;
      }
    }
    if (!any) grid[rng.below(grid.size())] = 0.1f;
    auto dst = out.row(k);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          dst[(ch * h + y) * w + x] = grid[(ch * gh + y / cell) * gw + x / cell];
  }
  return out;
}

Dataset generate(const GeneratorConfig& config) {
  if (config.samples == 0 || config.classes == 0) {
    throw InvalidArgument("generate needs N >= 1 and L >= 1");
  }
  if (config.max_positives == 0) throw InvalidArgument("max_positives must be >= 1");
  if (config.noise_sigma < 0.0) throw InvalidArgument("noise_sigma must be >= 0");
  const Tensor protos = class_prototypes(config.classes, config.image_shape,
                                         config.prototype_seed);
  const std::size_t n = config.samples, classes = config.classes;
  const std::size_t pixels = shape_size(config.image_shape);

  Shape ishape{n};
  ishape.insert(ishape.end(), config.image_shape.begin(), config.image_shape.end());
  Dataset ds{Tensor(ishape), Tensor({n, classes})};
  Rng rng(derive_seed(config.sample_seed, {0x73616d70}));
  const std::size_t max_pos = std::min(config.max_positives, classes);
  for (std::size_t i = 0; i < n; ++i) {
    auto lab = ds.labels.row(i);
    const std::size_t k = 1 + rng.below(max_pos);
    std::size_t last = rng.below(classes);
    lab[last] = 1.0f;
    for (std::size_t drawn = 1; drawn < k;) {
      const std::size_t next = rng.uniform() < 0.5 ? (last + 1) % classes : rng.below(classes);
      if (lab[next] == 1.0f) continue;
      lab[next] = 1.0f;
      last = next;
      ++drawn;
    }
    auto img = ds.images.row(i);
    for (std::size_t c = 0; c < classes; ++c) {
      if (lab[c] != 1.0f) continue;
      auto p = protos.row(c);
      for (std::size_t j = 0; j < pixels; ++j) img[j] += p[j];
    }
    for (std::size_t j = 0; j < pixels; ++j) {
      double v = img[j];
      if (config.noise_sigma > 0.0) v += config.noise_sigma * rng.normal();
      img[j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> partition_indices(const Dataset& data,
                                                        const PartitionSpec& spec) {
  const std::size_t n = data.size(), k = spec.clients, classes = data.class_count();
  if (k == 0) throw InvalidArgument("partition needs at least one client");
  if (!(spec.alpha > 0.0)) throw InvalidArgument("Dirichlet alpha must be positive");
  if (n < k) {
    throw InvalidArgument("cannot split " + std::to_string(n) + " samples over " +
                          std::to_string(k) + " clients");
  }
  Rng rng(derive_seed(spec.seed, {0x70617274}));
  std::vector<std::vector<double>> prevalence(k);
  for (auto& p : prevalence) p = rng.dirichlet(classes, spec.alpha);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i].push_back(order[i]);

  std::vector<double> weight(k);
  for (std::size_t pos = k; pos < n; ++pos) {
    const std::size_t s = order[pos];
    auto lab = data.labels.row(s);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double w = 0.0;
      for (std::size_t c = 0; c < classes; ++c)
        if (lab[c] == 1.0f) w += prevalence[i][c];
      weight[i] = w;
      total += w;
    }
    std::size_t pick = k - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < k; ++i) {
        if (u < weight[i]) {
          pick = i;
          break;
        }
        u -= weight[i];
      }
    } else {
      pick = rng.below(k);
    }
    out[pick].push_back(s);
  }
  for (auto& v : out) std::ranges::sort(v);
  return out;
}

std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& idx : partition_indices(data, spec)) out.push_back(data.subset(idx));
  return out;
}

namespace {
constexpr std::uint16_t kDatasetVersion = 1;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  data.validate();
  const Shape& s = data.images.shape();
  for (std::size_t d = 1; d < 4; ++d) {
    if (s[d] > 0xffff) throw InvalidArgument("image dimension exceeds u16");
  }
  if (data.class_count() > 0xffff) throw InvalidArgument("class count exceeds u16");
  ByteWriter w;
  w.magic("FPDS");
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(s[0]));
  w.u16(static_cast<std::uint16_t>(s[1]));
  w.u16(static_cast<std::uint16_t>(s[2]));
  w.u16(static_cast<std::uint16_t>(s[3]));
  w.u16(static_cast<std::uint16_t>(data.class_count()));
  for (float v : data.images.data()) w.f32(v);
  std::vector<std::uint8_t> bits((data.labels.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (data.labels[i] == 1.0f) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  w.raw(bits);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "dataset");
  r.expect_magic("FPDS");
  const std::uint16_t version = r.u16();
  if (version != kDatasetVersion) {
    throw IoError("dataset: unsupported version " + std::to_string(version));
  }
  const std::size_t n = r.u32();
  const std::size_t c = r.u16(), h = r.u16(), w = r.u16(), l = r.u16();
  const std::size_t pixels = n * c * h * w;
  if (r.remaining() < pixels * 4) throw IoError("dataset: truncated image block");
  std::vector<float> img(pixels);
  for (auto& v : img) v = r.f32();
  auto bits = r.raw((n * l + 7) / 8);
  r.expect_end();
  std::vector<float> lab(n * l);
  for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = (bits[i / 8] >> (i % 8)) & 1u ? 1.0f : 0.0f;
  Dataset ds{Tensor::from_external({n, c, h, w}, std::move(img)),
             Tensor({n, l}, std::move(lab))};
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& data, const std::string& path) {
  write_file(path, encode_dataset(data));
}

Dataset load_dataset(const std::string& path) {
  try {
    return decode_dataset(read_file(path));
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace fedprune
