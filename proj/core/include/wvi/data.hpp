#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wvi/tensor.hpp"

namespace wvi {

// Raw IDX unsigned-byte image file (magic 0x00000803): count x rows x cols.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

// Reads plain or gzip-compressed IDX files (detected from the first two bytes).
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
// Uncompressed unless the path ends in ".gz".
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);

// Average-pools non-overlapping factor x factor blocks. rows and cols must be divisible.
IdxImages downsample(const IdxImages& images, std::size_t factor);

// count x (rows*cols) tensor, pixel / 255.
Tensor to_unit_tensor(const IdxImages& images);

struct Dataset {
  Tensor train;       // N x D, values in [0,1]
  Tensor validation;  // M x D
  std::size_t image_rows = 0;  // 0 for non-image data
  std::size_t image_cols = 0;

  std::size_t dim() const { return train.cols(); }
};

// Image file as a handle: every image becomes a training row.
Tensor load_mnist_idx(const std::filesystem::path& path, std::size_t downsample_factor = 1);

enum class SynthKind { ring8, checkerboard, moons };
SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

// n points in [0,1]^2, deterministic in (kind, n, seed).
Tensor synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed);

}  // namespace wvi
