#include "wvi/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "wvi/error.hpp"
#include "wvi/random.hpp"

namespace wvi {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::string hex_bytes(const std::uint8_t* b, std::size_t n) {
  std::string out;
  char buf[4];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", b[i]);
    if (i) out += ' ';
    out += buf;
  }
  return out;
}

// gzread passes uncompressed files through unchanged, so one reader covers both.
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("idx: file not found: " + path.string());
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("idx: cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int got = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (got < 0) {
      int errnum = 0;
      const std::string msg = gzerror(f, &errnum);
      gzclose(f);
      throw IoError("idx: read error in " + path.string() + ": " + msg);
    }
    if (got == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + got);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t want, const std::filesystem::path& path) {
  if (bytes.size() < 4) throw IoError("idx: " + path.string() + " is too short for a header");
  if (be32(bytes.data()) != want) {
    const std::uint8_t expected[4] = {static_cast<std::uint8_t>(want >> 24), static_cast<std::uint8_t>(want >> 16),
                                      static_cast<std::uint8_t>(want >> 8), static_cast<std::uint8_t>(want)};
    throw IoError("idx: bad magic in " + path.string() + ": expected " + hex_bytes(expected, 4) + ", found " +
                  hex_bytes(bytes.data(), 4));
  }
}

std::array<double, 2> clamp_unit(double x, double y) {
  return {std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0)};
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  check_magic(bytes, kImageMagic, path);
  if (bytes.size() < 16) throw IoError("idx: " + path.string() + " has a truncated header");
  IdxImages out;
  out.count = be32(bytes.data() + 4);
  out.rows = be32(bytes.data() + 8);
  out.cols = be32(bytes.data() + 12);
  const std::size_t want = out.count * out.rows * out.cols;
  if (bytes.size() - 16 != want) {
    throw IoError("idx: " + path.string() + " declares " + std::to_string(out.count) + "x" + std::to_string(out.rows) +
                  "x" + std::to_string(out.cols) + " = " + std::to_string(want) + " pixels but holds " +
                  std::to_string(bytes.size() - 16));
  }
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  check_magic(bytes, kLabelMagic, path);
  if (bytes.size() < 8) throw IoError("idx: " + path.string() + " has a truncated header");
  const std::size_t n = be32(bytes.data() + 4);
  if (bytes.size() - 8 != n) throw IoError("idx: " + path.string() + " label count does not match payload");
  return {bytes.begin() + 8, bytes.end()};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols) {
    throw ShapeError("idx: pixel payload does not match declared dimensions");
  }
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, kImageMagic);
  put_be32(bytes, static_cast<std::uint32_t>(images.count));
  put_be32(bytes, static_cast<std::uint32_t>(images.rows));
  put_be32(bytes, static_cast<std::uint32_t>(images.cols));
  bytes.insert(bytes.end(), images.pixels.begin(), images.pixels.end());
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoError("idx: cannot open " + path.string() + " for writing");
    const int wrote = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (wrote != static_cast<int>(bytes.size())) throw IoError("idx: write to " + path.string() + " failed");
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("idx: cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("idx: write to " + path.string() + " failed");
}

IdxImages downsample(const IdxImages& images, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample: factor must be positive");
  if (factor == 1) return images;
  if (images.rows % factor != 0 || images.cols % factor != 0) {
    throw ShapeError("downsample: " + std::to_string(images.rows) + "x" + std::to_string(images.cols) +
                     " images are not divisible by " + std::to_string(factor));
  }
  IdxImages out;
  out.count = images.count;
  out.rows = images.rows / factor;
  out.cols = images.cols / factor;
  out.pixels.resize(out.count * out.rows * out.cols);
  const double area = static_cast<double>(factor * factor);
  for (std::size_t i = 0; i < images.count; ++i) {
    const std::uint8_t* src = images.pixels.data() + i * images.rows * images.cols;
    std::uint8_t* dst = out.pixels.data() + i * out.rows * out.cols;
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t c = 0; c < out.cols; ++c) {
        unsigned total = 0;
        for (std::size_t dr = 0; dr < factor; ++dr)
          for (std::size_t dc = 0; dc < factor; ++dc) total += src[(r * factor + dr) * images.cols + c * factor + dc];
        dst[r * out.cols + c] = static_cast<std::uint8_t>(std::lround(total / area));
      }
    }
  }
  return out;
}

Tensor to_unit_tensor(const IdxImages& images) {
  const std::size_t d = images.rows * images.cols;
  std::vector<double> values(images.pixels.size());
  std::transform(images.pixels.begin(), images.pixels.end(), values.begin(),
                 [](std::uint8_t p) { return p / 255.0; });
  return Tensor::matrix(images.count, d, std::move(values));
}

Tensor load_mnist_idx(const std::filesystem::path& path, std::size_t downsample_factor) {
  return to_unit_tensor(downsample(read_idx_images(path), downsample_factor));
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "ring8") return SynthKind::ring8;
  if (name == "checkerboard") return SynthKind::checkerboard;
  if (name == "moons") return SynthKind::moons;
  throw ConfigError("unknown synthetic dataset '" + name + "' (expected ring8, checkerboard or moons)");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::ring8: return "ring8";
    case SynthKind::checkerboard: return "checkerboard";
    case SynthKind::moons: return "moons";
  }
  return "?";
}

Tensor synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("synth_dataset: n must be positive");
  Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(kind));
  std::vector<double> values;
  values.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 2> p{};
    switch (kind) {
      case SynthKind::ring8: {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(rng.index(8)) / 8.0;
        p = clamp_unit(0.5 + 0.35 * std::cos(angle) + 0.02 * rng.normal(),
                       0.5 + 0.35 * std::sin(angle) + 0.02 * rng.normal());
        break;
      }
      case SynthKind::checkerboard: {
        // 4x4 board, points uniform over the cells with (row + col) even.
        const std::size_t cell = rng.index(8);
        const std::size_t row = cell / 2;
        const std::size_t col = 2 * (cell % 2) + (row % 2);
        p = {(static_cast<double>(col) + rng.uniform()) / 4.0, (static_cast<double>(row) + rng.uniform()) / 4.0};
        break;
      }
      case SynthKind::moons: {
        const double t = std::numbers::pi * rng.uniform();
        double x = 0.0, y = 0.0;
        if (rng.index(2) == 0) {
          x = std::cos(t);
          y = std::sin(t);
        } else {
          x = 1.0 - std::cos(t);
          y = 0.5 - std::sin(t);
        }
        // Moon extent is [-1,2] x [-0.5,1]; map to the unit square with a margin.
        p = clamp_unit(0.05 + 0.3 * (x + 1.0) + 0.02 * rng.normal(), 0.2 + 0.4 * (y + 0.5) + 0.02 * rng.normal());
        break;
      }
    }
    values.push_back(p[0]);
    values.push_back(p[1]);
  }
  return Tensor::matrix(n, 2, std::move(values));
}

}  // namespace wvi
