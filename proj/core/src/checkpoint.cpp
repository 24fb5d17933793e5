#include "wvi/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wvi/error.hpp"

namespace wvi {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'W', 'V', 'I', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path) {}

  template <typename T>
  T pod(const char* what) {
    T value{};
    bytes(reinterpret_cast<char*>(&value), sizeof(T), what);
    return value;
  }

  void bytes(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw IoError("checkpoint " + path_.string() + ": truncated while reading " + what);
    }
  }

 private:
  std::istream& is_;
  const std::filesystem::path& path_;
};

Tensor sizes_tensor(const std::vector<std::size_t>& sizes) {
  std::vector<double> v(sizes.begin(), sizes.end());
  return Tensor::vector(std::move(v));
}

std::vector<std::size_t> tensor_sizes(const Tensor& t) {
  std::vector<std::size_t> out;
  for (double v : t.values()) {
    if (!(v >= 1.0) || v != std::floor(v)) throw IoError("checkpoint: invalid layer size in metadata");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

DenseNet restore_net(const Checkpoint& ckpt, const std::string& prefix) {
  const auto sizes = tensor_sizes(ckpt.get("meta." + prefix + "_layers"));
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    weights.push_back(ckpt.get(prefix + "." + std::to_string(l) + ".weight"));
    biases.push_back(ckpt.get(prefix + "." + std::to_string(l) + ".bias"));
  }
  try {
    return DenseNet(sizes, std::move(weights), std::move(biases));
  } catch (const ShapeError& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& value) { entries_.insert_or_assign(name, value.detach()); }

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw IoError("checkpoint: missing entry '" + name + "'");
  return it->second;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, tensor] : entries_) {
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) write_pod(os, static_cast<std::uint64_t>(d));
    const auto v = tensor.values();
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint: write to " + path.string() + " failed");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  Reader in(is, path);
  char magic[8];
  in.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint " + path.string() + ": bad magic, not a checkpoint file");
  }
  const auto version = in.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto count = in.pod<std::uint32_t>("entry count");
  Checkpoint out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = in.pod<std::uint32_t>("name length");
    if (name_len == 0 || name_len > 4096) throw IoError("checkpoint " + path.string() + ": corrupt entry name");
    std::string name(name_len, '\0');
    in.bytes(name.data(), name_len, "entry name");
    const auto rank = in.pod<std::uint32_t>("rank");
    if (rank > 8) throw IoError("checkpoint " + path.string() + ": corrupt rank for '" + name + "'");
    Shape shape;
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = in.pod<std::uint64_t>("dimension");
      total *= d;
      if (total > kMaxElements) throw IoError("checkpoint " + path.string() + ": corrupt shape for '" + name + "'");
      shape.push_back(static_cast<std::size_t>(d));
    }
    std::vector<double> values(static_cast<std::size_t>(total));
    in.bytes(reinterpret_cast<char*>(values.data()), values.size() * sizeof(double), "tensor data");
    out.entries_.insert_or_assign(name, Tensor(std::move(shape), std::move(values)));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw IoError("checkpoint " + path.string() + ": trailing bytes after last entry");
  }
  return out;
}

void store_models(Checkpoint& ckpt, const ModelPair& models) {
  ckpt.put("meta.decoder_layers", sizes_tensor(models.decoder.layer_sizes()));
  ckpt.put("meta.encoder_layers", sizes_tensor(models.encoder.layer_sizes()));
  ckpt.put("meta.sigmas", Tensor::vector({models.obs_sigma, models.latent_sigma}));
  for (const auto& [name, p] : models.parameters()) ckpt.put(name, *p);
}

ModelPair restore_models(const Checkpoint& ckpt) {
  ModelPair out;
  out.decoder = restore_net(ckpt, "decoder");
  out.encoder = restore_net(ckpt, "encoder");
  const Tensor& sigmas = ckpt.get("meta.sigmas");
  if (sigmas.size() != 2) throw IoError("checkpoint: meta.sigmas must hold two values");
  out.obs_sigma = sigmas[0];
  out.latent_sigma = sigmas[1];
  try {
    out.validate();
  } catch (const std::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  return out;
}

void store_optimizer(Checkpoint& ckpt, const ModelPair& models, const AdamState& state) {
  ckpt.put("adam.step", Tensor(static_cast<double>(state.step)));
  if (state.first.empty()) return;
  const auto params = models.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.put("adam.m." + params[i].first, state.first[i]);
    ckpt.put("adam.v." + params[i].first, state.second[i]);
  }
}

AdamState restore_optimizer(const Checkpoint& ckpt, const ModelPair& models) {
  AdamState state;
  if (!ckpt.has("adam.step")) return state;
  state.step = static_cast<std::uint64_t>(ckpt.get("adam.step").item());
  if (state.step == 0) return state;
  for (const auto& [name, p] : models.parameters()) {
    const Tensor& m = ckpt.get("adam.m." + name);
    const Tensor& v = ckpt.get("adam.v." + name);
    if (m.shape() != p->shape() || v.shape() != p->shape()) {
      throw IoError("checkpoint: optimizer moments for '" + name + "' do not match the parameter shape");
    }
    state.first.push_back(m);
    state.second.push_back(v);
  }
  return state;
}

}  // namespace wvi
