#include "compm/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "compm/errors.hpp"
#include "compm/util/atomic_file.hpp"

namespace compm::nn {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'P', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const nlohmann::json& header, const ParameterList& params, StorageType storage) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(storage));
  const std::string text = header.dump();
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const auto& shape = p.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto extent : shape) put<std::uint64_t>(out, extent);
    for (double v : p.tensor.data()) {
      if (storage == StorageType::Float32) {
        put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw FormatError("not a checkpoint file");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto dtype = in.get<std::uint32_t>();
  if (dtype > 1) throw FormatError("unknown checkpoint dtype " + std::to_string(dtype));
  ckpt.storage = static_cast<StorageType>(dtype);
  const auto header_len = in.get<std::uint64_t>();
  try {
    ckpt.header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.take(in.get<std::uint32_t>());
    StoredArray array;
    const auto rank = in.get<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) array.shape.push_back(in.get<std::uint64_t>());
    array.values.resize(shape_size(array.shape));
    for (auto& v : array.values) {
      v = ckpt.storage == StorageType::Float32 ? static_cast<double>(std::bit_cast<float>(in.get<std::uint32_t>()))
                                               : std::bit_cast<double>(in.get<std::uint64_t>());
    }
    if (!ckpt.arrays.emplace(name, std::move(array)).second) throw FormatError("duplicate array '" + name + "'");
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header, const ParameterList& params,
                     StorageType storage) {
  write_file_atomic(path, encode_checkpoint(header, params, storage));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

std::size_t assign_parameters(const Checkpoint& checkpoint, const ParameterList& targets,
                              std::string_view target_prefix, std::string_view source_prefix) {
  std::size_t assigned = 0;
  for (const auto& target : targets) {
    if (!target.name.starts_with(target_prefix)) continue;
    const std::string source = std::string(source_prefix) + target.name.substr(target_prefix.size());
    const auto it = checkpoint.arrays.find(source);
    if (it == checkpoint.arrays.end()) throw FormatError("checkpoint lacks array '" + source + "'");
    if (it->second.shape != target.tensor.shape()) {
      throw FormatError("array '" + source + "' has shape " + shape_string(it->second.shape) + ", expected " +
                        shape_string(target.tensor.shape()));
    }
    auto dst = Tensor(target.tensor).mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
    ++assigned;
  }
  return assigned;
}

ParameterSnapshot snapshot(const ParameterList& params) {
  ParameterSnapshot out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void restore(const ParameterList& params, const ParameterSnapshot& values) {
  if (values.size() != params.size()) throw ContractError("snapshot does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = Tensor(params[i].tensor).mutable_data();
    if (dst.size() != values[i].size()) throw ContractError("snapshot entry size mismatch for " + params[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace compm::nn
