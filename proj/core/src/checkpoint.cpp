#include "csanet/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "csanet/error.hpp"

namespace csanet {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw DataError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated payload reading ") + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = "CSAN";
  put_u32(out, kCheckpointVersion);
  const std::string config = model_config_to_text(ckpt.config);
  put_u32(out, to_u32(config.size(), "config length"));
  out += config;
  put_u32(out, to_u32(ckpt.blobs.size(), "blob count"));
  for (const auto& blob : ckpt.blobs) {
    if (blob.values.size() != shape_numel(blob.shape)) {
      throw DataError("blob " + blob.name + " holds " + std::to_string(blob.values.size()) + " values for shape " +
                      shape_string(blob.shape));
    }
    put_u32(out, to_u32(blob.name.size(), "name length"));
    out += blob.name;
    put_u32(out, to_u32(blob.shape.size(), "rank"));
    for (std::size_t d : blob.shape) put_u32(out, to_u32(d, "dimension"));
    for (float v : blob.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.remaining() < 4 || in.raw(4, "magic") != "CSAN") throw FormatError("bad magic, expected \"CSAN\"", 0);
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  Checkpoint ckpt;
  const std::uint32_t config_len = in.u32("config length");
  ckpt.config = model_config_from_text(in.raw(config_len, "model config"));
  const std::uint32_t n_blobs = in.u32("blob count");
  for (std::uint32_t b = 0; b < n_blobs; ++b) {
    CheckpointBlob blob;
    const std::uint32_t name_len = in.u32("blob name length");
    blob.name = std::string(in.raw(name_len, "blob name"));
    const std::size_t rank_at = in.offset();
    const std::uint32_t rank = in.u32("blob rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible rank " + std::to_string(rank), rank_at);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::size_t dim_at = in.offset();
      const std::uint32_t d = in.u32("blob dimension");
      if (d == 0) throw FormatError("zero dimension in blob " + blob.name, dim_at);
      blob.shape.push_back(d);
      numel *= d;
      if (numel > in.remaining() / 4 + 1) throw FormatError("blob " + blob.name + " exceeds the payload", dim_at);
    }
    const std::string_view payload = in.raw(4 * numel, "blob values");
    blob.values.resize(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      std::uint32_t v = 0;
      for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + k])) << (8 * k);
      blob.values[i] = std::bit_cast<float>(v);
    }
    ckpt.blobs.push_back(std::move(blob));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after last blob", in.offset());
  return ckpt;
}

template <typename T>
Checkpoint make_checkpoint(CsanetModel<T>& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  for (const auto& p : model.parameters()) {
    CheckpointBlob blob{p.name, p.tensor.shape(), {}};
    blob.values.reserve(p.tensor.numel());
    for (T v : p.tensor.data()) blob.values.push_back(static_cast<float>(v));
    ckpt.blobs.push_back(std::move(blob));
  }
  for (const auto& buf : model.buffers()) {
    CheckpointBlob blob{buf.name, {buf.values->size()}, {}};
    blob.values.reserve(buf.values->size());
    for (T v : *buf.values) blob.values.push_back(static_cast<float>(v));
    ckpt.blobs.push_back(std::move(blob));
  }
  return ckpt;
}

template <typename T>
CsanetModel<T> model_from_checkpoint(const Checkpoint& ckpt) {
  CsanetModel<T> model(ckpt.config, 0);
  std::map<std::string, const CheckpointBlob*> by_name;
  for (const auto& blob : ckpt.blobs) {
    if (!by_name.emplace(blob.name, &blob).second) throw DataError("duplicate checkpoint blob " + blob.name);
  }
  auto take = [&](const std::string& name, const Shape& shape) -> const CheckpointBlob& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint lacks " + name);
    if (it->second->shape != shape) {
      throw DataError("checkpoint blob " + name + " has shape " + shape_string(it->second->shape) + ", expected " +
                      shape_string(shape));
    }
    const CheckpointBlob& blob = *it->second;
    by_name.erase(it);
    return blob;
  };
  for (auto& p : model.parameters()) {
    const auto& blob = take(p.name, p.tensor.shape());
    auto dst = p.tensor.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(blob.values[i]);
  }
  for (auto& buf : model.buffers()) {
    const auto& blob = take(buf.name, {buf.values->size()});
    for (std::size_t i = 0; i < buf.values->size(); ++i) (*buf.values)[i] = static_cast<T>(blob.values[i]);
  }
  if (!by_name.empty()) throw DataError("checkpoint has unexpected blob " + by_name.begin()->first);
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw DataError("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str());
}

template Checkpoint make_checkpoint<float>(CsanetModel<float>&);
template Checkpoint make_checkpoint<double>(CsanetModel<double>&);
template CsanetModel<float> model_from_checkpoint<float>(const Checkpoint&);
template CsanetModel<double> model_from_checkpoint<double>(const Checkpoint&);

}  // namespace csanet
