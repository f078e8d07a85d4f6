#include "odvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace odvae {

namespace {

constexpr char kMagic[5] = {'O', 'D', 'V', 'A', 'E'};

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : bytes_(b) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string text(std::uint64_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError("checkpoint: truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) + " more)");
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, Tensor value) {
  for (auto& r : records) {
    if (r.first == name) {
      r.second = value.detach();
      return;
    }
  }
  records.emplace_back(name, value.detach());
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& r : records)
    if (r.first == name) return true;
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& r : records)
    if (r.first == name) return r.second;
  throw CheckpointError("checkpoint: missing record '" + name + "'");
}

std::vector<char> serialize(const Checkpoint& c) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, c.config.size());
  out.insert(out.end(), c.config.begin(), c.config.end());
  put_le<std::uint64_t>(out, c.records.size());
  for (const auto& [name, t] : c.records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize(const std::vector<char>& bytes) {
  Reader in(bytes);
  if (in.text(5) != std::string(kMagic, 5)) throw CheckpointError("checkpoint: bad magic (not an ODVAE file)");
  const auto version = in.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = in.text(in.le<std::uint64_t>());
  const auto count = in.le<std::uint64_t>();
  for (std::uint64_t r = 0; r < count; ++r) {
    std::string name = in.text(in.le<std::uint32_t>());
    const auto rank = in.le<std::uint32_t>();
    if (rank > 8) throw CheckpointError("checkpoint: record '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(in.le<std::uint64_t>());
      if (shape.back() != 0 && n > in.remaining() / shape.back()) {
        throw CheckpointError("checkpoint: record '" + name + "' extents exceed the file size");
      }
      n *= shape.back();
    }
    in.need(n * 8);
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(in.le<std::uint64_t>());
    c.records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (in.remaining() != 0) throw CheckpointError("checkpoint: trailing bytes after the last record");
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  const auto bytes = serialize(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace odvae
