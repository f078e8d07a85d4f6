#include "odvae/data.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "odvae/rng.hpp"

namespace odvae::data {

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError(path + ": cannot open");
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataError(path + ": read error (corrupt gzip stream?)");
  return out;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw DataError(path + ": cannot open for writing");
    const int n = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw DataError(path + ": write failed");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& file, const std::string& what) {
  if (file.size() < 4) throw DataError(what + ": truncated header");
  const std::uint32_t magic = be32(file, 0);
  if ((magic >> 8) != 0x08) {
    throw DataError(what + ": bad magic 0x" + [&] {
      char b[9];
      std::snprintf(b, sizeof b, "%08x", magic);
      return std::string(b);
    }() + " (only unsigned-byte IDX is supported)");
  }
  const std::size_t rank = magic & 0xff;
  if (rank == 0) throw DataError(what + ": rank 0 IDX array");
  if (file.size() < 4 + 4 * rank) throw DataError(what + ": truncated header");
  IdxArray a;
  std::uint64_t n = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    a.dims.push_back(be32(file, 4 + 4 * k));
    n *= a.dims.back();
    if (n > (std::uint64_t{1} << 40)) throw DataError(what + ": extents overflow");
  }
  const std::size_t body = 4 + 4 * rank;
  if (file.size() - body < n) {
    throw DataError(what + ": truncated data (" + std::to_string(file.size() - body) + " of " + std::to_string(n) + " bytes)");
  }
  if (file.size() - body > n) throw DataError(what + ": trailing bytes after data");
  a.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(body), file.end());
  return a;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& a) {
  std::uint64_t n = 1;
  for (auto d : a.dims) n *= d;
  if (a.dims.empty() || a.dims.size() > 255 || n != a.bytes.size()) throw DataError("idx: extents do not match data size");
  std::vector<std::uint8_t> out;
  put_be32(out, 0x0800u | static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put_be32(out, d);
  out.insert(out.end(), a.bytes.begin(), a.bytes.end());
  return out;
}

IdxArray read_idx(const std::string& path) { return parse_idx(read_file(path), path); }

void write_idx(const std::string& path, const IdxArray& a) { write_file(path, encode_idx(a)); }

Images load_idx_images(const std::string& path) {
  const IdxArray a = read_idx(path);
  if (a.dims.size() != 3) {
    throw DataError(path + ": expected image magic 0x00000803, found rank " + std::to_string(a.dims.size()));
  }
  Images im;
  im.count = a.dims[0];
  im.rows = a.dims[1];
  im.cols = a.dims[2];
  im.pixels.resize(a.bytes.size());
  for (std::size_t i = 0; i < a.bytes.size(); ++i) im.pixels[i] = a.bytes[i] / 255.0;
  return im;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  IdxArray a = read_idx(path);
  if (a.dims.size() != 1) {
    throw DataError(path + ": expected label magic 0x00000801, found rank " + std::to_string(a.dims.size()));
  }
  return std::move(a.bytes);
}

Binarization parse_binarization(const std::string& s) {
  if (s == "threshold") return Binarization::Threshold;
  if (s == "file") return Binarization::File;
  if (s == "dynamic") return Binarization::Dynamic;
  throw std::invalid_argument("unknown binarization '" + s + "' (expected threshold, file or dynamic)");
}

std::string to_string(Binarization b) {
  switch (b) {
    case Binarization::Threshold:
      return "threshold";
    case Binarization::File:
      return "file";
    case Binarization::Dynamic:
      return "dynamic";
  }
  return "?";
}

Tensor Dataset::rows(const std::vector<std::size_t>& index, std::uint64_t epoch) const {
  std::vector<double> out(index.size() * dim);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const std::size_t i = index[r];
    if (i >= count) throw std::out_of_range("dataset: row " + std::to_string(i) + " of " + std::to_string(count));
    const double* src = pixels.data() + i * dim;
    double* dst = out.data() + r * dim;
    if (mode == Binarization::Dynamic) {
      Rng rng(derive_seed({seed, epoch, i}));
      for (std::size_t d = 0; d < dim; ++d) dst[d] = uniform01(rng) < src[d] ? 1.0 : 0.0;
    } else {
      std::copy(src, src + dim, dst);
    }
  }
  return Tensor({index.size(), dim}, std::move(out));
}

Tensor Dataset::all(std::uint64_t epoch) const {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return rows(idx, epoch);
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  if (begin > end || end > count) throw std::out_of_range("dataset: bad subset range");
  Dataset s = *this;
  s.count = end - begin;
  s.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(begin * dim), pixels.begin() + static_cast<std::ptrdiff_t>(end * dim));
  if (!labels.empty()) {
    s.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return s;
}

Dataset binarize(const Images& images, Binarization mode, std::uint64_t seed) {
  if (mode == Binarization::File) throw std::invalid_argument("binarize: file mode loads a pre-binarized file (read_obin)");
  Dataset d;
  d.count = images.count;
  d.dim = images.dim();
  d.mode = mode;
  d.seed = seed;
  d.pixels = images.pixels;
  if (mode == Binarization::Threshold)
    for (auto& p : d.pixels) p = p > 0.5 ? 1.0 : 0.0;
  return d;
}

void write_obin(const std::string& path, const Dataset& d) {
  std::vector<std::uint8_t> out{'O', 'B', 'I', 'N'};
  put_le32(out, 1);
  put_le32(out, static_cast<std::uint32_t>(d.count));
  put_le32(out, static_cast<std::uint32_t>(d.dim));
  const std::size_t bits = d.count * d.dim;
  std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
  for (std::size_t i = 0; i < bits; ++i) {
    const double v = d.pixels[i];
    if (v != 0.0 && v != 1.0) throw DataError(path + ": obin requires binary pixels");
    if (v == 1.0) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  out.insert(out.end(), packed.begin(), packed.end());
  write_file(path, out);
}

Dataset read_obin(const std::string& path, std::size_t expected_dim) {
  const auto b = read_file(path);
  if (b.size() < 16) throw DataError(path + ": truncated obin header");
  if (b[0] != 'O' || b[1] != 'B' || b[2] != 'I' || b[3] != 'N') throw DataError(path + ": bad obin magic");
  if (le32(b, 4) != 1) throw DataError(path + ": unsupported obin version " + std::to_string(le32(b, 4)));
  Dataset d;
  d.count = le32(b, 8);
  d.dim = le32(b, 12);
  d.mode = Binarization::File;
  if (expected_dim != 0 && d.dim != expected_dim) {
    throw DataError(path + ": obin has " + std::to_string(d.dim) + " pixels per image, expected " + std::to_string(expected_dim));
  }
  const std::size_t bits = d.count * d.dim;
  if (b.size() - 16 != (bits + 7) / 8) throw DataError(path + ": obin body size does not match N*D");
  d.pixels.resize(bits);
  for (std::size_t i = 0; i < bits; ++i) d.pixels[i] = (b[16 + i / 8] >> (i % 8)) & 1u;
  return d;
}

Dataset synthetic_bars(std::size_t n, std::size_t size, double noise, std::uint64_t seed) {
  if (size < 4) throw std::invalid_argument("synthetic_bars: size must be at least 4");
  if (!(noise >= 0 && noise <= 1)) throw std::invalid_argument("synthetic_bars: noise must lie in [0, 1]");
  Dataset d;
  d.count = n;
  d.dim = size * size;
  d.pixels.assign(n * d.dim, 0.0);
  d.labels.resize(n);
  Rng rng(derive_seed({seed, 0xba25}));
  for (std::size_t i = 0; i < n; ++i) {
    const auto mode = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(2 * size));
    d.labels[i] = static_cast<int>(mode);
    double* img = d.pixels.data() + i * d.dim;
    for (std::size_t k = 0; k < size; ++k) {
      if (mode < size) img[mode * size + k] = 1.0;
      else img[k * size + (mode - size)] = 1.0;
    }
    for (std::size_t p = 0; p < d.dim; ++p)
      if (uniform01(rng) < noise) img[p] = 1.0 - img[p];
  }
  return d;
}

Splits split(const Dataset& train, const Dataset& test, std::size_t valid_count) {
  if (valid_count >= train.count) {
    throw std::invalid_argument("split: validation size " + std::to_string(valid_count) + " leaves no training data (" +
                                std::to_string(train.count) + " rows)");
  }
  if (train.dim != test.dim) throw std::invalid_argument("split: train and test widths differ");
  const std::size_t cut = train.count - valid_count;
  return {train.subset(0, cut), train.subset(cut, train.count), test};
}

std::vector<double> pixel_means(const Dataset& d) {
  std::vector<double> m(d.dim, 0.0);
  for (std::size_t i = 0; i < d.count; ++i)
    for (std::size_t k = 0; k < d.dim; ++k) m[k] += d.pixels[i * d.dim + k];
  for (auto& v : m) v /= static_cast<double>(std::max<std::size_t>(d.count, 1));
  return m;
}

double independent_pixel_log_likelihood(const Dataset& train, const Dataset& test) {
  if (train.dim != test.dim) throw std::invalid_argument("baseline: train and test widths differ");
  const Tensor tr = train.all(), te = test.all();
  std::vector<double> lp1(train.dim), lp0(train.dim);
  for (std::size_t k = 0; k < train.dim; ++k) {
    double ones = 0;
    for (std::size_t i = 0; i < train.count; ++i) ones += tr[i * train.dim + k];
    const double p = (ones + 1.0) / (static_cast<double>(train.count) + 2.0);
    lp1[k] = std::log(p);
    lp0[k] = std::log1p(-p);
  }
  double total = 0;
  for (std::size_t i = 0; i < test.count; ++i)
    for (std::size_t k = 0; k < test.dim; ++k) total += te[i * test.dim + k] > 0.5 ? lp1[k] : lp0[k];
  return total / static_cast<double>(test.count);
}

}  // namespace odvae::data
