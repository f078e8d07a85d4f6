// Dataset ingestion: IDX files (optionally gzip-compressed), bit-packed OBIN
// files, static and dynamic binarization, and the synthetic bars dataset.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odvae/tensor.hpp"

namespace odvae::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsigned-byte IDX array: magic 0x0000 08 <rank>, big-endian u32 extents.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray parse_idx(const std::vector<std::uint8_t>& file, const std::string& what = "idx");
std::vector<std::uint8_t> encode_idx(const IdxArray& a);
// Reads plain or gzip-compressed files transparently.
IdxArray read_idx(const std::string& path);
// Compresses when the path ends in ".gz".
void write_idx(const std::string& path, const IdxArray& a);

struct Images {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<double> pixels;  // count x (rows * cols), scaled by 1/255
  std::size_t dim() const { return rows * cols; }
};

// Requires magic 0x00000803.
Images load_idx_images(const std::string& path);
// Requires magic 0x00000801.
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

enum class Binarization { Threshold, File, Dynamic };
Binarization parse_binarization(const std::string& s);
std::string to_string(Binarization b);

struct Dataset {
  std::size_t count = 0, dim = 0;
  std::vector<double> pixels;  // binary for static modes, intensities for dynamic
  std::vector<int> labels;     // optional; mode id for bars
  Binarization mode = Binarization::Threshold;
  std::uint64_t seed = 0;

  // Rows `index` as a batch. Dynamic mode draws pixel (i, d) from
  // Bernoulli(intensity) with a generator seeded from (seed, epoch, i), so the
  // draw does not depend on batch composition or order.
  Tensor rows(const std::vector<std::size_t>& index, std::uint64_t epoch = 0) const;
  Tensor all(std::uint64_t epoch = 0) const;
  Dataset subset(std::size_t begin, std::size_t end) const;
};

// Threshold: 1{pixel > 0.5}. Dynamic keeps intensities for per-epoch draws.
Dataset binarize(const Images& images, Binarization mode, std::uint64_t seed = 0);

// OBIN: "OBIN", u32 version, u32 N, u32 D (little-endian), then N*D bits
// packed row-major, least significant bit first, zero-padded to a byte.
void write_obin(const std::string& path, const Dataset& d);
// File mode: checks D against `expected_dim` when it is non-zero.
Dataset read_obin(const std::string& path, std::size_t expected_dim = 0);

// n images of size x size holding one horizontal or vertical bar, each pixel
// flipped with probability `noise`. Labels: row r -> r, column c -> size + c.
Dataset synthetic_bars(std::size_t n, std::size_t size, double noise, std::uint64_t seed);

struct Splits {
  Dataset train, valid, test;
};

// Validation is the last `valid_count` rows of the training set.
Splits split(const Dataset& train, const Dataset& test, std::size_t valid_count);

std::vector<double> pixel_means(const Dataset& d);

// Mean test log-likelihood of a product of independent Bernoulli pixels whose
// means are the training marginals with add-one smoothing.
double independent_pixel_log_likelihood(const Dataset& train, const Dataset& test);

}  // namespace odvae::data
