#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "odvae/data.hpp"
#include "oracles.hpp"

using namespace odvae;
using namespace odvae::data;

namespace {

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

// Four 2x2 images.
const std::vector<std::uint8_t> kFixture{0x00, 0x00, 0x08, 0x03, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2,
                                         0,    255,  128,  1,    10, 20, 30, 40, 255, 255, 0, 0, 7, 8, 9, 250};

void dump(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Images flat_images(std::size_t n, std::size_t dim, double v) {
  Images im;
  im.count = n;
  im.rows = 1;
  im.cols = dim;
  im.pixels.assign(n * dim, v);
  return im;
}

}  // namespace

TEST(Idx, FixtureLoadsExactPixels) {
  const auto path = temp_path("odvae_fixture.idx");
  dump(path, kFixture);
  const auto im = load_idx_images(path);
  EXPECT_EQ(im.count, 4u);
  EXPECT_EQ(im.rows, 2u);
  EXPECT_EQ(im.cols, 2u);
  ASSERT_EQ(im.pixels.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(im.pixels[i], kFixture[16 + i] / 255.0);
  EXPECT_EQ(im.pixels[1], 1.0);
  std::filesystem::remove(path);
}

TEST(Idx, ExtentsAreBigEndian) {
  std::vector<std::uint8_t> bytes{0, 0, 8, 1, 0, 0, 1, 2};
  bytes.resize(8 + 258, 3);
  const auto a = parse_idx(bytes);
  EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{258}));
}

TEST(Idx, RoundTripPlainAndGzip) {
  const auto a = parse_idx(kFixture);
  const auto plain = temp_path("odvae_rt.idx"), gz = temp_path("odvae_rt.idx.gz");
  write_idx(plain, a);
  EXPECT_EQ(slurp(plain), kFixture);
  write_idx(gz, a);
  EXPECT_NE(slurp(gz), kFixture);
  const auto back = read_idx(gz);
  EXPECT_EQ(encode_idx(back), kFixture);
  std::filesystem::remove(plain);
  std::filesystem::remove(gz);
}

TEST(Idx, StructuredErrors) {
  const auto labels = temp_path("odvae_labels.idx");
  dump(labels, {0, 0, 8, 1, 0, 0, 0, 3, 1, 2, 3});
  EXPECT_EQ(load_idx_labels(labels), (std::vector<std::uint8_t>{1, 2, 3}));
  try {
    load_idx_images(labels);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000803"), std::string::npos);
  }
  EXPECT_THROW(parse_idx({0, 0, 9, 3, 0, 0, 0, 1}), DataError);
  auto truncated = kFixture;
  truncated.pop_back();
  EXPECT_THROW(parse_idx(truncated), DataError);
  EXPECT_THROW(parse_idx({0, 0, 8, 3, 0, 0}), DataError);
  auto trailing = kFixture;
  trailing.push_back(0);
  EXPECT_THROW(parse_idx(trailing), DataError);
  EXPECT_THROW(parse_idx({0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff}), DataError);
  EXPECT_THROW(read_idx(temp_path("odvae_missing.idx")), DataError);
  std::filesystem::remove(labels);
}

TEST(Binarize, ThresholdIsStrict) {
  auto d = binarize(flat_images(2, 5, 0.6), Binarization::Threshold);
  for (double v : d.pixels) EXPECT_EQ(v, 1.0);
  d = binarize(flat_images(2, 5, 0.5), Binarization::Threshold);
  for (double v : d.pixels) EXPECT_EQ(v, 0.0);
  const Tensor a = d.all(0), b = d.all(7);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Binarize, DynamicIsReproducibleAndOrderFree) {
  const auto d = binarize(flat_images(10, 30, 0.5), Binarization::Dynamic, 11);
  const Tensor a = d.rows({3, 1, 7}, 4), b = d.rows({7, 3}, 4), c = d.rows({3}, 5);
  bool epoch_differs = false;
  for (std::size_t k = 0; k < 30; ++k) {
    EXPECT_EQ(a.at(0, k), b.at(1, k));
    EXPECT_EQ(a.at(2, k), b.at(0, k));
    epoch_differs |= a.at(0, k) != c.at(0, k);
  }
  EXPECT_TRUE(epoch_differs);
}

TEST(Binarize, DynamicMeanMatchesIntensity) {
  Images im = flat_images(1, 3, 0.0);
  im.pixels = {0.3, 0.9, 0.05};
  const auto d = binarize(im, Binarization::Dynamic, 5);
  std::vector<std::vector<double>> draws(3);
  for (std::uint64_t e = 0; e < 10000; ++e) {
    const Tensor t = d.rows({0}, e);
    for (std::size_t k = 0; k < 3; ++k) draws[k].push_back(t[k]);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto ms = oracle::mean_se(draws[k]);
    EXPECT_NEAR(ms.mean, im.pixels[k], 3 * ms.se) << k;
  }
}

TEST(Obin, RoundTripAndLayout) {
  Dataset d;
  d.count = 3;
  d.dim = 5;
  d.pixels = {1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const auto path = temp_path("odvae_test.obin");
  write_obin(path, d);
  const auto bytes = slurp(path);
  ASSERT_EQ(bytes.size(), 16u + 2u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "OBIN");
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 5);
  EXPECT_EQ(bytes[16], 0b00011001);
  EXPECT_EQ(bytes[17], 0b01111110);
  const auto back = read_obin(path, 5);
  EXPECT_EQ(back.pixels, d.pixels);
  EXPECT_EQ(back.mode, Binarization::File);
  EXPECT_THROW(read_obin(path, 784), DataError);
  d.pixels[0] = 0.5;
  EXPECT_THROW(write_obin(path, d), DataError);
  std::filesystem::remove(path);
}

TEST(Bars, NoiselessBarHasExactPixels) {
  const auto d = synthetic_bars(400, 4, 0.0, 3);
  bool found = false;
  for (std::size_t i = 0; i < d.count; ++i) {
    if (d.labels[i] != 2) continue;
    found = true;
    double total = 0, row2 = 0;
    for (std::size_t p = 0; p < 16; ++p) {
      total += d.pixels[i * 16 + p];
      if (p / 4 == 2) row2 += d.pixels[i * 16 + p];
    }
    EXPECT_EQ(total, 4.0);
    EXPECT_EQ(row2, 4.0);
  }
  EXPECT_TRUE(found);
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < d.count; ++i)
    distinct.insert(std::vector<double>(d.pixels.begin() + i * 16, d.pixels.begin() + (i + 1) * 16));
  EXPECT_EQ(distinct.size(), 8u);
  EXPECT_THROW(synthetic_bars(1, 3, 0.0, 1), std::invalid_argument);
}

TEST(Bars, MeanImageIsUniformBarDensity) {
  const double noise = 0.1;
  const std::size_t size = 5, n = 20000;
  const auto d = synthetic_bars(n, size, noise, 9);
  const double on = 1.0 / size;
  const double expect = on * (1 - noise) + (1 - on) * noise;
  for (std::size_t p = 0; p < size * size; ++p) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(d.pixels[i * size * size + p]);
    const auto ms = oracle::mean_se(col);
    EXPECT_NEAR(ms.mean, expect, 4 * ms.se) << p;
  }
}

TEST(Splits, ValidationIsTailOfTrain) {
  auto train = synthetic_bars(100, 4, 0.0, 1), test = synthetic_bars(30, 4, 0.0, 2);
  const auto s = split(train, test, 20);
  EXPECT_EQ(s.train.count, 80u);
  EXPECT_EQ(s.valid.count, 20u);
  EXPECT_EQ(s.test.count, 30u);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(s.valid.pixels[k], train.pixels[80 * 16 + k]);
  EXPECT_EQ(s.valid.labels[0], train.labels[80]);
  EXPECT_THROW(split(train, test, 100), std::invalid_argument);
}

TEST(Baseline, IndependentPixelsMatchHandComputation) {
  Dataset train;
  train.count = 3;
  train.dim = 2;
  train.pixels = {1, 0, 1, 1, 0, 0};
  Dataset test = train;
  test.count = 1;
  test.pixels = {1, 0};
  const double p0 = 3.0 / 5.0, p1 = 2.0 / 5.0;
  EXPECT_NEAR(independent_pixel_log_likelihood(train, test), std::log(p0) + std::log(1 - p1), 1e-14);
  EXPECT_EQ(pixel_means(train), (std::vector<double>{2.0 / 3.0, 1.0 / 3.0}));
}

TEST(Mnist, ShippedSubsetLoads) {
  const std::string dir = ODVAE_SOURCE_DIR "/data/mnist5k/";
  const auto train = load_idx_images(dir + "train-images-idx3-ubyte.gz");
  const auto test = load_idx_images(dir + "t10k-images-idx3-ubyte.gz");
  EXPECT_EQ(train.count, 4000u);
  EXPECT_EQ(test.count, 1000u);
  EXPECT_EQ(train.dim(), 784u);
  EXPECT_EQ(load_idx_labels(dir + "train-labels-idx1-ubyte.gz").size(), 4000u);
  for (double p : train.pixels) ASSERT_TRUE(p >= 0.0 && p <= 1.0);
}
