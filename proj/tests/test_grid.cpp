#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "lcfusion/grid.hpp"
#include "lcfusion/raster_io.hpp"
#include "test_util.hpp"

using namespace lcfusion;
using testutil::TempDir;

namespace {

// Hand-written raster pair, independent of the library writer.
void write_raw_f32(const std::filesystem::path& header, std::size_t w, std::size_t h, std::size_t declared_classes,
                   const std::vector<float>& band_sequential) {
  std::ofstream(header) << "{\"width\":" << w << ",\"height\":" << h << ",\"bands\":" << declared_classes
                        << ",\"dtype\":\"f32\",\"class_names\":[\"a\",\"b\",\"c\",\"d\"],\"nodata\":null,"
                           "\"byte_order\":\"little\"}";
  std::ofstream bin(payload_path(header), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(band_sequential.data()),
            static_cast<std::streamsize>(band_sequential.size() * sizeof(float)));
}

}  // namespace

TEST(GridShape, RejectsInvalidShapes) {
  EXPECT_THROW(GridShape(0, 2, {"a", "b"}), ValidationError);
  EXPECT_THROW(GridShape(2, 2, {"a"}), ValidationError);
  EXPECT_THROW(GridShape(2, 2, {"a", "a"}), ValidationError);
  EXPECT_THROW(GridShape(2, 2, {"a", ""}), ValidationError);
  std::vector<std::string> many;
  for (int i = 0; i < 256; ++i) many.push_back(std::to_string(i));
  EXPECT_THROW(GridShape(1, 1, many), ValidationError);
  EXPECT_EQ(GridShape(3, 2, {"a", "b"}).pixel_count(), 6u);
}

TEST(LoadProbabilityRaster, ReadsBandSequentialPayload) {
  TempDir dir;
  // 2x2x4: pixel i has its mass on class i.
  std::vector<float> bands(16, 0.0f);
  for (int i = 0; i < 4; ++i) {
    bands[static_cast<std::size_t>(i * 4 + i)] = 1.0f;
  }
  write_raw_f32(dir / "p.json", 2, 2, 4, bands);
  const auto p = load_probability_raster(dir / "p.json");
  EXPECT_EQ(p.shape().width(), 2u);
  EXPECT_EQ(p.shape().height(), 2u);
  EXPECT_EQ(p.shape().n_classes(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(argmax(p.pixel(i)), i);
  }
}

TEST(LoadProbabilityRaster, RegularizesZerosOnLoad) {
  TempDir dir;
  std::vector<float> bands{1.0f, 0.0f, 0.0f, 0.0f};
  write_raw_f32(dir / "p.json", 1, 1, 4, bands);
  const auto p = load_probability_raster(dir / "p.json");
  const double eps = 1e-10;
  EXPECT_DOUBLE_EQ(p.pixel(0)[0], 1.0 / (1.0 + 3.0 * eps));
  for (int c = 1; c < 4; ++c) {
    EXPECT_DOUBLE_EQ(p.pixel(0)[c], eps / (1.0 + 3.0 * eps));
  }
}

TEST(LoadProbabilityRaster, DetectsDimensionMismatch) {
  TempDir dir;
  // header declares 4 bands, payload holds 3
  write_raw_f32(dir / "p.json", 1, 1, 4, {0.2f, 0.3f, 0.5f});
  try {
    load_probability_raster(dir / "p.json");
    FAIL() << "expected a dimension mismatch";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
  }
}

TEST(LoadProbabilityRaster, RejectsBadValuesAndHeaders) {
  TempDir dir;
  write_raw_f32(dir / "neg.json", 1, 1, 4, {0.5f, -0.1f, 0.3f, 0.3f});
  EXPECT_THROW(load_probability_raster(dir / "neg.json"), ValidationError);
  write_raw_f32(dir / "nan.json", 1, 1, 4, {0.5f, std::nanf(""), 0.3f, 0.2f});
  EXPECT_THROW(load_probability_raster(dir / "nan.json"), ValidationError);
  write_raw_f32(dir / "inf.json", 1, 1, 4, {0.5f, INFINITY, 0.3f, 0.2f});
  EXPECT_THROW(load_probability_raster(dir / "inf.json"), ValidationError);
  write_raw_f32(dir / "zero.json", 1, 1, 4, {0.0f, 0.0f, 0.0f, 0.0f});
  EXPECT_THROW(load_probability_raster(dir / "zero.json"), ValidationError);
  std::ofstream(dir / "bad.json") << "{\"width\": 1,";
  EXPECT_THROW(load_probability_raster(dir / "bad.json"), ValidationError);
  std::ofstream(dir / "nofield.json") << "{\"width\": 1}";
  EXPECT_THROW(load_probability_raster(dir / "nofield.json"), ValidationError);
}

TEST(LabelRasterIo, RoundTripsValuesAndNodata) {
  TempDir dir;
  LabelRaster one(testutil::four_classes(1, 1), {2});
  save_label_raster(one, dir / "one.json");
  EXPECT_EQ(load_label_raster(dir / "one.json"), one);

  LabelRaster with_gap(testutil::four_classes(3, 1), {0, kNoData, 3});
  save_label_raster(with_gap, dir / "gap.json");
  const auto back = load_label_raster(dir / "gap.json");
  EXPECT_EQ(back, with_gap);
  EXPECT_EQ(back[1], kNoData);
}

TEST(LabelRasterIo, EmptyPathIsAnError) {
  LabelRaster one(testutil::four_classes(1, 1), {2});
  EXPECT_THROW(save_label_raster(one, ""), IoError);
}

TEST(LabelRasterIo, RandomRastersRoundTripBitExactly) {
  TempDir dir;
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 1 + rng() % 17;
    const std::size_t h = 1 + rng() % 9;
    const std::size_t c = 2 + rng() % 6;
    std::vector<std::uint8_t> v(w * h);
    for (auto& x : v) {
      x = (rng() % 10 == 0) ? kNoData : static_cast<std::uint8_t>(rng() % c);
    }
    LabelRaster r(testutil::shape(w, h, c), v);
    save_label_raster(r, dir / "r.json");
    ASSERT_EQ(load_label_raster(dir / "r.json"), r);
  }
}

TEST(ProbabilityRasterIo, SavedRastersReloadToTheSameFloats) {
  TempDir dir;
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(5 * 3 * 4);
  for (auto& x : v) x = u(rng);
  ProbabilityRaster p(testutil::four_classes(5, 3), v);
  save_probability_raster(p, dir / "p.json");
  const auto q = load_probability_raster(dir / "p.json");
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(q.values()[i], p.values()[i], 1e-7);
  }
  save_probability_raster(q, dir / "q.json");
  const auto r = load_probability_raster(dir / "q.json");
  EXPECT_EQ(read_text_file(payload_path(dir / "q.json")), read_text_file(payload_path(dir / "p.json")));
  EXPECT_EQ(r.values(), q.values());
}

TEST(LabelRaster, RejectsOutOfRangeLabels) {
  EXPECT_THROW(LabelRaster(testutil::four_classes(2, 1), {0, 4}), ValidationError);
  EXPECT_THROW(LabelRaster(testutil::four_classes(2, 1), {0}), ValidationError);
}

TEST(HardClassify, PicksArgmaxWithLowestIndexOnTies) {
  ProbabilityRaster p(testutil::four_classes(3, 1),
                      {0.1, 0.7, 0.1, 0.1, 0.25, 0.25, 0.25, 0.25, 0.3, 0.3, 0.2, 0.2});
  const auto labels = hard_classify(p);
  EXPECT_EQ(labels[0], 1);
  EXPECT_EQ(labels[1], 0);
  EXPECT_EQ(labels[2], 0);
}

TEST(HardClassify, InvariantUnderPositiveScaling) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(4);
    for (auto& x : v) x = u(rng);
    const double s = scale(rng);
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= s;
    EXPECT_EQ(argmax(v), argmax(scaled));
  }
}

TEST(HardClassify, RegularizationPreservesUniqueArgmax) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(5);
    for (auto& x : v) x = (u(rng) < 0.4) ? 0.0 : u(rng);
    v[trial % 5] += 1.0;  // unique maximum
    EXPECT_EQ(argmax(regularize(v)), argmax(v));
  }
}
