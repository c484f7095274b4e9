#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "prism/matio.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace prism;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "prism_matio_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected prism::Error";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Matio, IdentityLayout) {
  const auto path = temp_path("eye.prsm");
  matio::write_matrix(Matrix::Identity(2, 2), path);
  const auto bytes = slurp(path);
  ASSERT_EQ(bytes.size(), 26u + 32u);
  EXPECT_EQ(std::memcmp(bytes.data(), "PRSM", 4), 0);
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);  // f64
  EXPECT_EQ(bytes[10], 2);  // rows
  EXPECT_EQ(bytes[18], 2);  // cols
  // Row-major payload: (0,0)=1, (0,1)=0, (1,0)=0, (1,1)=1.
  const auto one = std::bit_cast<std::array<unsigned char, 8>>(1.0);
  EXPECT_EQ(std::memcmp(bytes.data() + 26, one.data(), 8), 0);
  EXPECT_EQ(std::memcmp(bytes.data() + 26 + 24, one.data(), 8), 0);
}

TEST(Matio, EmptyMatrixIsHeaderOnly) {
  const auto path = temp_path("empty.prsm");
  matio::write_matrix(Matrix(0, 5), path);
  EXPECT_EQ(slurp(path).size(), 26u);
  const auto back = matio::read_matrix(path);
  EXPECT_EQ(back.rows(), 0);
  EXPECT_EQ(back.cols(), 5);
}

TEST(Matio, RoundTripIsBitwise) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix m = testkit::gaussian(gen, 1 + trial % 7, 1 + trial % 4, std::pow(10.0, trial % 9 - 4));
    m(0, 0) = -0.0;
    if (trial % 5 == 0) m(0, 0) = std::numeric_limits<double>::denorm_min();
    const auto path = temp_path("rt.prsm");
    matio::write_matrix(m, path);
    const auto r = matio::read_matrix_ex(path);
    EXPECT_FALSE(r.widened);
    ASSERT_EQ(r.values.rows(), m.rows());
    ASSERT_EQ(r.values.cols(), m.cols());
    EXPECT_EQ(std::memcmp(r.values.data(), m.data(), sizeof(double) * m.size()), 0);
  }
}

TEST(Matio, F32WritesAreWidenedAndFlagged) {
  Matrix m(2, 3);
  m << 0.1, 1.5, -2.25, 1e-3, 3.0, 7.0;
  const auto path = temp_path("f32.prsm");
  matio::write_matrix(m, path, matio::Dtype::kF32);
  EXPECT_EQ(slurp(path).size(), 26u + 24u);
  const auto r = matio::read_matrix_ex(path);
  EXPECT_TRUE(r.widened);
  EXPECT_EQ(r.stored, matio::Dtype::kF32);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    EXPECT_EQ(r.values.data()[i], static_cast<double>(static_cast<float>(m.data()[i])));
  }
}

TEST(Matio, NonFiniteValuesPassThrough) {
  Matrix m(1, 2);
  m << std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity();
  const auto path = temp_path("nan.prsm");
  matio::write_matrix(m, path);
  const auto back = matio::read_matrix(path);
  EXPECT_TRUE(std::isnan(back(0, 0)));
  EXPECT_TRUE(std::isinf(back(0, 1)));
}

TEST(Matio, BadMagic) {
  auto bytes = matio::encode_matrix(Matrix::Ones(2, 2));
  std::memcpy(bytes.data(), "XXXX", 4);
  const auto path = temp_path("bad.prsm");
  dump(path, bytes);
  EXPECT_EQ(code_of([&] { matio::read_matrix(path); }), ErrorCode::kBadMagic);
}

TEST(Matio, TruncatedPayload) {
  // Declares 3x3 but carries 8 values.
  auto bytes = matio::encode_matrix(Matrix::Ones(3, 3));
  bytes.resize(bytes.size() - 8);
  const auto path = temp_path("trunc.prsm");
  dump(path, bytes);
  EXPECT_EQ(code_of([&] { matio::read_matrix(path); }), ErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { matio::decode_matrix(bytes.data(), 10); }), ErrorCode::kTruncated);
}

TEST(Matio, ShapeOverflow) {
  auto bytes = matio::encode_matrix(Matrix(0, 0));
  for (int i = 10; i < 26; ++i) bytes[static_cast<std::size_t>(i)] = 0xFF;
  bytes[17] = 0x0F;
  bytes[25] = 0x0F;
  EXPECT_EQ(code_of([&] { matio::decode_matrix(bytes.data(), bytes.size()); }), ErrorCode::kShapeOverflow);
}

TEST(Matio, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { matio::read_matrix("/nonexistent/dir/x.prsm"); }), ErrorCode::kIo);
}

// --- manifests -------------------------------------------------------------

TEST(Manifest, TwoVariantsInOrder) {
  const auto m = matio::parse_manifest(R"({
    "target_id": "llama", "benchmark_id": "mmlu",
    "target_feature_path": "t.prsm", "target_head_path": "h.prsm",
    "variants": [
      {"variant_id": "Q8_0", "family": "GGUF", "method": "Q8_0", "feature_path": "q8.prsm", "head_path": "q8h.prsm",
       "empirical_gap": 0.0002},
      {"variant_id": "Q2_K", "family": "GGUF", "method": "Q2_K", "feature_path": "q2.prsm"}
    ]})",
                                       "/data");
  ASSERT_EQ(m.variants.size(), 2u);
  EXPECT_EQ(m.variants[0].variant_id, "Q8_0");
  EXPECT_EQ(m.variants[1].variant_id, "Q2_K");
  EXPECT_EQ(m.variants[0].feature_path, fs::path("/data/q8.prsm"));
  ASSERT_TRUE(m.variants[0].head_path.has_value());
  EXPECT_DOUBLE_EQ(*m.variants[0].empirical_gap, 0.0002);
  EXPECT_FALSE(m.variants[1].head_path.has_value());
  EXPECT_FALSE(m.variants[1].empirical_gap.has_value());
  EXPECT_EQ(m.target_feature_path, fs::path("/data/t.prsm"));
}

TEST(Manifest, DuplicateIdRejected) {
  EXPECT_EQ(code_of([] {
              matio::parse_manifest(R"({"target_id":"t","benchmark_id":"b","target_feature_path":"t.prsm",
                "variants":[{"variant_id":"a","feature_path":"a"},{"variant_id":"a","feature_path":"b"}]})");
            }),
            ErrorCode::kManifest);
}

TEST(Manifest, NegativeGapRejected) {
  EXPECT_EQ(code_of([] {
              matio::parse_manifest(R"({"target_id":"t","benchmark_id":"b","target_feature_path":"t.prsm",
                "variants":[{"variant_id":"a","feature_path":"a","empirical_gap":-0.1}]})");
            }),
            ErrorCode::kManifest);
}

TEST(Manifest, MissingFeaturePathRejected) {
  EXPECT_EQ(code_of([] {
              matio::parse_manifest(R"({"target_id":"t","benchmark_id":"b","target_feature_path":"t.prsm",
                "variants":[{"variant_id":"a","family":"GGUF"}]})");
            }),
            ErrorCode::kManifest);
}

TEST(Manifest, MalformedDocument) {
  EXPECT_EQ(code_of([] { matio::parse_manifest("{not json"); }), ErrorCode::kManifest);
}

TEST(Manifest, LlamaMmluBlockHasElevenRecords) {
  const auto path = fs::path(PRISM_TEST_DATA_DIR) / "llama_mmlu_manifest.json";
  const auto m = matio::read_manifest(path);
  ASSERT_EQ(m.variants.size(), 11u);
  EXPECT_EQ(m.variants.front().method, "FP16");
  EXPECT_EQ(m.variants.back().method, "GPTQ-4bit");
  int gguf = 0, bnb = 0, gptq = 0;
  for (const auto& v : m.variants) {
    gguf += v.family == "GGUF";
    bnb += v.family == "BnB";
    gptq += v.family == "GPTQ";
  }
  EXPECT_EQ(gguf, 6);
  EXPECT_EQ(bnb, 3);
  EXPECT_EQ(gptq, 1);
  EXPECT_DOUBLE_EQ(m.variants[6].empirical_gap.value(), 0.3658);
}
