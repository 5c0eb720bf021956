#include "gfsa/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "gfsa/rng.hpp"
#include "gtest/gtest.h"

namespace {

using gfsa::DenseMatrix;

DenseMatrix random_matrix(std::size_t r, std::size_t c, gfsa::Rng& rng,
                          double lo = -1.0, double hi = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

TEST(DenseMatrixTest, ConstructorsAndAccess) {
  DenseMatrix zero(2, 3);
  EXPECT_EQ(zero.rows(), 2u);
  EXPECT_EQ(zero.cols(), 3u);
  EXPECT_EQ(zero.size(), 6u);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);

  DenseMatrix filled(2, 2, 1.5);
  EXPECT_DOUBLE_EQ(filled(1, 1), 1.5);

  DenseMatrix from_data(2, 2, {1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(from_data(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(from_data(1, 0), 3.0);

  EXPECT_THROW(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);

  const DenseMatrix eye = DenseMatrix::identity(3);
  EXPECT_DOUBLE_EQ(eye(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(eye(0, 1), 0.0);
  EXPECT_TRUE(eye.all_finite());
  EXPECT_EQ(eye.shape_str(), "3x3");
}

TEST(DenseMatrixTest, AllFiniteDetectsNanAndInf) {
  DenseMatrix m(2, 2, 1.0);
  EXPECT_TRUE(m.all_finite());
  m(0, 1) = std::nan("");
  EXPECT_FALSE(m.all_finite());
  m(0, 1) = INFINITY;
  EXPECT_FALSE(m.all_finite());
}

TEST(MatmulTest, IdentityPassthrough) {
  gfsa::Rng rng(1);
  const DenseMatrix m = random_matrix(3, 3, rng);
  const DenseMatrix out = gfsa::matmul(DenseMatrix::identity(3), m);
  EXPECT_EQ(out.data(), m.data());
}

TEST(MatmulTest, PermutationSwapsColumns) {
  const DenseMatrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseMatrix p(2, 2, {0.0, 1.0, 1.0, 0.0});
  const DenseMatrix out = gfsa::matmul(a, p);
  EXPECT_DOUBLE_EQ(out(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(out(1, 1), 3.0);
}

TEST(MatmulTest, MatchesTripleLoopOracle) {
  gfsa::Rng rng(7);
  const DenseMatrix a = random_matrix(5, 7, rng);
  const DenseMatrix b = random_matrix(7, 3, rng);
  const DenseMatrix c = gfsa::matmul(a, b);
  ASSERT_EQ(c.rows(), 5u);
  ASSERT_EQ(c.cols(), 3u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 7; ++k) want += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), want, 1e-14);
    }
  }
}

TEST(MatmulTest, ShapeMismatchNamesBothShapes) {
  const DenseMatrix a(2, 3);
  const DenseMatrix b(2, 3);
  try {
    gfsa::matmul(a, b);
    FAIL() << "expected shape error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(MatmulTest, TransposedVariantsMatchExplicitTranspose) {
  gfsa::Rng rng(11);
  const DenseMatrix a = random_matrix(4, 6, rng);
  const DenseMatrix b = random_matrix(5, 6, rng);
  const DenseMatrix nt = gfsa::matmul_nt(a, b);  // a * b^T
  const DenseMatrix want_nt = gfsa::matmul(a, gfsa::transpose(b));
  EXPECT_LE(gfsa::max_abs_diff(nt, want_nt), 1e-13);

  const DenseMatrix c = random_matrix(6, 4, rng);
  const DenseMatrix d = random_matrix(6, 5, rng);
  const DenseMatrix tn = gfsa::matmul_tn(c, d);  // c^T * d
  const DenseMatrix want_tn = gfsa::matmul(gfsa::transpose(c), d);
  EXPECT_LE(gfsa::max_abs_diff(tn, want_tn), 1e-13);

  EXPECT_THROW(gfsa::matmul_nt(a, c), std::invalid_argument);
  EXPECT_THROW(gfsa::matmul_tn(a, b), std::invalid_argument);
}

TEST(MatmulTest, TransposeRoundTrip) {
  gfsa::Rng rng(3);
  const DenseMatrix a = random_matrix(3, 5, rng);
  const DenseMatrix tt = gfsa::transpose(gfsa::transpose(a));
  EXPECT_EQ(tt.data(), a.data());
}

TEST(ElementwiseTest, AddSubScale) {
  const DenseMatrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
  const DenseMatrix b(2, 2, {0.5, 0.5, -1.0, 2.0});
  const DenseMatrix s = gfsa::add(a, b);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(s(1, 0), 2.0);
  const DenseMatrix d = gfsa::sub(a, b);
  EXPECT_DOUBLE_EQ(d(1, 1), 2.0);
  const DenseMatrix sc = gfsa::scale(a, -2.0);
  EXPECT_DOUBLE_EQ(sc(1, 1), -8.0);

  const DenseMatrix wrong(2, 3);
  EXPECT_THROW(gfsa::add(a, wrong), std::invalid_argument);
  EXPECT_THROW(gfsa::sub(a, wrong), std::invalid_argument);
  EXPECT_THROW(gfsa::max_abs_diff(a, wrong), std::invalid_argument);
}

TEST(SoftmaxTest, UniformRowFromEqualScores) {
  const DenseMatrix m(1, 3, {0.0, 0.0, 0.0});
  const DenseMatrix p = gfsa::softmax_rows(m);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(p(0, j), 1.0 / 3.0);
}

TEST(SoftmaxTest, MatchesHighPrecisionOracle) {
  // exp-normalized [1,2,3], frozen from a 60-digit arbitrary-precision run.
  const DenseMatrix m(1, 3, {1.0, 2.0, 3.0});
  const DenseMatrix p = gfsa::softmax_rows(m);
  EXPECT_NEAR(p(0, 0), 0.09003057317038045799802, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.24472847105479765247300, 1e-15);
  EXPECT_NEAR(p(0, 2), 0.66524095577482188952897, 1e-15);
}

TEST(SoftmaxTest, RowsSumToOneWithinTolerance) {
  gfsa::Rng rng(13);
  const DenseMatrix m = random_matrix(20, 30, rng, -50.0, 50.0);
  const DenseMatrix p = gfsa::softmax_rows(m);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      EXPECT_GT(p(i, j), 0.0);
      EXPECT_LE(p(i, j), 1.0);
      sum += p(i, j);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, StableUnderHugeScores) {
  const DenseMatrix m(1, 3, {1e308, 0.0, -1e308});
  const DenseMatrix p = gfsa::softmax_rows(m);
  EXPECT_TRUE(p.all_finite());
  EXPECT_DOUBLE_EQ(p(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.0);
}

TEST(NormTest, InfinityNormIsMaxAbsoluteRowSum) {
  const DenseMatrix m(2, 2, {1.0, -2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(gfsa::linf_norm(m), 7.0);
  EXPECT_DOUBLE_EQ(gfsa::max_abs(m), 4.0);
  const DenseMatrix z(3, 3);
  EXPECT_DOUBLE_EQ(gfsa::linf_norm(z), 0.0);
}

TEST(FormatTest, SeventeenDigitsRoundTripExactly) {
  gfsa::Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    double v = rng.uniform(-1e6, 1e6);
    if (i % 3 == 0) v *= 1e-12;
    if (i % 5 == 0) v *= 1e18;
    const std::string s = gfsa::format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
  EXPECT_EQ(gfsa::format_double(1.0), "1");
  EXPECT_EQ(gfsa::format_double(0.5), "0.5");
  EXPECT_EQ(gfsa::format_double(-0.25), "-0.25");
}

TEST(MatrixIoTest, TextRoundTripIsBitExact) {
  gfsa::Rng rng(19);
  DenseMatrix m = random_matrix(7, 4, rng, -10.0, 10.0);
  m(0, 0) = 1e-300;
  m(0, 1) = -9.87e250;
  m(6, 3) = 4e-17;
  const std::string text = gfsa::to_text(m);
  const DenseMatrix back = gfsa::parse_matrix(text);
  ASSERT_EQ(back.rows(), m.rows());
  ASSERT_EQ(back.cols(), m.cols());
  EXPECT_EQ(back.data(), m.data());
}

TEST(MatrixIoTest, HeaderErrorsCarryLineNumbers) {
  try {
    gfsa::parse_matrix("bogus\n", "input.mat");
    FAIL() << "expected header error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("input.mat:1:"), std::string::npos)
        << e.what();
  }
}

TEST(MatrixIoTest, TruncatedAndMalformedRowsCarryLineNumbers) {
  try {
    gfsa::parse_matrix("2 2\n1 2\n", "t.mat");
    FAIL() << "expected truncation error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("t.mat:3:"), std::string::npos) << e.what();
  }
  try {
    gfsa::parse_matrix("1 3\n1 2\n", "short.mat");
    FAIL() << "expected short-row error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("short.mat:2:"), std::string::npos);
  }
  try {
    gfsa::parse_matrix("1 2\n1 2 3\n", "long.mat");
    FAIL() << "expected trailing-content error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("long.mat:2:"), std::string::npos);
  }
  try {
    gfsa::parse_matrix("1 2\n1 nan\n", "nan.mat");
    FAIL() << "expected non-finite error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("nan.mat:2:"), std::string::npos);
  }
}

TEST(MatrixIoTest, MissingFileNamesPath) {
  try {
    gfsa::read_matrix("/nonexistent/dir/m.mat");
    FAIL() << "expected open error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/m.mat"),
              std::string::npos);
  }
}

TEST(MatrixIoTest, FileRoundTrip) {
  gfsa::Rng rng(23);
  const DenseMatrix m = random_matrix(3, 3, rng);
  const std::string path = ::testing::TempDir() + "roundtrip.mat";
  gfsa::write_matrix(m, path);
  const DenseMatrix back = gfsa::read_matrix(path);
  EXPECT_EQ(back.data(), m.data());
}

}  // namespace
