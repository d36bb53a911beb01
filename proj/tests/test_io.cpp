#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ncindex/io.hpp"

using namespace ncindex;

TEST(ModeElementText, RoundTripIsBitExact) {
  std::mt19937_64 rng(99);
  ModeElement a = random_element(3, 2, 1, rng);
  a.scalar_unit = cplx(0.1, -1.0 / 3.0);
  std::stringstream ss;
  write_mode_element(ss, a);
  ModeElement b = read_mode_element(ss);
  EXPECT_EQ(b.n, 3);
  EXPECT_EQ(b.m, 2);
  EXPECT_EQ(b.scalar_unit, a.scalar_unit);
  ASSERT_EQ(b.coeffs.size(), a.coeffs.size());
  for (const auto& kv : a.coeffs) EXPECT_EQ((b.coeff(kv.first) - kv.second).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModeElementText, MalformedInputNamesTheProblem) {
  std::stringstream bad("mode-element v1\nn 1 m 1\nunit 0 0\nmodes 2\n1 1 0\n1 1 0\n");
  try {
    read_mode_element(bad);
    FAIL() << "duplicate mode accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
  std::stringstream trunc("mode-element v1\nn 2 m 1\nunit 0 0\nmodes 1\n0\n");
  EXPECT_THROW(read_mode_element(trunc), std::runtime_error);
  std::stringstream word("mode-element v2\n");
  EXPECT_THROW(read_mode_element(word), std::runtime_error);
}

TEST(MatrixText, RoundTrip) {
  MatC a(2, 3);
  a << cplx(1, 2), cplx(0.1, 0), cplx(-3, 1e-300), cplx(0, 0), cplx(5, 5), cplx(1.0 / 7.0, 0);
  std::stringstream ss;
  write_matrix(ss, a);
  MatC b = read_matrix(ss);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Report, JsonAndCsvFields) {
  IndexReport r;
  r.label = "x";
  r.cutoff = 8;
  r.numerical_index = -2;
  r.tau_index = -2.0;
  r.local_value = cplx(-2.0, 1e-13);
  r.spectral_flow = -2;
  r.sv_gap = std::numeric_limits<double>::infinity();
  r.reliable = true;
  nlohmann::json j = to_json(r);
  EXPECT_EQ(j["numerical_index"], -2);
  EXPECT_EQ(j["spectral_flow"], -2);
  EXPECT_EQ(j["sv_gap"], "inf");
  EXPECT_EQ(j["local_value"][0], -2.0);
  IndexReport empty;
  EXPECT_TRUE(to_json(empty)["local_value"].is_null());
  EXPECT_TRUE(to_json(empty)["spectral_flow"].is_null());
  const std::string row = csv_row(r);
  const std::string head = csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(head.begin(), head.end(), ','));
  EXPECT_EQ(row.rfind("x,8,-2,", 0), 0u);
}
