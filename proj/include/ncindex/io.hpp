#pragma once

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncindex/index_engine.hpp"
#include "ncindex/mode_algebra.hpp"
#include "ncindex/moyal_continuum.hpp"

namespace ncindex {

namespace detail {

inline std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw std::runtime_error("parse error: bad number '" + tok + "'");
  return v;
}

inline std::string next_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("parse error: unexpected end of input");
  return tok;
}

inline void expect(std::istream& in, const std::string& word) {
  const std::string tok = next_token(in);
  if (tok != word) throw std::runtime_error("parse error: expected '" + word + "', got '" + tok + "'");
}

}  // namespace detail

// Text format:
//   mode-element v1
//   n <n> m <m>
//   unit <re> <im>
//   modes <count>
//   <r_1> ... <r_n> <re> <im> ... (m*m entries, row-major)
// Reals are written as hexfloats so that a round trip is bit-exact.
inline void write_mode_element(std::ostream& out, const ModeElement& a) {
  out << "mode-element v1\n";
  out << "n " << a.n << " m " << a.m << "\n";
  out << "unit " << detail::hex(a.scalar_unit.real()) << " " << detail::hex(a.scalar_unit.imag()) << "\n";
  out << "modes " << a.coeffs.size() << "\n";
  for (const auto& kv : a.coeffs) {
    for (int x : kv.first) out << x << " ";
    for (int i = 0; i < a.m; ++i)
      for (int j = 0; j < a.m; ++j) out << " " << detail::hex(kv.second(i, j).real()) << " " << detail::hex(kv.second(i, j).imag());
    out << "\n";
  }
}

inline ModeElement read_mode_element(std::istream& in) {
  detail::expect(in, "mode-element");
  detail::expect(in, "v1");
  detail::expect(in, "n");
  const int n = std::stoi(detail::next_token(in));
  detail::expect(in, "m");
  const int m = std::stoi(detail::next_token(in));
  if (n < 1 || m < 1) throw std::runtime_error("parse error: n and m must be positive");
  ModeElement a(n, m);
  detail::expect(in, "unit");
  const double ur = detail::parse_double(detail::next_token(in));
  const double ui = detail::parse_double(detail::next_token(in));
  a.scalar_unit = cplx(ur, ui);
  detail::expect(in, "modes");
  const long count = std::stol(detail::next_token(in));
  for (long q = 0; q < count; ++q) {
    Mode r(n);
    for (int k = 0; k < n; ++k) r[k] = std::stoi(detail::next_token(in));
    MatC c(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double re = detail::parse_double(detail::next_token(in));
        const double im = detail::parse_double(detail::next_token(in));
        c(i, j) = cplx(re, im);
      }
    if (!a.coeffs.emplace(r, c).second) throw std::runtime_error("parse error: duplicate mode");
  }
  return a;
}

inline void save_mode_element(const std::string& path, const ModeElement& a) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_mode_element(f, a);
}

inline ModeElement load_mode_element(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return read_mode_element(f);
}

// Dense operator dump: "matrix <rows> <cols>" followed by hexfloat re/im pairs, row-major.
inline void write_matrix(std::ostream& out, const MatC& a) {
  out << "matrix " << a.rows() << " " << a.cols() << "\n";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out << (j ? " " : "") << detail::hex(a(i, j).real()) << " " << detail::hex(a(i, j).imag());
    out << "\n";
  }
}

inline MatC read_matrix(std::istream& in) {
  detail::expect(in, "matrix");
  const long r = std::stol(detail::next_token(in)), c = std::stol(detail::next_token(in));
  MatC a(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) {
      const double re = detail::parse_double(detail::next_token(in));
      a(i, j) = cplx(re, detail::parse_double(detail::next_token(in)));
    }
  return a;
}

// Grid samples as CSV: coordinates, real part, imaginary part.
inline void write_grid_samples(std::ostream& out, const GridSpec& g, const GridSamples& f) {
  for (int k = 0; k < g.n; ++k) out << "t" << k + 1 << ",";
  out << "re,im\n";
  out << std::setprecision(17);
  for (long q = 0; q < g.total(); ++q) {
    const std::vector<int> j = g.unflatten(q);
    for (int k = 0; k < g.n; ++k) out << g.coord(j[k]) << ",";
    out << f(q).real() << "," << f(q).imag() << "\n";
  }
}

inline nlohmann::json complex_json(cplx z) {
  if (std::isnan(z.real())) return nullptr;
  return nlohmann::json::array({z.real(), z.imag()});
}

inline nlohmann::json to_json(const IndexReport& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["cutoff"] = r.cutoff;
  j["numerical_index"] = r.numerical_index;
  j["tau_index"] = r.tau_index;
  j["local_value"] = complex_json(r.local_value);
  j["spectral_flow"] = r.spectral_flow ? nlohmann::json(*r.spectral_flow) : nlohmann::json(nullptr);
  j["kernel_dim"] = r.kernel_dim;
  j["cokernel_dim"] = r.cokernel_dim;
  j["kernel_weight"] = r.kernel_weight;
  j["cokernel_weight"] = r.cokernel_weight;
  j["sv_gap"] = std::isfinite(r.sv_gap) ? nlohmann::json(r.sv_gap) : nlohmann::json("inf");
  j["sv_max"] = r.sv_max;
  j["smallest_sv"] = r.smallest_sv;
  j["cutoffs_agree"] = r.cutoffs_agree;
  j["reliable"] = r.reliable;
  j["runtime_ms"] = r.runtime_ms;
  return j;
}

inline std::string csv_header() {
  return "label,cutoff,numerical_index,tau_index,local_re,local_im,spectral_flow,kernel_dim,cokernel_dim,sv_gap,cutoffs_agree,"
         "reliable";
}

inline std::string csv_row(const IndexReport& r) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << r.label << "," << r.cutoff << "," << r.numerical_index << "," << r.tau_index << ",";
  if (std::isnan(r.local_value.real()))
    os << ",,";
  else
    os << r.local_value.real() << "," << r.local_value.imag() << ",";
  if (r.spectral_flow) os << *r.spectral_flow;
  os << "," << r.kernel_dim << "," << r.cokernel_dim << "," << r.sv_gap << "," << (r.cutoffs_agree ? 1 : 0) << ","
     << (r.reliable ? 1 : 0);
  return os.str();
}

}  // namespace ncindex
