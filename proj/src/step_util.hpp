#pragma once

#include <span>

#include "ellcone/certificate.hpp"
#include "ellcone/ellipsoid.hpp"
#include "ellcone/interval.hpp"

// Internal Eigen <-> certificate payload bridges.
namespace ellcone::detail {

inline void add_mat(cert::Step& s, const std::string& name, const Mat& m) {
  std::vector<double> row;
  row.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
  s.add_matrix(name, int(m.rows()), int(m.cols()), row);
}

inline void add_vec(cert::Step& s, const std::string& name, const Vec& v) {
  s.add_vector(name, std::span<const double>(v.data(), size_t(v.size())));
}

inline void add_imat(cert::Step& s, const std::string& name,
                     const std::vector<Interval>& entries, int rows, int cols) {
  std::vector<double> lo, hi;
  lo.reserve(entries.size());
  hi.reserve(entries.size());
  for (const Interval& e : entries) {
    lo.push_back(e.lo);
    hi.push_back(e.hi);
  }
  s.add_imatrix(name, rows, cols, lo, hi);
}

inline void add_ivec(cert::Step& s, const std::string& name,
                     const std::vector<Interval>& entries) {
  std::vector<double> lo, hi;
  for (const Interval& e : entries) {
    lo.push_back(e.lo);
    hi.push_back(e.hi);
  }
  s.add_ivector(name, lo, hi);
}

}  // namespace ellcone::detail
