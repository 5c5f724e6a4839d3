#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "evgnep/common.hpp"
#include "evgnep/imaging.hpp"

namespace evgnep {

// ASCII PGM, max-normalized to 255. values(x-1, y-1); emitted row-major,
// one image row per y.
inline void write_pgm(const Eigen::ArrayXXd& values, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot open '" + path + "' for writing");
  const auto nx = values.rows(), ny = values.cols();
  const double max = values.maxCoeff();
  out << "P2\n" << nx << ' ' << ny << "\n255\n";
  for (Eigen::Index y = 0; y < ny; ++y) {
    for (Eigen::Index x = 0; x < nx; ++x) {
      const int level = max > 0.0 ? static_cast<int>(std::lround(values(x, y) / max * 255.0)) : 0;
      out << level << (x + 1 < nx ? ' ' : '\n');
    }
  }
  if (!out) throw IoError("write_pgm: write failure on '" + path + "'");
}

inline void write_pgm(const WarpedImage& img, const std::string& path) {
  write_pgm(img.values, path);
}

// ASCII PGM with explicit integer levels (no normalization); used for
// player-indexed composites.
inline void write_pgm_indexed(const Eigen::ArrayXXi& levels, int maxval, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm_indexed: cannot open '" + path + "' for writing");
  const auto nx = levels.rows(), ny = levels.cols();
  out << "P2\n" << nx << ' ' << ny << '\n' << maxval << '\n';
  for (Eigen::Index y = 0; y < ny; ++y)
    for (Eigen::Index x = 0; x < nx; ++x) out << levels(x, y) << (x + 1 < nx ? ' ' : '\n');
  if (!out) throw IoError("write_pgm_indexed: write failure on '" + path + "'");
}

// CSV grid dump: one row per y, columns x = 1..nx.
inline void write_grid_csv(const Eigen::ArrayXXd& values, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_grid_csv: cannot open '" + path + "' for writing");
  char buf[64];
  for (Eigen::Index y = 0; y < values.cols(); ++y) {
    for (Eigen::Index x = 0; x < values.rows(); ++x) {
      std::snprintf(buf, sizeof(buf), "%.17g", values(x, y));
      out << buf << (x + 1 < values.rows() ? "," : "\n");
    }
  }
  if (!out) throw IoError("write_grid_csv: write failure on '" + path + "'");
}

}  // namespace evgnep
