#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "svph/grid.hpp"

namespace svph {

using cplx = std::complex<double>;

/// Fourier coefficients g^(k, l) = int g e^{-2 pi i (k x + l theta)} of a
/// cell-centred grid function, by the midpoint rule.
class GridSpectrum {
 public:
  explicit GridSpectrum(const GridFunction& g) : nx_(g.nx), nt_(g.nt), c_(g.size()) {
    Eigen::FFT<double> fft;
    std::vector<cplx> row(nx_), out;
    for (std::size_t j = 0; j < nt_; ++j) {
      for (std::size_t i = 0; i < nx_; ++i) row[i] = g.at(i, j);
      fft.fwd(out, row);
      for (std::size_t i = 0; i < nx_; ++i) c_[j * nx_ + i] = out[i];
    }
    std::vector<cplx> col(nt_);
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < nt_; ++j) col[j] = c_[j * nx_ + i];
      fft.fwd(out, col);
      for (std::size_t j = 0; j < nt_; ++j) c_[j * nx_ + i] = out[j];
    }
    const double scale = 1.0 / static_cast<double>(nx_ * nt_);
    for (auto& v : c_) v *= scale;
  }

  /// Coefficient at frequency (k, l), |k| <= nx/2, |l| <= nt/2.
  cplx at(int k, int l) const {
    const std::size_t i = static_cast<std::size_t>((k % static_cast<int>(nx_) + nx_) % nx_);
    const std::size_t j = static_cast<std::size_t>((l % static_cast<int>(nt_) + nt_) % nt_);
    // sample points sit at cell centres, shifted by half a cell
    const double phase = -std::numbers::pi * (static_cast<double>(k) / nx_ + static_cast<double>(l) / nt_);
    return c_[j * nx_ + i] * cplx(std::cos(phase), std::sin(phase));
  }

  int kx_max() const { return static_cast<int>(nx_ / 2) - (nx_ % 2 == 0 ? 1 : 0); }
  int kt_max() const { return static_cast<int>(nt_ / 2) - (nt_ % 2 == 0 ? 1 : 0); }

 private:
  std::size_t nx_, nt_;
  std::vector<cplx> c_;
};

}  // namespace svph
