#pragma once

// Periodic spectral machinery on the reference circle: the HeightField type
// (canonical Fourier coefficients with a nodal mirror) and spectral
// differentiation of arbitrary nodal rows.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mssim {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

// Full complex spectrum X_k = sum_j x_j e^{-i k theta_j}, k = 0..n-1.
inline std::vector<cplx> forward(std::span<const double> x) {
  std::vector<cplx> in(x.begin(), x.end());
  std::vector<cplx> out(x.size());
  fft_engine().fwd(out, in);
  return out;
}

// Inverse of forward() (includes the 1/n factor); imaginary part dropped.
inline std::vector<double> inverse_real(const std::vector<cplx>& spectrum) {
  std::vector<cplx> out(spectrum.size());
  fft_engine().inv(out, spectrum);
  std::vector<double> x(spectrum.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = out[j].real();
  return x;
}

}  // namespace detail

/// Signed wavenumber of FFT bin `idx` for an n-point grid.
inline int wavenumber(std::size_t idx, std::size_t n) {
  const auto k = static_cast<long>(idx);
  return k <= static_cast<long>(n / 2) ? static_cast<int>(k) : static_cast<int>(k - static_cast<long>(n));
}

/// Spectral derivative of a real periodic row sampled at theta_j = 2 pi j / n.
/// Odd-order derivatives drop the Nyquist mode.
inline std::vector<double> spectral_derivative(std::span<const double> row, int order) {
  const std::size_t n = row.size();
  if (order == 0) return {row.begin(), row.end()};
  auto spec = detail::forward(row);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const int k = wavenumber(idx, n);
    if ((order % 2 == 1) && static_cast<std::size_t>(std::abs(k)) == n / 2) {
      spec[idx] = 0.0;
      continue;
    }
    cplx factor = std::pow(cplx(0.0, static_cast<double>(k)), order);
    spec[idx] *= factor;
  }
  return detail::inverse_real(spec);
}

/// Real field on the reference circle. Stored canonically by its half spectrum
/// c_k = (1/n) sum_j h_j e^{-i k theta_j}, k = 0..n/2; the nodal values are
/// always the inverse transform of the stored coefficients, so two fields with
/// bitwise-equal coefficients are bitwise equal everywhere.
class HeightField {
 public:
  HeightField() = default;

  static HeightField zero(std::size_t n_theta) {
    return from_coeffs(std::vector<cplx>(n_theta / 2 + 1, 0.0), n_theta);
  }

  static HeightField from_values(std::span<const double> values) {
    const std::size_t n = values.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("HeightField: n_theta must be a power of two");
    auto spec = detail::forward(values);
    std::vector<cplx> half(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) half[k] = spec[k] / static_cast<double>(n);
    half[0] = half[0].real();
    half[n / 2] = half[n / 2].real();
    return from_coeffs(std::move(half), n);
  }

  static HeightField from_coeffs(std::vector<cplx> half, std::size_t n_theta) {
    if (!is_power_of_two(n_theta)) throw std::invalid_argument("HeightField: n_theta must be a power of two");
    if (half.size() != n_theta / 2 + 1) throw std::invalid_argument("HeightField: expected n_theta/2+1 coefficients");
    half[0] = half[0].real();
    half[n_theta / 2] = half[n_theta / 2].real();
    HeightField h;
    h.coeffs_ = std::move(half);
    h.values_ = detail::inverse_real(h.full_spectrum());
    return h;
  }

  /// Evaluates a callable f(theta) at the nodes.
  template <class F>
  static HeightField sample(std::size_t n_theta, F&& f) {
    std::vector<double> v(n_theta);
    for (std::size_t j = 0; j < n_theta; ++j) v[j] = f(node(j, n_theta));
    return from_values(v);
  }

  static double node(std::size_t j, std::size_t n) {
    return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
  }

  std::size_t size() const noexcept { return values_.size(); }
  double theta(std::size_t j) const { return node(j, size()); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<cplx>& coeffs() const noexcept { return coeffs_; }
  double operator[](std::size_t j) const { return values_[j]; }

  /// Coefficient for signed wavenumber k (conjugate symmetry applied for k < 0).
  cplx coeff(int k) const {
    const auto ak = static_cast<std::size_t>(std::abs(k));
    if (ak > size() / 2) return 0.0;
    return k >= 0 ? coeffs_[ak] : std::conj(coeffs_[ak]);
  }

  std::vector<double> derivative(int order) const {
    if (order == 0) return values_;
    auto spec = full_spectrum();
    const std::size_t n = size();
    for (std::size_t idx = 0; idx < n; ++idx) {
      const int k = wavenumber(idx, n);
      if ((order % 2 == 1) && static_cast<std::size_t>(std::abs(k)) == n / 2) {
        spec[idx] = 0.0;
        continue;
      }
      spec[idx] *= std::pow(cplx(0.0, static_cast<double>(k)), order);
    }
    return detail::inverse_real(spec);
  }

  /// Band-limited trigonometric interpolant at an arbitrary angle.
  double evaluate(double theta) const {
    const std::size_t n = size();
    double s = coeffs_[0].real();
    for (std::size_t k = 1; k < n / 2; ++k) {
      const cplx e = std::polar(1.0, static_cast<double>(k) * theta);
      s += 2.0 * (coeffs_[k] * e).real();
    }
    s += coeffs_[n / 2].real() * std::cos(static_cast<double>(n / 2) * theta);
    return s;
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Rotated copy h(theta - phi), applied exactly in Fourier space.
  HeightField rotated(double phi) const {
    auto c = coeffs_;
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= std::polar(1.0, -static_cast<double>(k) * phi);
    return from_coeffs(std::move(c), size());
  }

  /// Spectral resampling to another grid size (zero padding or truncation).
  HeightField resampled(std::size_t n_new) const {
    std::vector<cplx> c(n_new / 2 + 1, 0.0);
    const std::size_t kmax = std::min(n_new / 2, size() / 2);
    for (std::size_t k = 0; k <= kmax; ++k) c[k] = coeffs_[k];
    if (n_new > size()) c[size() / 2] *= 0.5;  // split the old Nyquist mode symmetrically
    if (n_new < size()) c[n_new / 2] = 2.0 * c[n_new / 2].real();
    return from_coeffs(std::move(c), n_new);
  }

  friend HeightField operator+(const HeightField& a, const HeightField& b) { return combine(a, 1.0, b, 1.0); }
  friend HeightField operator-(const HeightField& a, const HeightField& b) { return combine(a, 1.0, b, -1.0); }
  friend HeightField operator*(double s, const HeightField& a) { return combine(a, s, a, 0.0); }

  bool bitwise_equal(const HeightField& other) const {
    return size() == other.size() && coeffs_ == other.coeffs_ && values_ == other.values_;
  }

 private:
  static HeightField combine(const HeightField& a, double sa, const HeightField& b, double sb) {
    if (a.size() != b.size()) throw std::invalid_argument("HeightField: size mismatch");
    std::vector<cplx> c(a.coeffs_.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = sa * a.coeffs_[k] + sb * b.coeffs_[k];
    return from_coeffs(std::move(c), a.size());
  }

  std::vector<cplx> full_spectrum() const {
    const std::size_t n = coeffs_.size() * 2 - 2;
    std::vector<cplx> spec(n);
    const double scale = static_cast<double>(n);
    for (std::size_t k = 0; k <= n / 2; ++k) spec[k] = coeffs_[k] * scale;
    for (std::size_t k = 1; k < n / 2; ++k) spec[n - k] = std::conj(spec[k]);
    return spec;
  }

  std::vector<cplx> coeffs_;
  std::vector<double> values_;
};

}  // namespace mssim
