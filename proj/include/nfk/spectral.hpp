#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "nfk/grid.hpp"

namespace nfk {

// Real-to-complex FFT engine for one grid (half-spectrum layout, FFTW r2c/c2r).
// Plans are created once; execution uses per-call scratch so a single instance
// can be shared across threads.
class Spectral {
  public:
    explicit Spectral(const Grid& g);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const Grid& grid() const { return grid_; }
    std::size_t n_modes() const { return n_modes_; }

    // Unnormalized forward DFT: spec_k = sum_j real_j e^{-i lambda_k x_j / h}.
    void forward(const std::vector<double>& real, std::vector<std::complex<double>>& spec) const;
    // Inverse including the 1/N^d normalization (spec is clobbered).
    void inverse(std::vector<std::complex<double>> spec, std::vector<double>& real) const;

    // Signed integer frequencies of a half-layout mode, one per axis.
    std::array<int, 2> freq(std::size_t mode) const;
    // |lambda|^2 with lambda_axis = 2*pi*freq/L.
    double lambda_sq(std::size_t mode) const;

  private:
    Grid grid_;
    std::size_t n_modes_ = 0;
    void* fwd_plan_ = nullptr;
    void* inv_plan_ = nullptr;
};

// Lattice Fourier symbol of a kernel: h^d * DFT(values), so symbol(0) equals
// the discrete integral h^d * sum(values).
struct KernelSpectrum {
    std::vector<std::complex<double>> symbol;
    double integral() const { return symbol.empty() ? 0.0 : symbol[0].real(); }
};

KernelSpectrum make_kernel_spectrum(const Spectral& eng, const std::vector<double>& values);

// e^{t L_J} and shifted variants, diagonalized on the Fourier modes. One
// instance per kernel; apply() is const and thread-safe.
class SemigroupOperator {
  public:
    SemigroupOperator(std::shared_ptr<const Spectral> eng, std::vector<double> kernel_values);

    const Spectral& engine() const { return *eng_; }
    const KernelSpectrum& spectrum() const { return spec_; }
    double integral() const { return spec_.integral(); }

    // e^{t L_J} f with multiplier exp(t*(symbol(k) - symbol(0))).
    Field apply(double t, const Field& f) const;
    // e^{t (L_J + shift)} f, i.e. multiplier exp(t*(symbol(k) - symbol(0) + shift)).
    Field apply_shifted(double t, double shift, const Field& f) const;
    // h^d-weighted circular convolution J * f.
    Field convolve(const Field& f) const;

  private:
    std::shared_ptr<const Spectral> eng_;
    KernelSpectrum spec_;
};

}  // namespace nfk
