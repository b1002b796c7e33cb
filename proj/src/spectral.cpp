#include "nfk/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace nfk {

namespace {

// The FFTW planner is not reentrant; execution via the new-array interface is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t half_modes(const Grid& g) {
    std::size_t half = std::size_t(g.n) / 2 + 1;
    return g.dim == 1 ? half : std::size_t(g.n) * half;
}

}  // namespace

Spectral::Spectral(const Grid& g) : grid_(g), n_modes_(half_modes(g)) {
    std::vector<double> rbuf(g.total());
    std::vector<std::complex<double>> cbuf(n_modes_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (g.dim == 1) {
        fwd_plan_ = fftw_plan_dft_r2c_1d(g.n, rbuf.data(),
                                         reinterpret_cast<fftw_complex*>(cbuf.data()), flags);
        inv_plan_ = fftw_plan_dft_c2r_1d(g.n, reinterpret_cast<fftw_complex*>(cbuf.data()),
                                         rbuf.data(), flags);
    } else {
        fwd_plan_ = fftw_plan_dft_r2c_2d(g.n, g.n, rbuf.data(),
                                         reinterpret_cast<fftw_complex*>(cbuf.data()), flags);
        inv_plan_ = fftw_plan_dft_c2r_2d(g.n, g.n, reinterpret_cast<fftw_complex*>(cbuf.data()),
                                         rbuf.data(), flags);
    }
}

Spectral::~Spectral() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd_plan_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_plan_));
    if (inv_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inv_plan_));
}

void Spectral::forward(const std::vector<double>& real,
                       std::vector<std::complex<double>>& spec) const {
    if (real.size() != grid_.total()) throw DimensionError("spectral forward: size mismatch");
    spec.resize(n_modes_);
    std::vector<double> in(real);  // r2c may clobber input for d >= 2
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_plan_), in.data(),
                         reinterpret_cast<fftw_complex*>(spec.data()));
}

void Spectral::inverse(std::vector<std::complex<double>> spec, std::vector<double>& real) const {
    if (spec.size() != n_modes_) throw DimensionError("spectral inverse: size mismatch");
    real.resize(grid_.total());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_plan_),
                         reinterpret_cast<fftw_complex*>(spec.data()), real.data());
    double scale = 1.0 / double(grid_.total());
    for (double& x : real) x *= scale;
}

std::array<int, 2> Spectral::freq(std::size_t mode) const {
    if (grid_.dim == 1) {
        return {int(mode), 0};
    }
    std::size_t half = std::size_t(grid_.n) / 2 + 1;
    int kx = int(mode / half);
    int ky = int(mode % half);
    if (2 * kx > grid_.n) kx -= grid_.n;
    return {kx, ky};
}

double Spectral::lambda_sq(std::size_t mode) const {
    auto f = freq(mode);
    double unit = 2.0 * std::numbers::pi / grid_.extent;
    double lx = unit * f[0];
    double ly = unit * f[1];
    return grid_.dim == 1 ? lx * lx : lx * lx + ly * ly;
}

KernelSpectrum make_kernel_spectrum(const Spectral& eng, const std::vector<double>& values) {
    KernelSpectrum ks;
    eng.forward(values, ks.symbol);
    double hd = std::pow(eng.grid().h(), eng.grid().dim);
    for (auto& z : ks.symbol) z *= hd;
    return ks;
}

SemigroupOperator::SemigroupOperator(std::shared_ptr<const Spectral> eng,
                                     std::vector<double> kernel_values)
    : eng_(std::move(eng)), spec_(make_kernel_spectrum(*eng_, kernel_values)) {}

Field SemigroupOperator::apply(double t, const Field& f) const { return apply_shifted(t, 0.0, f); }

Field SemigroupOperator::apply_shifted(double t, double shift, const Field& f) const {
    if (t < 0.0) throw DomainError("semigroup: negative time");
    require_same_grid(f.grid, eng_->grid(), "semigroup");
    std::vector<std::complex<double>> spec;
    eng_->forward(f.v, spec);
    const std::complex<double> base = spec_.symbol[0].real() - shift;
    for (std::size_t k = 0; k < spec.size(); ++k)
        spec[k] *= std::exp(t * (spec_.symbol[k] - base));
    Field out(f.grid);
    eng_->inverse(std::move(spec), out.v);
    return out;
}

Field SemigroupOperator::convolve(const Field& f) const {
    require_same_grid(f.grid, eng_->grid(), "convolve");
    std::vector<std::complex<double>> spec;
    eng_->forward(f.v, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= spec_.symbol[k];
    Field out(f.grid);
    eng_->inverse(std::move(spec), out.v);
    return out;
}

}  // namespace nfk
