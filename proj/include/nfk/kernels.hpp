#pragma once

#include <optional>
#include <vector>

#include "nfk/grid.hpp"
#include "nfk/spectral.hpp"

namespace nfk {

// Non-negative dispersal kernel on a grid; mass = h^d * sum(values).
struct Kernel {
    Grid grid;
    std::vector<double> values;
    double mass = 0.0;
};

// Signed combination such as kappa+ a+ - kappa kappa- a-.
struct SignedKernel {
    Grid grid;
    std::vector<double> values;
    double l1_mass = 0.0;   // h^d * sum |values|
    double integral = 0.0;  // h^d * sum values
    bool nonneg = false;
};

// Birth/competition/mortality constants of the logistic model.
struct ModelParams {
    double kappa_plus = 0.0;
    double kappa_minus = 0.0;
    double mortality = 0.0;

    void validate() const;
    double theta() const { return (kappa_plus - mortality) / kappa_minus; }
    double beta_rate() const { return kappa_plus - mortality; }
    double gamma_rate(const SignedKernel& j_theta) const { return kappa_plus - j_theta.l1_mass; }
};

struct KernelProfile {
    enum class Type { gaussian, tophat, tabulated };
    Type type = Type::gaussian;
    double sigma = 0.0;
    double radius = 0.0;
    std::vector<double> table;

    static KernelProfile gaussian(double sigma);
    static KernelProfile tophat(double radius);
    static KernelProfile tabulated(std::vector<double> values);
};

// Samples the profile at lattice points (wrapped periodically), then
// renormalizes to discrete mass exactly 1. Throws KernelError when the profile
// is narrower than one cell.
Kernel build_kernel(const KernelProfile& profile, const Grid& grid);

Kernel scale_kernel(Kernel k, double factor);

// J_kappa = kappa+ a+ - kappa kappa- a-, with the nonneg flag set by pointwise
// inspection and integral = kappa+ - kappa*kappa-.
SignedKernel combined_kernel(const ModelParams& p, const Kernel& a_plus, const Kernel& a_minus,
                             double kappa);

SignedKernel as_signed(const Kernel& k);
// Requires the nonneg flag; the result drives the jump-process sampler.
Kernel to_kernel(const SignedKernel& k);

// h^d-weighted circular convolution (spectral).
Field convolve(const Kernel& k, const Field& f);
Field convolve(const SignedKernel& k, const Field& f);

// L_J f = J * f - (integral J) f.
Field apply_generator(const Kernel& k, const Field& f);
Field apply_generator(const SignedKernel& k, const Field& f);

// e^{t L_J} f via the spectral multiplier exp(t (Jhat(lambda) - Jhat(0))).
Field semigroup_apply(const Kernel& k, double t, const Field& f);
Field semigroup_apply(const SignedKernel& k, double t, const Field& f);

SemigroupOperator make_operator(const Kernel& k);
SemigroupOperator make_operator(const SignedKernel& k);
SemigroupOperator make_operator(std::shared_ptr<const Spectral> eng, const Kernel& k);
SemigroupOperator make_operator(std::shared_ptr<const Spectral> eng, const SignedKernel& k);

}  // namespace nfk
