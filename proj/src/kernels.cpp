#include "nfk/kernels.hpp"

#include <cmath>
#include <string>

namespace nfk {

void ModelParams::validate() const {
    if (!(kappa_plus > 0.0)) throw ConfigError("model: kappa_plus must be positive");
    if (!(kappa_minus > 0.0)) throw ConfigError("model: kappa_minus must be positive");
    if (!(mortality > 0.0 && mortality < kappa_plus))
        throw ConfigError("model: need 0 < m < kappa_plus");
}

KernelProfile KernelProfile::gaussian(double sigma) {
    KernelProfile p;
    p.type = Type::gaussian;
    p.sigma = sigma;
    return p;
}

KernelProfile KernelProfile::tophat(double radius) {
    KernelProfile p;
    p.type = Type::tophat;
    p.radius = radius;
    return p;
}

KernelProfile KernelProfile::tabulated(std::vector<double> values) {
    KernelProfile p;
    p.type = Type::tabulated;
    p.table = std::move(values);
    return p;
}

namespace {

double profile_distance_sq(const Grid& g, std::size_t idx) {
    auto c = g.unflatten(idx);
    double dx = g.signed_coord(c[0]);
    double dy = g.dim == 2 ? g.signed_coord(c[1]) : 0.0;
    return dx * dx + dy * dy;
}

}  // namespace

Kernel build_kernel(const KernelProfile& profile, const Grid& grid) {
    const double h = grid.h();
    Kernel k;
    k.grid = grid;
    k.values.assign(grid.total(), 0.0);

    switch (profile.type) {
        case KernelProfile::Type::gaussian: {
            if (!(profile.sigma > 0.0)) throw KernelError("gaussian kernel: sigma must be positive");
            if (profile.sigma < h)
                throw KernelError("gaussian kernel: sigma narrower than one cell (sigma < h)");
            // Sum over periodic images; beyond the nearest images the tails are
            // below double precision for L > ~10 sigma.
            int images = std::max(1, int(std::ceil(8.0 * profile.sigma / grid.extent)) + 1);
            double s2 = 2.0 * profile.sigma * profile.sigma;
            for (std::size_t i = 0; i < k.values.size(); ++i) {
                auto c = grid.unflatten(i);
                double acc = 0.0;
                for (int ix = -images; ix <= images; ++ix) {
                    double dx = grid.signed_coord(c[0]) + ix * grid.extent;
                    if (grid.dim == 1) {
                        acc += std::exp(-dx * dx / s2);
                    } else {
                        for (int iy = -images; iy <= images; ++iy) {
                            double dy = grid.signed_coord(c[1]) + iy * grid.extent;
                            acc += std::exp(-(dx * dx + dy * dy) / s2);
                        }
                    }
                }
                k.values[i] = acc;
            }
            break;
        }
        case KernelProfile::Type::tophat: {
            if (!(profile.radius > 0.0)) throw KernelError("tophat kernel: radius must be positive");
            if (profile.radius < h)
                throw KernelError("tophat kernel: radius narrower than one cell (radius < h)");
            double r2 = profile.radius * profile.radius * (1.0 + 1e-12) + 1e-12 * h * h;
            for (std::size_t i = 0; i < k.values.size(); ++i)
                if (profile_distance_sq(grid, i) <= r2) k.values[i] = 1.0;
            break;
        }
        case KernelProfile::Type::tabulated: {
            if (profile.table.size() != grid.total())
                throw KernelError("tabulated kernel: need exactly N^d values, got " +
                                  std::to_string(profile.table.size()));
            double mx = 0.0;
            for (double x : profile.table) {
                if (x < 0.0) throw KernelError("tabulated kernel: negative entry");
                mx = std::max(mx, x);
            }
            if (mx == 0.0) throw KernelError("tabulated kernel: all entries zero");
            k.values = profile.table;
            break;
        }
    }

    const double hd = std::pow(h, grid.dim);
    double sum = 0.0;
    for (double x : k.values) sum += x;
    double mass = hd * sum;
    if (!(mass > 0.0)) throw KernelError("kernel: zero discrete mass after sampling");
    for (double& x : k.values) x /= mass;
    sum = 0.0;
    for (double x : k.values) sum += x;
    k.mass = hd * sum;
    return k;
}

Kernel scale_kernel(Kernel k, double factor) {
    if (!(factor > 0.0)) throw KernelError("scale_kernel: factor must be positive");
    for (double& x : k.values) x *= factor;
    k.mass *= factor;
    return k;
}

SignedKernel combined_kernel(const ModelParams& p, const Kernel& a_plus, const Kernel& a_minus,
                             double kappa) {
    p.validate();
    require_same_grid(a_plus.grid, a_minus.grid, "combined_kernel");
    if (kappa < 0.0 || kappa > p.theta() * (1.0 + 1e-12))
        throw DomainError("combined_kernel: kappa must lie in [0, theta]");
    SignedKernel j;
    j.grid = a_plus.grid;
    j.values.resize(a_plus.values.size());
    double abs_sum = 0.0, sum = 0.0, mn = 0.0;
    for (std::size_t i = 0; i < j.values.size(); ++i) {
        double v = p.kappa_plus * a_plus.values[i] - kappa * p.kappa_minus * a_minus.values[i];
        j.values[i] = v;
        abs_sum += std::abs(v);
        sum += v;
        mn = std::min(mn, v);
    }
    double hd = std::pow(j.grid.h(), j.grid.dim);
    j.l1_mass = hd * abs_sum;
    j.integral = hd * sum;
    j.nonneg = mn >= 0.0;
    return j;
}

SignedKernel as_signed(const Kernel& k) {
    SignedKernel s;
    s.grid = k.grid;
    s.values = k.values;
    s.l1_mass = k.mass;
    s.integral = k.mass;
    s.nonneg = true;
    return s;
}

Kernel to_kernel(const SignedKernel& s) {
    if (!s.nonneg)
        throw AssumptionViolation("to_kernel: signed kernel has negative values; "
                                  "the jump-process representation requires J >= 0");
    Kernel k;
    k.grid = s.grid;
    k.values = s.values;
    k.mass = s.integral;
    return k;
}

namespace {

Field convolve_values(const Grid& g, const std::vector<double>& values, const Field& f) {
    require_same_grid(g, f.grid, "convolve");
    Spectral eng(g);
    KernelSpectrum ks = make_kernel_spectrum(eng, values);
    std::vector<std::complex<double>> spec;
    eng.forward(f.v, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= ks.symbol[k];
    Field out(f.grid);
    eng.inverse(std::move(spec), out.v);
    return out;
}

}  // namespace

Field convolve(const Kernel& k, const Field& f) { return convolve_values(k.grid, k.values, f); }
Field convolve(const SignedKernel& k, const Field& f) {
    return convolve_values(k.grid, k.values, f);
}

Field apply_generator(const Kernel& k, const Field& f) {
    Field out = convolve(k, f);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= k.mass * f.v[i];
    return out;
}

Field apply_generator(const SignedKernel& k, const Field& f) {
    Field out = convolve(k, f);
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= k.integral * f.v[i];
    return out;
}

Field semigroup_apply(const Kernel& k, double t, const Field& f) {
    return make_operator(k).apply(t, f);
}

Field semigroup_apply(const SignedKernel& k, double t, const Field& f) {
    return make_operator(k).apply(t, f);
}

SemigroupOperator make_operator(std::shared_ptr<const Spectral> eng, const Kernel& k) {
    require_same_grid(eng->grid(), k.grid, "make_operator");
    return SemigroupOperator(std::move(eng), k.values);
}

SemigroupOperator make_operator(std::shared_ptr<const Spectral> eng, const SignedKernel& k) {
    require_same_grid(eng->grid(), k.grid, "make_operator");
    return SemigroupOperator(std::move(eng), k.values);
}

SemigroupOperator make_operator(const Kernel& k) {
    return SemigroupOperator(std::make_shared<Spectral>(k.grid), k.values);
}

SemigroupOperator make_operator(const SignedKernel& k) {
    return SemigroupOperator(std::make_shared<Spectral>(k.grid), k.values);
}

}  // namespace nfk
