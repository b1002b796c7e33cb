#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace nfk {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    std::size_t n = 0;
    double stderr_mean() const;
};

MeanVar mean_var(std::span<const double> xs);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    std::size_t n = 0;
};

LinearFit least_squares(std::span<const double> x, std::span<const double> y);

// Upper regularized incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// P(X > stat) for a chi-square variable with dof degrees of freedom.
double chi_square_pvalue(double stat, int dof);

std::uint64_t fnv1a(std::string_view data);

}  // namespace nfk
