#include "nfk/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nfk {

Grid::Grid(int dim_, double extent_, int n_) : dim(dim_), extent(extent_), n(n_) {
    if (dim < 1 || dim > 2)
        throw ConfigError("grid: dim must be 1 or 2, got " + std::to_string(dim));
    if (n < 4) throw ConfigError("grid: N must be >= 4, got " + std::to_string(n));
    if (!(extent > 0.0)) throw ConfigError("grid: L must be positive");
}

std::size_t Grid::total() const {
    std::size_t t = 1;
    for (int k = 0; k < dim; ++k) t *= std::size_t(n);
    return t;
}

std::size_t Grid::flatten(const std::array<int, 2>& cells) const {
    if (dim == 1) return std::size_t(wrap(cells[0]));
    return std::size_t(wrap(cells[0])) * std::size_t(n) + std::size_t(wrap(cells[1]));
}

std::array<int, 2> Grid::unflatten(std::size_t idx) const {
    if (dim == 1) return {int(idx), 0};
    return {int(idx / std::size_t(n)), int(idx % std::size_t(n))};
}

std::size_t Grid::wrapped_diff(std::size_t idx_a, std::size_t idx_b) const {
    auto a = unflatten(idx_a);
    auto b = unflatten(idx_b);
    return flatten({a[0] - b[0], a[1] - b[1]});
}

Field::Field(const Grid& g, std::vector<double> values) : grid(g), v(std::move(values)) {
    if (v.size() != g.total()) throw DimensionError("field: value count does not match grid");
}

double Field::sup_norm() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double Field::mean() const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

double Field::min_value() const { return *std::min_element(v.begin(), v.end()); }
double Field::max_value() const { return *std::max_element(v.begin(), v.end()); }

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw DimensionError(std::string(what) + ": operands live on different grids");
}

Field& Field::operator+=(const Field& o) {
    require_same_grid(grid, o.grid, "field +=");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    require_same_grid(grid, o.grid, "field -=");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& x : v) x *= s;
    return *this;
}

Field& Field::operator+=(double s) {
    for (double& x : v) x += s;
    return *this;
}

Field operator+(Field a, const Field& b) {
    a += b;
    return a;
}

Field operator-(Field a, const Field& b) {
    a -= b;
    return a;
}

Field operator*(double s, Field a) {
    a *= s;
    return a;
}

Field pointwise(const Field& a, const Field& b) {
    require_same_grid(a.grid, b.grid, "pointwise product");
    Field out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
    return out;
}

FieldSeries::FieldSeries(double dt, std::vector<Field> frames) : dt_(dt), frames_(std::move(frames)) {
    if (dt_ <= 0.0) throw DomainError("field series: dt must be positive");
    for (const Field& f : frames_) require_same_grid(f.grid, frames_.front().grid, "field series");
}

void FieldSeries::push_back(Field f) {
    if (!frames_.empty()) require_same_grid(f.grid, frames_.front().grid, "field series");
    frames_.push_back(std::move(f));
}

bool FieldSeries::covers(double t) const {
    return !frames_.empty() && t >= -1e-12 && t <= t_end() + 1e-9 * (1.0 + t_end());
}

Field FieldSeries::at(double t) const {
    if (!covers(t)) throw DomainError("field series: time outside stored range");
    if (frames_.size() == 1) return frames_[0];
    double pos = std::clamp(t / dt_, 0.0, double(frames_.size() - 1));
    std::size_t m = std::min(std::size_t(pos), frames_.size() - 2);
    double w = pos - double(m);
    if (w < 1e-12) return frames_[m];
    if (w > 1.0 - 1e-12) return frames_[m + 1];
    Field out = frames_[m];
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = (1.0 - w) * frames_[m].v[i] + w * frames_[m + 1].v[i];
    return out;
}

double FieldSeries::value_at(double t, std::size_t cell) const {
    if (!covers(t)) throw DomainError("field series: time outside stored range");
    if (frames_.size() == 1) return frames_[0].v[cell];
    double pos = std::clamp(t / dt_, 0.0, double(frames_.size() - 1));
    std::size_t m = std::min(std::size_t(pos), frames_.size() - 2);
    double w = pos - double(m);
    return (1.0 - w) * frames_[m].v[cell] + w * frames_[m + 1].v[cell];
}

FieldSeries constant_in_time(const Field& f, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("constant_in_time: horizon must be positive");
    return FieldSeries(horizon, {f, f});
}

}  // namespace nfk
