#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "nfk/errors.hpp"

namespace nfk {

// Periodic lattice on the torus [0,L)^d with N points per axis, spacing h = L/N.
// Lattice points sit at x_i = i*h; wrapped displacement coordinates live in
// [-L/2, L/2).
struct Grid {
    int dim = 1;
    double extent = 1.0;
    int n = 4;

    Grid() = default;
    Grid(int dim_, double extent_, int n_);

    double h() const { return extent / n; }
    std::size_t total() const;

    int wrap(int c) const {
        c %= n;
        return c < 0 ? c + n : c;
    }

    // Signed coordinate of cell index along one axis, wrapped to [-L/2, L/2).
    double signed_coord(int c) const {
        c = wrap(c);
        return (2 * c < n) ? c * h() : (c - n) * h();
    }

    std::size_t flatten(const std::array<int, 2>& cells) const;
    std::array<int, 2> unflatten(std::size_t idx) const;

    // idx_a - idx_b with periodic wrap per axis.
    std::size_t wrapped_diff(std::size_t idx_a, std::size_t idx_b) const;

    bool operator==(const Grid&) const = default;
};

// Real-valued function on a Grid (row-major for d = 2).
struct Field {
    Grid grid;
    std::vector<double> v;

    Field() = default;
    explicit Field(const Grid& g, double fill = 0.0) : grid(g), v(g.total(), fill) {}
    Field(const Grid& g, std::vector<double> values);

    std::size_t size() const { return v.size(); }
    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    double sup_norm() const;
    double mean() const;
    double min_value() const;
    double max_value() const;

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);
    Field& operator+=(double s);
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field pointwise(const Field& a, const Field& b);

// Uniformly spaced time series of fields, frame m at time t0 + m*dt with t0 = 0.
// Values between frames are linearly interpolated.
class FieldSeries {
  public:
    FieldSeries() = default;
    FieldSeries(double dt, std::vector<Field> frames);

    double dt() const { return dt_; }
    std::size_t size() const { return frames_.size(); }
    bool empty() const { return frames_.empty(); }
    double t_end() const { return frames_.empty() ? 0.0 : dt_ * double(frames_.size() - 1); }
    double time(std::size_t m) const { return dt_ * double(m); }
    const Grid& grid() const { return frames_.at(0).grid; }

    const Field& frame(std::size_t m) const { return frames_[m]; }
    Field& frame(std::size_t m) { return frames_[m]; }
    void push_back(Field f);

    bool covers(double t) const;
    Field at(double t) const;
    double value_at(double t, std::size_t cell) const;

  private:
    double dt_ = 0.0;
    std::vector<Field> frames_;
};

// Two-frame series representing a time-constant potential on [0, horizon].
FieldSeries constant_in_time(const Field& f, double horizon);

}  // namespace nfk
