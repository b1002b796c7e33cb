#include "nfk/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "nfk/errors.hpp"

namespace nfk {

namespace {

constexpr char kMagic[4] = {'N', 'F', 'K', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw DomainError("lattice binary: truncated file");
    return value;
}

}  // namespace

void write_lattice_binary(const std::filesystem::path& path, const Grid& grid,
                          std::span<const double> values) {
    if (values.size() != grid.total())
        throw DimensionError("lattice binary: value count does not match grid");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DomainError("lattice binary: cannot open " + path.string());
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, std::int32_t(grid.dim));
    put(os, std::int64_t(grid.n));
    put(os, grid.extent);
    os.write(reinterpret_cast<const char*>(values.data()),
             std::streamsize(values.size() * sizeof(double)));
    if (!os) throw DomainError("lattice binary: write failed for " + path.string());
}

LatticeData read_lattice_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("lattice binary: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DomainError("lattice binary: bad magic in " + path.string());
    auto version = get<std::uint32_t>(is);
    if (version != kVersion) throw DomainError("lattice binary: unsupported version");
    auto dim = get<std::int32_t>(is);
    auto n = get<std::int64_t>(is);
    auto extent = get<double>(is);
    LatticeData out;
    out.grid = Grid(int(dim), extent, int(n));
    out.values.resize(out.grid.total());
    is.read(reinterpret_cast<char*>(out.values.data()),
            std::streamsize(out.values.size() * sizeof(double)));
    if (!is) throw DomainError("lattice binary: truncated values in " + path.string());
    return out;
}

void write_lattice_csv(const std::filesystem::path& path, const Grid& grid,
                       std::span<const double> values) {
    if (values.size() != grid.total())
        throw DimensionError("lattice csv: value count does not match grid");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DomainError("lattice csv: cannot open " + path.string());
    os << "d,L,N\n" << grid.dim << ',';
    os.precision(17);
    os << grid.extent << ',' << grid.n << '\n';
    for (double v : values) os << v << '\n';
}

void write_norms_csv(const std::filesystem::path& path, std::span<const double> times,
                     std::span<const double> sup_norms, std::span<const double> means) {
    if (times.size() != sup_norms.size() || times.size() != means.size())
        throw DimensionError("norms csv: column length mismatch");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DomainError("norms csv: cannot open " + path.string());
    os.precision(17);
    os << "t,sup_norm,mean\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        os << times[i] << ',' << sup_norms[i] << ',' << means[i] << '\n';
}

}  // namespace nfk
