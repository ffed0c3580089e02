#pragma once

#include <json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hessian_lab/grid.hpp"
#include "hessian_lab/solver.hpp"

namespace hessian_lab {

// Binary layout, all little-endian 64-bit words:
//   dim (int64), sizes[dim] (int64), periods[dim] (float64), values[N] (float64, row-major)

namespace detail {

inline void put_word(std::ostream& os, std::uint64_t w)
{
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((w >> (8 * i)) & 0xffu);
    os.write(bytes, 8);
}

inline std::uint64_t get_word(std::istream& is, const std::string& path)
{
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw ArgumentError("field file " + path + " is truncated");
    std::uint64_t w = 0;
    for (int i = 0; i < 8; ++i) w |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return w;
}

}  // namespace detail

struct FieldHeader {
    int dim = 0;
    std::vector<int> sizes;
    std::vector<double> periods;
};

template <int Dim>
void write_field(const std::filesystem::path& path, const ScalarField<Dim>& f)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ArgumentError("cannot open " + path.string() + " for writing");
    const auto& g = f.grid();
    detail::put_word(os, static_cast<std::uint64_t>(Dim));
    for (int a = 0; a < Dim; ++a) detail::put_word(os, static_cast<std::uint64_t>(g.size(a)));
    for (int a = 0; a < Dim; ++a) detail::put_word(os, std::bit_cast<std::uint64_t>(g.period(a)));
    for (double v : f.values()) detail::put_word(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw ArgumentError("write to " + path.string() + " failed");
}

inline FieldHeader read_field_header(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArgumentError("field file " + path.string() + " does not exist or is unreadable");
    FieldHeader h;
    const auto dim = static_cast<std::int64_t>(detail::get_word(is, path.string()));
    if (dim != 2 && dim != 3)
        throw ArgumentError(detail::concat("field file ", path.string(), " declares dimension ", dim));
    h.dim = static_cast<int>(dim);
    for (int a = 0; a < h.dim; ++a) h.sizes.push_back(static_cast<int>(detail::get_word(is, path.string())));
    for (int a = 0; a < h.dim; ++a) h.periods.push_back(std::bit_cast<double>(detail::get_word(is, path.string())));
    return h;
}

template <int Dim>
ScalarField<Dim> read_field(const std::filesystem::path& path)
{
    const auto h = read_field_header(path);
    if (h.dim != Dim)
        throw ArgumentError(detail::concat("field file ", path.string(), " has dimension ", h.dim, ", expected ", Dim));
    std::array<int, Dim> sizes;
    std::array<double, Dim> periods;
    for (int a = 0; a < Dim; ++a) {
        sizes[a] = h.sizes[a];
        periods[a] = h.periods[a];
    }
    PeriodicGrid<Dim> grid(sizes, periods);
    std::ifstream is(path, std::ios::binary);
    is.seekg(static_cast<std::streamoff>(8 * (1 + 2 * Dim)));
    std::vector<double> v(grid.num_points());
    for (auto& x : v) x = std::bit_cast<double>(detail::get_word(is, path.string()));
    if (is.peek() != std::char_traits<char>::eof())
        throw ArgumentError("field file " + path.string() + " has trailing data");
    return ScalarField<Dim>(grid, std::move(v));
}

/// Reads a field and checks that it lives on `grid`.
template <int Dim>
ScalarField<Dim> read_field(const std::filesystem::path& path, const PeriodicGrid<Dim>& grid)
{
    auto f = read_field<Dim>(path);
    if (!(f.grid() == grid))
        throw ArgumentError("field file " + path.string() + " does not match the declared grid");
    return f;
}

template <int Dim>
nlohmann::ordered_json grid_json(const PeriodicGrid<Dim>& g)
{
    nlohmann::ordered_json j;
    j["dim"] = Dim;
    j["sizes"] = g.sizes();
    j["periods"] = g.periods();
    return j;
}

/// Writes <stem>.bin and the sidecar <stem>.json {b, tolerances, grid}.
template <int Dim>
void write_solution(const std::filesystem::path& stem, const SolutionPair<Dim>& sol, const SolveOptions& opts)
{
    auto bin = stem;
    bin += ".bin";
    write_field(bin, sol.phi);
    nlohmann::ordered_json j;
    j["b"] = sol.b;
    j["tolerances"] = {{"newton_tol", opts.newton_tol}, {"linear_tol", opts.linear_tol}, {"residual", sol.residual}};
    j["grid"] = grid_json(sol.phi.grid());
    j["field"] = bin.filename().string();
    auto side = stem;
    side += ".json";
    std::ofstream os(side, std::ios::trunc);
    if (!os) throw ArgumentError("cannot open " + side.string() + " for writing");
    os << j.dump(2) << '\n';
}

template <int Dim>
SolutionPair<Dim> read_solution(const std::filesystem::path& stem)
{
    auto side = stem;
    side += ".json";
    std::ifstream is(side);
    if (!is) throw ArgumentError("solution sidecar " + side.string() + " does not exist");
    const auto j = nlohmann::json::parse(is);
    auto bin = stem;
    bin += ".bin";
    SolutionPair<Dim> sol{read_field<Dim>(bin), j.at("b").get<double>(), 0.0, 0};
    sol.residual = j.at("tolerances").at("residual").get<double>();
    return sol;
}

}  // namespace hessian_lab
