// dictionary.hpp - delay-Doppler grid and the pairwise-coupling dictionary
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "afdm_waveform.hpp"
#include "dd_operators.hpp"

namespace afdm_rpe {

struct GridPoint {
    int delay_idx = 0;
    double doppler = 0.0;
};

struct DelayDopplerGrid {
    std::vector<int> delay_indices;
    std::vector<double> doppler_values;
    int k_tau = 1;
    int d_nu = 1;
    double f_max = 0.1;

    int size() const { return k_tau * d_nu; }
    // point index g = k * D + d
    GridPoint point(int g) const { return {delay_indices[g / d_nu], doppler_values[g % d_nu]}; }
    int index(int k, int d) const { return k * d_nu + d; }
    double doppler_step() const { return d_nu > 1 ? doppler_values[1] - doppler_values[0] : f_max; }
};

inline DelayDopplerGrid build_grid(int k_tau, int d_nu, double f_max) {
    if (k_tau < 1) throw std::invalid_argument("build_grid: k_tau must be >= 1");
    if (d_nu < 1) throw std::invalid_argument("build_grid: d_nu must be >= 1");
    if (!(f_max > 0.0)) throw std::invalid_argument("build_grid: f_max must be > 0");
    DelayDopplerGrid g;
    g.k_tau = k_tau;
    g.d_nu = d_nu;
    g.f_max = f_max;
    for (int k = 0; k < k_tau; ++k) g.delay_indices.push_back(k);
    if (d_nu == 1) {
        g.doppler_values.push_back(0.0);
    } else {
        for (int d = 0; d < d_nu; ++d) g.doppler_values.push_back(-f_max + 2.0 * f_max * d / (d_nu - 1));
    }
    return g;
}

struct Dictionary {
    CMat columns;  // N x M^2, column g*M + g' pairs with H(g, g')
    DelayDopplerGrid grid;
    int n_samples = 0;
    double c1 = 0.0;
    double c2 = 0.0;
    // Exact duplicate columns share a group; representative = lowest index.
    std::vector<int> group_of;
    std::vector<int> representatives;

    int grid_size() const { return grid.size(); }
    int column_count() const { return static_cast<int>(columns.cols()); }
    int column(int g, int gp) const { return g * grid.size() + gp; }
    std::pair<int, int> pair_of(int col) const { return {col / grid.size(), col % grid.size()}; }
};

// Gamma_g = A Phi Omega^f Pi^l A^H for every grid point.
inline std::vector<CMat> grid_path_operators(const AfdmConfig& cfg, const CMat& daft, const DelayDopplerGrid& grid) {
    std::vector<CMat> ops;
    ops.reserve(grid.size());
    for (int g = 0; g < grid.size(); ++g) {
        const GridPoint p = grid.point(g);
        ops.push_back(build_daft_path_operator(daft, cfg, p.delay_idx, p.doppler));
    }
    return ops;
}

// e(g, g') = Gamma_g Gamma_g'^H 1
inline CVec dictionary_column(const AfdmConfig& cfg, const DelayDopplerGrid& grid, int g, int gp) {
    if (g < 0 || gp < 0 || g >= grid.size() || gp >= grid.size())
        throw std::out_of_range("dictionary_column: grid index out of range");
    const CMat a = build_daft_matrix(cfg);
    const auto ops = grid_path_operators(cfg, a, grid);
    return ops[g] * (ops[gp].adjoint() * CVec::Ones(cfg.n_samples));
}

inline void group_duplicate_columns(Dictionary& d, double rel_tol = 1e-12) {
    const int m = d.column_count();
    const double tol = rel_tol * std::sqrt(static_cast<double>(d.n_samples));
    d.group_of.assign(m, -1);
    d.representatives.clear();
    for (int j = 0; j < m; ++j) {
        for (int r : d.representatives) {
            if ((d.columns.col(j) - d.columns.col(r)).norm() <= tol) {
                d.group_of[j] = d.group_of[r];
                break;
            }
        }
        if (d.group_of[j] < 0) {
            d.group_of[j] = static_cast<int>(d.representatives.size());
            d.representatives.push_back(j);
        }
    }
}

inline constexpr std::size_t kDefaultDictionaryBudget = std::size_t{1} << 30;

inline Dictionary build_dictionary(const AfdmConfig& cfg, const DelayDopplerGrid& grid,
                                   std::size_t memory_budget = kDefaultDictionaryBudget) {
    cfg.validate();
    if (grid.size() < 1) throw std::invalid_argument("build_dictionary: empty grid");
    const std::size_t m = static_cast<std::size_t>(grid.size());
    const std::size_t need = m * m * static_cast<std::size_t>(cfg.n_samples) * sizeof(cd);
    if (need > memory_budget)
        throw std::length_error("build_dictionary: needs " + std::to_string(need) + " bytes, budget is " +
                                std::to_string(memory_budget));
    const CMat a = build_daft_matrix(cfg);
    const auto ops = grid_path_operators(cfg, a, grid);
    const CVec ones = CVec::Ones(cfg.n_samples);
    std::vector<CVec> probes;
    for (const auto& op : ops) probes.push_back(op.adjoint() * ones);

    Dictionary d;
    d.grid = grid;
    d.n_samples = cfg.n_samples;
    d.c1 = cfg.c1;
    d.c2 = cfg.c2;
    d.columns.resize(cfg.n_samples, static_cast<Eigen::Index>(m * m));
    for (int g = 0; g < grid.size(); ++g)
        for (int gp = 0; gp < grid.size(); ++gp) {
            if (g == gp)
                d.columns.col(d.column(g, gp)) = ones;  // Gamma Gamma^H = I
            else
                d.columns.col(d.column(g, gp)).noalias() = ops[g] * probes[gp];
        }
    group_duplicate_columns(d);
    return d;
}

// ---- on-disk cache -------------------------------------------------------

inline constexpr char kDictMagic[8] = {'A', 'F', 'D', 'M', 'D', 'I', 'C', 'T'};
inline constexpr std::uint32_t kDictVersion = 1;

struct DictCacheHeader {
    char magic[8];
    std::uint32_t version;
    std::int32_t n_samples;
    double c1;
    double c2;
    std::int32_t k_tau;
    std::int32_t d_nu;
    double f_max;
    std::int64_t rows;
    std::int64_t cols;
};

inline DictCacheHeader dict_cache_key(const AfdmConfig& cfg, const DelayDopplerGrid& grid) {
    DictCacheHeader h{};
    std::memcpy(h.magic, kDictMagic, sizeof(h.magic));
    h.version = kDictVersion;
    h.n_samples = cfg.n_samples;
    h.c1 = cfg.c1;
    h.c2 = cfg.c2;
    h.k_tau = grid.k_tau;
    h.d_nu = grid.d_nu;
    h.f_max = grid.f_max;
    h.rows = cfg.n_samples;
    h.cols = static_cast<std::int64_t>(grid.size()) * grid.size();
    return h;
}

inline bool same_key(const DictCacheHeader& a, const DictCacheHeader& b) {
    return std::memcmp(a.magic, b.magic, sizeof(a.magic)) == 0 && a.version == b.version &&
           a.n_samples == b.n_samples && a.c1 == b.c1 && a.c2 == b.c2 && a.k_tau == b.k_tau && a.d_nu == b.d_nu &&
           a.f_max == b.f_max && a.rows == b.rows && a.cols == b.cols;
}

template <class T>
void put_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get_raw(std::istream& is, T& v) {
    return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

inline void write_header(std::ostream& os, const DictCacheHeader& h) {
    os.write(h.magic, sizeof(h.magic));
    put_raw(os, h.version);
    put_raw(os, h.n_samples);
    put_raw(os, h.c1);
    put_raw(os, h.c2);
    put_raw(os, h.k_tau);
    put_raw(os, h.d_nu);
    put_raw(os, h.f_max);
    put_raw(os, h.rows);
    put_raw(os, h.cols);
}

inline bool read_header(std::istream& is, DictCacheHeader& h) {
    return is.read(h.magic, sizeof(h.magic)) && get_raw(is, h.version) && get_raw(is, h.n_samples) &&
           get_raw(is, h.c1) && get_raw(is, h.c2) && get_raw(is, h.k_tau) && get_raw(is, h.d_nu) &&
           get_raw(is, h.f_max) && get_raw(is, h.rows) && get_raw(is, h.cols);
}

inline void save_dictionary(const Dictionary& d, const AfdmConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_dictionary: cannot open " + path);
    write_header(os, dict_cache_key(cfg, d.grid));
    os.write(reinterpret_cast<const char*>(d.columns.data()),
             static_cast<std::streamsize>(d.columns.size() * sizeof(cd)));
    if (!os) throw std::runtime_error("save_dictionary: write failed for " + path);
}

// nullopt when the file is missing, truncated or keyed to other parameters.
inline std::optional<Dictionary> load_dictionary(const AfdmConfig& cfg, const DelayDopplerGrid& grid,
                                                 const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    DictCacheHeader h{};
    if (!read_header(is, h) || !same_key(h, dict_cache_key(cfg, grid))) return std::nullopt;
    Dictionary d;
    d.grid = grid;
    d.n_samples = cfg.n_samples;
    d.c1 = cfg.c1;
    d.c2 = cfg.c2;
    d.columns.resize(h.rows, h.cols);
    is.read(reinterpret_cast<char*>(d.columns.data()), static_cast<std::streamsize>(d.columns.size() * sizeof(cd)));
    if (!is) return std::nullopt;
    group_duplicate_columns(d);
    return d;
}

inline Dictionary load_or_build_dictionary(const AfdmConfig& cfg, const DelayDopplerGrid& grid,
                                           const std::string& cache_path) {
    if (!cache_path.empty())
        if (auto d = load_dictionary(cfg, grid, cache_path)) return std::move(*d);
    Dictionary d = build_dictionary(cfg, grid);
    if (!cache_path.empty()) save_dictionary(d, cfg, cache_path);
    return d;
}

}  // namespace afdm_rpe
