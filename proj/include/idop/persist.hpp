#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "idop/digraph.hpp"
#include "idop/errors.hpp"
#include "idop/glmy.hpp"

namespace idop {

enum class FiltrationKind { Arrow, Path };

/// Nested family of path complexes. Arrow filtrations grow the arrow set by
/// weight threshold (vertices always present); path filtrations cap the
/// allowed path length on a fixed digraph.
struct Filtration {
    FiltrationKind kind = FiltrationKind::Arrow;
    std::vector<double> levels;    // strictly increasing
    std::vector<Digraph> graphs;   // per level
    std::vector<int> length_caps;  // per level; INT_MAX for arrow filtrations

    std::size_t level_count() const { return levels.size(); }

    std::size_t level_position(double value) const {
        for (std::size_t i = 0; i < levels.size(); ++i)
            if (levels[i] == value) return i;
        throw ValidationError("value is not a filtration level");
    }
};

/// Sub-digraphs G_a of arrows with weight strictly below the threshold.
/// Thresholds sit between consecutive distinct weights (plus one beyond the
/// maximum) so each distinct-weight subgraph appears exactly once; the first
/// level is the empty arrow set. `descending` filters large weights first by
/// negating them, so reported levels are negated weights.
inline Filtration arrow_filtration(const WeightedDigraph& wd, bool descending = false) {
    Filtration f;
    f.kind = FiltrationKind::Arrow;
    const int nv = wd.graph.vertex_count();

    std::vector<double> w = wd.weights;
    if (descending)
        for (double& x : w) x = -x;

    std::vector<double> distinct = w;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    if (distinct.empty()) {  // no arrows: a single level carrying the full object
        f.levels.push_back(0.0);
        f.graphs.emplace_back(nv, std::vector<std::pair<int, int>>{});
        f.length_caps.push_back(std::numeric_limits<int>::max());
        return f;
    }

    f.levels.push_back(distinct.front());  // strictly-below threshold: empty
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
        f.levels.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    f.levels.push_back(distinct.back() + 1.0);

    for (double level : f.levels) {
        std::vector<std::pair<int, int>> arrows;
        for (std::size_t i = 0; i < wd.graph.arrows().size(); ++i)
            if (w[i] < level) arrows.push_back(wd.graph.arrows()[i]);
        f.graphs.emplace_back(nv, std::move(arrows));
        f.length_caps.push_back(std::numeric_limits<int>::max());
    }
    return f;
}

/// Levels k = 0..k_max; the level-k complex holds allowed paths of length
/// at most k on the full digraph.
inline Filtration path_filtration(const Digraph& g, int k_max) {
    if (k_max < 0) throw ValidationError("k_max must be >= 0");
    Filtration f;
    f.kind = FiltrationKind::Path;
    for (int k = 0; k <= k_max; ++k) {
        f.levels.push_back(static_cast<double>(k));
        f.graphs.push_back(g);
        f.length_caps.push_back(k);
    }
    return f;
}

/// Persistence interval [birth, death) with death = +inf for classes that
/// survive the whole filtration.
struct BarcodeInterval {
    double birth = 0.0;
    double death = std::numeric_limits<double>::infinity();
    int multiplicity = 0;

    bool infinite() const { return std::isinf(death); }
};

struct Barcode {
    int dimension = 0;
    std::vector<BarcodeInterval> intervals;
};

namespace detail {

/// Cycle and boundary generators of one filtration level, written in the
/// coordinates of the final level's allowed p-paths so levels can be
/// compared directly.
template <class F>
struct LevelSpaces {
    FieldMatrix<F> cycles;      // ambient_dim x z
    FieldMatrix<F> boundaries;  // ambient_dim x (omega dim above); rank = dim B_p
    std::size_t boundary_rank = 0;
};

template <class F>
FieldMatrix<F> embed_rows(const FieldMatrix<F>& local, const PathBasis& local_basis,
                          const std::map<std::vector<int>, std::size_t>& global_index,
                          std::size_t global_dim) {
    FieldMatrix<F> out(global_dim, local.cols());
    for (std::size_t r = 0; r < local.rows(); ++r) {
        const auto it = global_index.find(local_basis.paths[r]);
        if (it == global_index.end())
            throw NumericError("filtration level path missing from the final complex");
        for (std::size_t c = 0; c < local.cols(); ++c) out(it->second, c) = local(r, c);
    }
    return out;
}

template <class F>
LevelSpaces<F> level_spaces(const Filtration& f, std::size_t level, int p,
                            const std::map<std::vector<int>, std::size_t>& global_index,
                            std::size_t global_dim) {
    const Digraph& g = f.graphs[level];
    const int cap = f.length_caps[level];
    LevelSpaces<F> spaces;
    spaces.cycles = FieldMatrix<F>(global_dim, 0);
    spaces.boundaries = FieldMatrix<F>(global_dim, 0);
    if (p > cap) return spaces;  // chain space is zero at this level

    OmegaBasis<F> omega = omega_basis<F>(g, p);
    if (omega.dim() > 0) {
        PathBasis below = p > 0 ? enumerate_paths(g, p - 1, PathKind::Allowed) : PathBasis{};
        FieldMatrix<F> bd = p > 0 ? omega_boundary(g, omega, below)
                                  : FieldMatrix<F>(0, omega.dim());
        FieldMatrix<F> kernel = bd.nullspace();  // omega-coordinates
        spaces.cycles = embed_rows(omega.coefficients.multiply(kernel), omega.ambient,
                                   global_index, global_dim);
    }
    if (p + 1 <= cap) {
        OmegaBasis<F> above = omega_basis<F>(g, p + 1);
        if (above.dim() > 0) {
            FieldMatrix<F> bd = omega_boundary(g, above, omega.ambient);
            spaces.boundaries =
                embed_rows(bd, omega.ambient, global_index, global_dim);
        }
    }
    spaces.boundary_rank = spaces.boundaries.rank();
    return spaces;
}

}  // namespace detail

/// Rank of H_p(level a) -> H_p(level b) induced by inclusion, computed as
/// dim Z_p^a - dim(Z_p^a intersect B_p^b) = rank[Z_a | B_b] - rank B_b.
/// Valid because Omega is inclusion-monotone along the filtration.
template <class F>
std::size_t persistent_betti(const Filtration& f, int p, double a, double b) {
    if (a > b) throw ValidationError("persistent Betti needs a <= b");
    const std::size_t ia = f.level_position(a), ib = f.level_position(b);

    const Digraph& full = f.graphs.back();
    PathBasis global = enumerate_paths(full, p, PathKind::Allowed);
    auto global_index = detail::path_index(global);

    auto za = detail::level_spaces<F>(f, ia, p, global_index, global.size());
    auto zb = detail::level_spaces<F>(f, ib, p, global_index, global.size());
    return za.cycles.augment(zb.boundaries).rank() - zb.boundary_rank;
}

/// Barcode for dimension p over the whole level grid, by inclusion-exclusion
/// of persistent Betti numbers. Multiplicities must come out nonnegative;
/// anything else indicates a rank bug and raises an error.
template <class F>
Barcode barcode(const Filtration& f, int p) {
    Barcode code;
    code.dimension = p;
    const std::size_t nlevels = f.level_count();
    if (nlevels == 0) return code;

    const Digraph& full = f.graphs.back();
    PathBasis global = enumerate_paths(full, p, PathKind::Allowed);
    auto global_index = detail::path_index(global);

    std::vector<detail::LevelSpaces<F>> spaces;
    spaces.reserve(nlevels);
    for (std::size_t l = 0; l < nlevels; ++l)
        spaces.push_back(detail::level_spaces<F>(f, l, p, global_index, global.size()));

    // beta[i][j] for i <= j
    std::vector<std::vector<std::size_t>> beta(nlevels, std::vector<std::size_t>(nlevels, 0));
    for (std::size_t i = 0; i < nlevels; ++i)
        for (std::size_t j = i; j < nlevels; ++j)
            beta[i][j] = spaces[i].cycles.augment(spaces[j].boundaries).rank() -
                         spaces[j].boundary_rank;

    auto beta_at = [&](std::ptrdiff_t i, std::ptrdiff_t j) -> std::ptrdiff_t {
        if (i < 0 || j < 0) return 0;
        return static_cast<std::ptrdiff_t>(beta[static_cast<size_t>(i)][static_cast<size_t>(j)]);
    };

    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nlevels); ++i) {
        for (std::ptrdiff_t j = i + 1; j < static_cast<std::ptrdiff_t>(nlevels); ++j) {
            const std::ptrdiff_t mult = beta_at(i, j - 1) - beta_at(i, j) -
                                        (beta_at(i - 1, j - 1) - beta_at(i - 1, j));
            if (mult < 0) throw NumericError("negative barcode multiplicity");
            if (mult > 0)
                code.intervals.push_back({f.levels[static_cast<size_t>(i)],
                                          f.levels[static_cast<size_t>(j)],
                                          static_cast<int>(mult)});
        }
        const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(nlevels) - 1;
        const std::ptrdiff_t inf_mult = beta_at(i, last) - beta_at(i - 1, last);
        if (inf_mult < 0) throw NumericError("negative barcode multiplicity");
        if (inf_mult > 0)
            code.intervals.push_back({f.levels[static_cast<size_t>(i)],
                                      std::numeric_limits<double>::infinity(),
                                      static_cast<int>(inf_mult)});
    }
    return code;
}

}  // namespace idop
