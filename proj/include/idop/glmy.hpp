#pragma once

#include <map>
#include <string>
#include <vector>

#include "idop/digraph.hpp"
#include "idop/errors.hpp"
#include "idop/field.hpp"

namespace idop {

enum class PathKind { Regular, Allowed, Omega };

/// A basis of n-paths: vertex sequences of length n+1 in deterministic
/// lexicographic order. Regular paths have no consecutive repeats; allowed
/// paths follow arrows.
struct PathBasis {
    int dimension = 0;
    PathKind kind = PathKind::Regular;
    std::vector<std::vector<int>> paths;

    std::size_t size() const { return paths.size(); }
};

inline PathBasis enumerate_paths(const Digraph& g, int n, PathKind kind) {
    if (n < 0) throw ValidationError("path dimension must be >= 0");
    if (kind == PathKind::Omega) throw ValidationError("omega bases come from omega_basis()");
    PathBasis basis;
    basis.dimension = n;
    basis.kind = kind;

    std::vector<int> current;
    current.reserve(static_cast<size_t>(n) + 1);
    auto extend = [&](auto&& self, int depth) -> void {
        if (depth == n + 1) {
            basis.paths.push_back(current);
            return;
        }
        if (kind == PathKind::Allowed && depth > 0) {
            for (int next : g.out_neighbors(current.back())) {
                current.push_back(next);
                self(self, depth + 1);
                current.pop_back();
            }
        } else {
            for (int v = 0; v < g.vertex_count(); ++v) {
                if (depth > 0 && v == current.back()) continue;  // keep paths regular
                current.push_back(v);
                self(self, depth + 1);
                current.pop_back();
            }
        }
        if (basis.paths.size() > 4'000'000)
            throw NumericError("path basis too large; reduce dimension or graph size");
    };
    extend(extend, 0);

    if (kind == PathKind::Allowed) {
        // arrow-driven DFS from sorted starts already yields lex order, but
        // out-neighbor lists may interleave; normalize deterministically
        std::sort(basis.paths.begin(), basis.paths.end());
    }
    return basis;
}

namespace detail {

inline std::map<std::vector<int>, std::size_t> path_index(const PathBasis& basis) {
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < basis.paths.size(); ++i) index[basis.paths[i]] = i;
    return index;
}

inline bool face_is_regular(const std::vector<int>& path, int drop) {
    if (drop > 0 && drop + 1 < static_cast<int>(path.size()))
        return path[static_cast<size_t>(drop) - 1] != path[static_cast<size_t>(drop) + 1];
    return true;  // dropping an endpoint cannot create a repeat
}

inline std::vector<int> face_of(const std::vector<int>& path, int drop) {
    std::vector<int> face;
    face.reserve(path.size() - 1);
    for (int i = 0; i < static_cast<int>(path.size()); ++i)
        if (i != drop) face.push_back(path[static_cast<size_t>(i)]);
    return face;
}

}  // namespace detail

/// Matrix of the quotient boundary: each domain path maps to the alternating
/// sum of its vertex-deletion faces with non-regular faces sent to zero.
/// The codomain must contain every surviving face (the regular (n-1) basis
/// always does).
template <class F>
FieldMatrix<F> boundary_matrix(int n, const PathBasis& domain, const PathBasis& codomain) {
    if (domain.dimension != n || codomain.dimension != n - 1)
        throw ValidationError("boundary matrix dimension mismatch");
    auto codomain_index = detail::path_index(codomain);
    FieldMatrix<F> matrix(codomain.size(), domain.size());
    for (std::size_t col = 0; col < domain.paths.size(); ++col) {
        const auto& path = domain.paths[col];
        for (int drop = 0; drop <= n; ++drop) {
            if (!detail::face_is_regular(path, drop)) continue;
            auto face = detail::face_of(path, drop);
            auto it = codomain_index.find(face);
            if (it == codomain_index.end())
                throw ValidationError("codomain basis is missing a face");
            const F sign = (drop % 2) ? F(-1) : F(1);
            matrix(it->second, col) += sign;
        }
    }
    return matrix;
}

/// Basis of Omega_n = { allowed n-chains whose boundaries stay allowed },
/// expressed as coefficient columns over the allowed n-path basis.
template <class F>
struct OmegaBasis {
    PathBasis ambient;            // allowed n-paths
    FieldMatrix<F> coefficients;  // |ambient| x dim

    std::size_t dim() const { return coefficients.cols(); }
};

template <class F>
OmegaBasis<F> omega_basis(const Digraph& g, int n) {
    OmegaBasis<F> omega;
    omega.ambient = enumerate_paths(g, n, PathKind::Allowed);
    const std::size_t count = omega.ambient.size();
    if (n <= 1) {  // Omega_0 = span(V), Omega_1 = span(A)
        omega.coefficients = FieldMatrix<F>(count, count);
        for (std::size_t i = 0; i < count; ++i) omega.coefficients(i, i) = F(1);
        return omega;
    }

    // Rows of the constraint system: coordinates of the boundary on
    // non-allowed (but regular) faces must vanish.
    std::map<std::vector<int>, std::size_t> constraint_rows;
    std::vector<std::map<std::size_t, F>> columns(count);
    for (std::size_t col = 0; col < count; ++col) {
        const auto& path = omega.ambient.paths[col];
        for (int drop = 0; drop <= n; ++drop) {
            if (!detail::face_is_regular(path, drop)) continue;
            auto face = detail::face_of(path, drop);
            bool allowed = true;
            for (std::size_t i = 0; i + 1 < face.size(); ++i)
                if (!g.has_arrow(face[i], face[i + 1])) { allowed = false; break; }
            if (allowed) continue;
            auto [it, inserted] =
                constraint_rows.try_emplace(std::move(face), constraint_rows.size());
            const F sign = (drop % 2) ? F(-1) : F(1);
            columns[col][it->second] += sign;
        }
    }

    FieldMatrix<F> constraints(constraint_rows.size(), count);
    for (std::size_t col = 0; col < count; ++col)
        for (const auto& [row, value] : columns[col]) constraints(row, col) = value;
    omega.coefficients = constraints.nullspace();
    return omega;
}

/// Matrix of the boundary restricted to Omega_n, written over the allowed
/// (n-1)-path basis (valid because boundaries of Omega chains are allowed).
template <class F>
FieldMatrix<F> omega_boundary(const Digraph& g, const OmegaBasis<F>& omega,
                              const PathBasis& allowed_below) {
    if (omega.ambient.dimension == 0)
        return FieldMatrix<F>(0, omega.dim());  // boundary of 0-chains is zero
    auto below_index = detail::path_index(allowed_below);
    FieldMatrix<F> incidence(allowed_below.size(), omega.ambient.size());
    for (std::size_t col = 0; col < omega.ambient.paths.size(); ++col) {
        const auto& path = omega.ambient.paths[col];
        for (int drop = 0; drop <= omega.ambient.dimension; ++drop) {
            if (!detail::face_is_regular(path, drop)) continue;
            auto face = detail::face_of(path, drop);
            auto it = below_index.find(face);
            if (it == below_index.end()) continue;  // non-allowed: zero on Omega columns
            const F sign = (drop % 2) ? F(-1) : F(1);
            incidence(it->second, col) += sign;
        }
    }
    return incidence.multiply(omega.coefficients);
}

/// Betti numbers beta_0..beta_max_dim of the path-homology chain complex:
/// beta_n = dim Omega_n - rank(d_n|Omega_n) - rank(d_{n+1}|Omega_{n+1}).
template <class F>
std::vector<std::size_t> path_homology(const Digraph& g, int max_dim) {
    if (max_dim < 0) throw ValidationError("max_dim must be >= 0");
    std::vector<std::size_t> omega_dims(static_cast<size_t>(max_dim) + 2);
    std::vector<std::size_t> boundary_ranks(static_cast<size_t>(max_dim) + 2, 0);

    PathBasis below;  // allowed (n-1)-paths
    for (int n = 0; n <= max_dim + 1; ++n) {
        OmegaBasis<F> omega = omega_basis<F>(g, n);
        omega_dims[static_cast<size_t>(n)] = omega.dim();
        if (n > 0)
            boundary_ranks[static_cast<size_t>(n)] = omega_boundary(g, omega, below).rank();
        below = std::move(omega.ambient);
    }

    std::vector<std::size_t> betti(static_cast<size_t>(max_dim) + 1);
    for (int n = 0; n <= max_dim; ++n)
        betti[static_cast<size_t>(n)] = omega_dims[static_cast<size_t>(n)] -
                                        boundary_ranks[static_cast<size_t>(n)] -
                                        boundary_ranks[static_cast<size_t>(n) + 1];
    return betti;
}

}  // namespace idop
