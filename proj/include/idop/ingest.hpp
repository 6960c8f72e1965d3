#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "idop/errors.hpp"
#include "idop/util.hpp"

namespace idop {

/// Sample-by-variable expression data. Rows are variables, columns are
/// samples; `index` is the per-sample column sum and acts as the pseudo-time
/// axis for everything downstream.
struct ExpressionMatrix {
    std::vector<std::string> variable_ids;
    std::vector<std::string> sample_ids;
    Eigen::MatrixXd values;  // m x n
    Eigen::VectorXd index;   // length n, column sums of values

    Eigen::Index variables() const { return values.rows(); }
    Eigen::Index samples() const { return values.cols(); }

    Eigen::Index variable_position(const std::string& id) const {
        auto it = std::find(variable_ids.begin(), variable_ids.end(), id);
        if (it == variable_ids.end())
            throw ValidationError("unknown variable id: " + id);
        return static_cast<Eigen::Index>(it - variable_ids.begin());
    }

    Eigen::Index sample_position(const std::string& id) const {
        auto it = std::find(sample_ids.begin(), sample_ids.end(), id);
        if (it == sample_ids.end())
            throw ValidationError("unknown sample id: " + id);
        return static_cast<Eigen::Index>(it - sample_ids.begin());
    }
};

/// Expression index rescaled onto [-1, 1] together with the permutation that
/// sorts the raw index ascending (stable, so tied samples keep column order).
struct ScaledIndex {
    Eigen::VectorXd raw;
    Eigen::VectorXd scaled;
    std::vector<Eigen::Index> order;
};

/// Column sums of the expression matrix. Plain scalar accumulation in row
/// order: equal columns must produce bit-identical index entries, which a
/// packetized reduction does not guarantee (it depends on column alignment).
inline Eigen::VectorXd expression_index(const Eigen::MatrixXd& values) {
    Eigen::VectorXd index(values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < values.rows(); ++r) acc += values(r, c);
        index[c] = acc;
    }
    return index;
}

inline Eigen::VectorXd expression_index(const ExpressionMatrix& matrix) {
    return expression_index(matrix.values);
}

namespace detail {

inline void validate_matrix(ExpressionMatrix& m, bool allow_negative) {
    const Eigen::Index rows = m.values.rows(), cols = m.values.cols();
    if (rows < 2 || cols < 2)
        throw ValidationError("expression matrix needs at least 2 variables and 2 samples, got " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    std::set<std::string> vid(m.variable_ids.begin(), m.variable_ids.end());
    if (vid.size() != m.variable_ids.size())
        throw ValidationError("duplicate variable identifiers");
    std::set<std::string> sid(m.sample_ids.begin(), m.sample_ids.end());
    if (sid.size() != m.sample_ids.size())
        throw ValidationError("duplicate sample identifiers");
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = m.values(r, c);
            if (!std::isfinite(v))
                throw ValidationError("non-finite value in row " + std::to_string(r + 1));
            if (!allow_negative && v < 0.0)
                throw ValidationError("negative value " + format_double(v) + " for variable '" +
                                      m.variable_ids[static_cast<size_t>(r)] +
                                      "' (pass allow_negative to accept)");
        }
    m.index = expression_index(m.values);
}

}  // namespace detail

/// Builds a validated matrix from in-memory pieces; index is recomputed.
inline ExpressionMatrix make_expression_matrix(std::vector<std::string> variable_ids,
                                               std::vector<std::string> sample_ids,
                                               Eigen::MatrixXd values,
                                               bool allow_negative = false) {
    ExpressionMatrix m;
    m.variable_ids = std::move(variable_ids);
    m.sample_ids = std::move(sample_ids);
    m.values = std::move(values);
    if (m.values.rows() != static_cast<Eigen::Index>(m.variable_ids.size()) ||
        m.values.cols() != static_cast<Eigen::Index>(m.sample_ids.size()))
        throw ValidationError("identifier counts do not match matrix shape");
    detail::validate_matrix(m, allow_negative);
    return m;
}

/// Loads a variables-in-rows CSV: header `id,<sample_1>,...,<sample_n>`, one
/// variable per subsequent row, decimal or scientific numeric cells.
inline ExpressionMatrix load_expression_matrix(const std::string& path,
                                               bool allow_negative = false) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file: " + path);

    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split(line);
    if (header.size() < 2) throw ValidationError("header must name at least one sample");

    ExpressionMatrix m;
    m.sample_ids.assign(header.begin() + 1, header.end());
    const size_t n = m.sample_ids.size();

    std::vector<std::vector<double>> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line);
        if (cells.size() != n + 1)
            throw ValidationError("row " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size() - 1) + " cells, expected " +
                                  std::to_string(n));
        m.variable_ids.push_back(cells[0]);
        std::vector<double> row(n);
        for (size_t c = 0; c < n; ++c) {
            if (!parse_double(cells[c + 1], row[c]))
                throw ParseError("malformed numeric cell '" + cells[c + 1] + "'",
                                 lineno - 1, static_cast<long>(c + 1));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("matrix body is empty");

    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < n; ++c)
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];

    detail::validate_matrix(m, allow_negative);
    return m;
}

/// Canonical CSV serialization; values rendered shortest-round-trip so a
/// save/load cycle is bit-identical.
inline void save_expression_matrix(const ExpressionMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write: " + path);
    out << "id";
    for (const auto& s : m.sample_ids) out << ',' << s;
    out << '\n';
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
        out << m.variable_ids[static_cast<size_t>(r)];
        for (Eigen::Index c = 0; c < m.values.cols(); ++c)
            out << ',' << format_double(m.values(r, c));
        out << '\n';
    }
    if (!out) throw ValidationError("write failed: " + path);
}

/// Affine rescaling of the index onto [-1, 1] plus the ascending sort
/// permutation. A constant index has no usable ordering and is rejected.
inline ScaledIndex scale_index(const Eigen::VectorXd& raw) {
    if (raw.size() < 2) throw ValidationError("index needs at least 2 samples");
    const double lo = raw.minCoeff(), hi = raw.maxCoeff();
    if (!(hi > lo))
        throw ValidationError("degenerate expression index: all samples equal " +
                              format_double(lo));
    ScaledIndex s;
    s.raw = raw;
    s.scaled = (2.0 * (raw.array() - lo) / (hi - lo) - 1.0).matrix();
    s.order.resize(static_cast<size_t>(raw.size()));
    std::iota(s.order.begin(), s.order.end(), Eigen::Index{0});
    std::stable_sort(s.order.begin(), s.order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return raw[a] < raw[b]; });
    return s;
}

}  // namespace idop
