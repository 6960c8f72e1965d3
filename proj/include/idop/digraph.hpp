#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "idop/errors.hpp"

namespace idop {

/// Finite digraph without self-loops or parallel arrows. Vertices are
/// 0..vertex_count-1; arrows are kept sorted for deterministic iteration.
class Digraph {
public:
    Digraph() = default;
    Digraph(int vertex_count, std::vector<std::pair<int, int>> arrow_list)
        : vertices_(vertex_count), arrows_(std::move(arrow_list)) {
        if (vertex_count < 0) throw ValidationError("vertex count must be nonnegative");
        std::sort(arrows_.begin(), arrows_.end());
        arrows_.erase(std::unique(arrows_.begin(), arrows_.end()), arrows_.end());
        adj_.assign(static_cast<size_t>(vertices_) * static_cast<size_t>(vertices_), false);
        out_.assign(static_cast<size_t>(vertices_), {});
        for (auto [a, b] : arrows_) {
            if (a < 0 || b < 0 || a >= vertices_ || b >= vertices_)
                throw ValidationError("arrow endpoint out of range");
            if (a == b) throw ValidationError("self-loops are not allowed");
            adj_[static_cast<size_t>(a) * static_cast<size_t>(vertices_) + static_cast<size_t>(b)] =
                true;
            out_[static_cast<size_t>(a)].push_back(b);
        }
    }

    int vertex_count() const { return vertices_; }
    const std::vector<std::pair<int, int>>& arrows() const { return arrows_; }
    const std::vector<int>& out_neighbors(int v) const { return out_[static_cast<size_t>(v)]; }

    bool has_arrow(int a, int b) const {
        return a >= 0 && b >= 0 && a < vertices_ && b < vertices_ &&
               adj_[static_cast<size_t>(a) * static_cast<size_t>(vertices_) +
                    static_cast<size_t>(b)];
    }

    bool operator==(const Digraph& other) const {
        return vertices_ == other.vertices_ && arrows_ == other.arrows_;
    }

private:
    int vertices_ = 0;
    std::vector<std::pair<int, int>> arrows_;
    std::vector<bool> adj_;
    std::vector<std::vector<int>> out_;
};

/// Digraph with one weight per arrow, aligned with Digraph::arrows() order.
struct WeightedDigraph {
    Digraph graph;
    std::vector<double> weights;
};

inline WeightedDigraph make_weighted_digraph(int vertex_count,
                                             const std::vector<std::pair<int, int>>& arrow_list,
                                             const std::vector<double>& weight_list) {
    if (arrow_list.size() != weight_list.size())
        throw ValidationError("arrow/weight count mismatch");
    WeightedDigraph wd;
    wd.graph = Digraph(vertex_count, arrow_list);
    wd.weights.resize(wd.graph.arrows().size());
    for (size_t i = 0; i < arrow_list.size(); ++i) {
        const auto& arrows = wd.graph.arrows();
        const auto it = std::lower_bound(arrows.begin(), arrows.end(), arrow_list[i]);
        wd.weights[static_cast<size_t>(it - arrows.begin())] = weight_list[i];
    }
    return wd;
}

}  // namespace idop
