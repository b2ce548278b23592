#pragma once

#include <vector>

namespace ksmf {

struct TransportPlanEntry {
    int source = 0;
    int sink = 0;
    double amount = 0.0;
};

/// Exact minimum-cost transport between discrete measures.
///
/// Successive shortest augmenting paths with node potentials on the dense
/// bipartite graph; reduced costs are clamped at zero to absorb
/// floating-point dust. Sized for desk-scale problems (a few thousand
/// support points); dense Dijkstra costs O((n + m)^2) per augmentation.
///
/// cost is row-major n_sources x n_sinks and must be non-negative.
/// Supplies and demands must balance to ~1e-9 relative.
double min_cost_transport(const std::vector<double>& cost, int n_sources,
                          int n_sinks, std::vector<double> supply,
                          std::vector<double> demand,
                          std::vector<TransportPlanEntry>* plan = nullptr);

} // namespace ksmf
