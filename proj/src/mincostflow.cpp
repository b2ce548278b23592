#include "ksmf/mincostflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ksmf {

double min_cost_transport(const std::vector<double>& cost, int n_sources,
                          int n_sinks, std::vector<double> supply,
                          std::vector<double> demand,
                          std::vector<TransportPlanEntry>* plan) {
    const int n = n_sources, m = n_sinks;
    if (n <= 0 || m <= 0 || cost.size() != static_cast<std::size_t>(n) * m)
        throw std::invalid_argument("min_cost_transport: bad problem shape");

    double total_supply = 0.0, total_demand = 0.0;
    for (double s : supply) {
        if (s < 0.0) throw std::invalid_argument("negative supply");
        total_supply += s;
    }
    for (double d : demand) {
        if (d < 0.0) throw std::invalid_argument("negative demand");
        total_demand += d;
    }
    const double scale = std::max({1.0, total_supply, total_demand});
    if (std::abs(total_supply - total_demand) > 1e-9 * scale)
        throw std::invalid_argument(
            "min_cost_transport: supply and demand masses differ");

    const int V = n + m;
    const double inf = std::numeric_limits<double>::infinity();
    const double tol = 1e-12 * scale;

    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> pi(V, 0.0), dist(V);
    std::vector<int> parent(V);
    std::vector<char> done(V);

    double residual = total_supply;
    long iterations = 0;
    const long max_iterations = 4L * (static_cast<long>(n) * m + V) + 64;

    while (residual > tol) {
        if (++iterations > max_iterations)
            throw std::runtime_error("min_cost_transport: no convergence");

        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < n; ++i)
            if (supply[i] > tol) dist[i] = 0.0;

        for (int round = 0; round < V; ++round) {
            int u = -1;
            double best = inf;
            for (int v = 0; v < V; ++v)
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            if (u < 0) break;
            done[u] = 1;
            if (u < n) {
                const double* row = cost.data() + static_cast<std::size_t>(u) * m;
                for (int j = 0; j < m; ++j) {
                    const int v = n + j;
                    if (done[v]) continue;
                    double rc = row[j] + pi[u] - pi[v];
                    if (rc < 0.0) rc = 0.0;
                    const double nd = dist[u] + rc;
                    if (nd < dist[v]) {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                }
            } else {
                const int j = u - n;
                for (int i = 0; i < n; ++i) {
                    if (done[i]) continue;
                    if (flow[static_cast<std::size_t>(i) * m + j] <= 0.0) continue;
                    double rc = -cost[static_cast<std::size_t>(i) * m + j] +
                                pi[u] - pi[i];
                    if (rc < 0.0) rc = 0.0;
                    const double nd = dist[u] + rc;
                    if (nd < dist[i]) {
                        dist[i] = nd;
                        parent[i] = u;
                    }
                }
            }
        }

        int sink = -1;
        double best = inf;
        for (int j = 0; j < m; ++j)
            if (demand[j] > tol && dist[n + j] < best) {
                best = dist[n + j];
                sink = n + j;
            }
        if (sink < 0)
            throw std::runtime_error("min_cost_transport: infeasible instance");

        // Bottleneck along the augmenting path.
        double amount = demand[sink - n];
        int v = sink;
        while (parent[v] >= 0) {
            const int u = parent[v];
            if (u >= n)  // backward arc carries existing flow sink->source
                amount = std::min(
                    amount, flow[static_cast<std::size_t>(v) * m + (u - n)]);
            v = u;
        }
        amount = std::min(amount, supply[v]);

        int w = sink;
        while (parent[w] >= 0) {
            const int u = parent[w];
            if (u < n)
                flow[static_cast<std::size_t>(u) * m + (w - n)] += amount;
            else
                flow[static_cast<std::size_t>(w) * m + (u - n)] -= amount;
            w = u;
        }
        supply[w] -= amount;
        demand[sink - n] -= amount;
        residual -= amount;

        for (int x = 0; x < V; ++x)
            if (dist[x] < inf) pi[x] += dist[x];
    }

    double total = 0.0, comp = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double f = flow[static_cast<std::size_t>(i) * m + j];
            if (f <= 0.0) continue;
            const double y = f * cost[static_cast<std::size_t>(i) * m + j] - comp;
            const double t = total + y;
            comp = (t - total) - y;
            total = t;
        }
    }
    if (plan) {
        plan->clear();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                const double f = flow[static_cast<std::size_t>(i) * m + j];
                if (f > tol) plan->push_back({i, j, f});
            }
    }
    return total;
}

} // namespace ksmf
