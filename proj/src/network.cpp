#include "epismc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "epismc/errors.hpp"
#include "epismc/rng.hpp"

namespace epismc {
namespace {

constexpr std::uint64_t kTagBterDegrees = 0x6274657230ull;
constexpr std::uint64_t kTagBterBlocks = 0x6274657231ull;
constexpr std::uint64_t kTagBterExcess = 0x6274657232ull;

constexpr int kBterAttempts = 8;
constexpr double kMeanTolerance = 0.15;      // relative
constexpr double kClusteringTolerance = 0.1; // absolute

std::size_t intersection_size(std::span<const ContactNetwork::node_t> a,
                              std::span<const ContactNetwork::node_t> b) {
    std::size_t count = 0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] < b[ib])
            ++ia;
        else if (b[ib] < a[ia])
            ++ib;
        else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

// Discrete degree model p(k) ~ k^-alpha * exp(-k/lambda) on 1..k_max.
struct DegreeModel {
    std::vector<double> cumulative;  // unnormalized CDF over k = 1..k_max
    double total = 0.0;

    double mean() const {
        double num = 0.0;
        double prev = 0.0;
        for (std::size_t idx = 0; idx < cumulative.size(); ++idx) {
            num += static_cast<double>(idx + 1) * (cumulative[idx] - prev);
            prev = cumulative[idx];
        }
        return num / total;
    }

    std::size_t sample(RngStream& rng) const {
        const double u = rng.u01() * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        return static_cast<std::size_t>(it - cumulative.begin()) + 1;
    }
};

DegreeModel build_degree_model(std::size_t k_max, double alpha, double lambda) {
    DegreeModel model;
    model.cumulative.resize(k_max);
    double acc = 0.0;
    for (std::size_t k = 1; k <= k_max; ++k) {
        const double kd = static_cast<double>(k);
        acc += std::exp(-alpha * std::log(kd) - kd / lambda);
        model.cumulative[k - 1] = acc;
    }
    model.total = acc;
    return model;
}

// Smallest cutoff whose mean reaches the target; the mean is monotone
// increasing in lambda.
DegreeModel calibrate_degree_model(std::size_t k_max, double alpha, double target_mean) {
    double log_lo = std::log(1e-2);
    double log_hi = std::log(1e12);
    DegreeModel hi = build_degree_model(k_max, alpha, std::exp(log_hi));
    if (hi.mean() < target_mean) {
        std::ostringstream msg;
        msg << "bter: degree exponent " << alpha << " cannot reach mean degree "
            << target_mean << " (max attainable " << hi.mean() << ")";
        throw InfeasibleSpecError(msg.str());
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (log_lo + log_hi);
        DegreeModel model = build_degree_model(k_max, alpha, std::exp(mid));
        if (model.mean() < target_mean)
            log_lo = mid;
        else
            log_hi = mid;
    }
    return build_degree_model(k_max, alpha, std::exp(log_hi));
}

struct EdgeAccumulator {
    std::size_t node_count;
    std::unordered_set<std::uint64_t> seen;
    std::vector<std::pair<ContactNetwork::node_t, ContactNetwork::node_t>> edges;

    explicit EdgeAccumulator(std::size_t n) : node_count(n) {}

    bool add(std::size_t u, std::size_t v) {
        if (u == v) return false;
        const std::uint64_t a = std::min(u, v);
        const std::uint64_t b = std::max(u, v);
        const std::uint64_t key = a * static_cast<std::uint64_t>(node_count) + b;
        if (!seen.insert(key).second) return false;
        edges.emplace_back(static_cast<ContactNetwork::node_t>(a),
                           static_cast<ContactNetwork::node_t>(b));
        return true;
    }
};

// Dense Erdos-Renyi fill within one block, walking the pair space with
// geometric skips.
void fill_block(const std::vector<std::size_t>& members, double rho,
                EdgeAccumulator& acc, RngStream& rng) {
    const std::size_t size = members.size();
    if (size < 2 || rho <= 0.0) return;
    if (rho >= 1.0) {
        for (std::size_t a = 0; a < size; ++a)
            for (std::size_t b = a + 1; b < size; ++b)
                acc.add(members[a], members[b]);
        return;
    }
    const double log_q = std::log1p(-rho);
    const double pair_limit = static_cast<double>(size) * static_cast<double>(size);
    auto draw_skip = [&]() {
        const double raw = std::log(rng.u01_pos()) / log_q;
        return static_cast<std::size_t>(std::min(raw, pair_limit));
    };
    std::size_t a = 0, b = 1;
    auto advance = [&](std::size_t steps) {
        while (steps > 0 && a + 1 < size) {
            const std::size_t row_left = size - b;
            if (steps < row_left) {
                b += steps;
                return true;
            }
            steps -= row_left;
            ++a;
            b = a + 1;
        }
        return a + 1 < size;
    };
    // position the first candidate
    if (!advance(draw_skip())) return;
    while (true) {
        acc.add(members[a], members[b]);
        if (!advance(draw_skip() + 1)) return;
    }
}

}  // namespace

ContactNetwork ContactNetwork::from_edges(
    std::size_t node_count, std::span<const std::pair<node_t, node_t>> edges) {
    ContactNetwork net;
    net.offsets_.assign(node_count + 1, 0);
    for (const auto& [u, v] : edges) {
        if (u >= node_count || v >= node_count)
            throw std::invalid_argument("edge endpoint out of range");
        if (u == v) throw std::invalid_argument("self-loop rejected");
        ++net.offsets_[u + 1];
        ++net.offsets_[v + 1];
    }
    std::partial_sum(net.offsets_.begin(), net.offsets_.end(), net.offsets_.begin());
    net.neighbors_.resize(net.offsets_.back());
    std::vector<std::size_t> cursor(net.offsets_.begin(), net.offsets_.end() - 1);
    for (const auto& [u, v] : edges) {
        net.neighbors_[cursor[u]++] = v;
        net.neighbors_[cursor[v]++] = u;
    }
    for (std::size_t v = 0; v < node_count; ++v) {
        const auto lo = net.neighbors_.begin() + static_cast<std::ptrdiff_t>(net.offsets_[v]);
        const auto hi = net.neighbors_.begin() + static_cast<std::ptrdiff_t>(net.offsets_[v + 1]);
        std::sort(lo, hi);
        if (std::adjacent_find(lo, hi) != hi)
            throw std::invalid_argument("duplicate edge rejected");
    }
    net.edge_count_ = edges.size();
    net.partition_.assign(node_count, 0);
    net.partition_count_ = 1;
    return net;
}

bool ContactNetwork::has_edge(node_t u, node_t v) const {
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

ContactNetwork complete_graph(std::size_t n) {
    if (n < 2) throw std::invalid_argument("complete_graph: need at least 2 nodes");
    ContactNetwork net;
    net.offsets_.resize(n + 1);
    for (std::size_t v = 0; v <= n; ++v) net.offsets_[v] = v * (n - 1);
    net.neighbors_.resize(n * (n - 1));
    for (std::size_t v = 0; v < n; ++v) {
        auto* out = net.neighbors_.data() + net.offsets_[v];
        std::size_t w = 0;
        for (std::size_t u = 0; u < n; ++u)
            if (u != v) out[w++] = static_cast<ContactNetwork::node_t>(u);
    }
    net.edge_count_ = n * (n - 1) / 2;
    net.partition_.assign(n, 0);
    net.partition_count_ = 1;
    net.stats_ = NetworkStats{static_cast<double>(n - 1), n >= 3 ? 1.0 : 0.0};
    return net;
}

double avg_degree(const ContactNetwork& net) {
    if (net.node_count() == 0)
        throw std::invalid_argument("avg_degree: empty network");
    return 2.0 * static_cast<double>(net.edge_count()) /
           static_cast<double>(net.node_count());
}

double global_clustering(const ContactNetwork& net) {
    const std::size_t n = net.node_count();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto node = static_cast<ContactNetwork::node_t>(v);
        const std::size_t d = net.degree(node);
        if (d < 2) continue;
        const auto nb = net.neighbors(node);
        std::size_t closed_ordered = 0;  // each closed pair counted twice
        for (const auto u : nb)
            closed_ordered += intersection_size(nb, net.neighbors(u));
        acc += static_cast<double>(closed_ordered) /
               (static_cast<double>(d) * static_cast<double>(d - 1));
    }
    return acc / static_cast<double>(n);
}

ContactNetwork partition(ContactNetwork net, std::size_t workers, std::uint64_t) {
    if (workers < 1) throw std::invalid_argument("partition: workers must be >= 1");
    const std::size_t n = net.node_count();
    net.partition_.assign(n, 0);
    const std::size_t base = n / workers;
    const std::size_t extra = n % workers;
    std::size_t v = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t size = base + (w < extra ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k)
            net.partition_[v++] = static_cast<std::uint32_t>(w);
    }
    net.partition_count_ = static_cast<std::uint32_t>(workers);
    return net;
}

ContactNetwork generate_bter(const BterSpec& spec) {
    if (spec.node_count < 2)
        throw std::invalid_argument("bter: node_count must be >= 2");
    if (spec.target_mean_degree < 1.0)
        throw std::invalid_argument("bter: target_mean_degree must be >= 1");
    if (spec.target_clustering < 0.0 || spec.target_clustering > 1.0)
        throw std::invalid_argument("bter: target_clustering must lie in [0, 1]");

    const std::size_t n = spec.node_count;
    const double max_mean = static_cast<double>(n - 1);
    if (spec.target_mean_degree > max_mean + 1e-9)
        throw InfeasibleSpecError("bter: mean degree exceeds the complete graph");

    if (spec.target_mean_degree >= max_mean - 1e-9) {
        // Degree target forces the complete graph.
        const double clustering = n >= 3 ? 1.0 : 0.0;
        if (std::abs(clustering - spec.target_clustering) > kClusteringTolerance) {
            std::ostringstream msg;
            msg << "bter: mean degree " << spec.target_mean_degree
                << " forces a complete graph with clustering " << clustering
                << ", incompatible with target " << spec.target_clustering;
            throw InfeasibleSpecError(msg.str());
        }
        ContactNetwork net = complete_graph(n);
        net.seed_ = spec.seed;
        net.stats_ = NetworkStats{max_mean, clustering};
        return net;
    }

    const DegreeModel model =
        calibrate_degree_model(n - 1, spec.degree_exponent, spec.target_mean_degree);

    double rho = std::clamp(std::cbrt(spec.target_clustering), 0.005, 1.0);
    double edge_boost = 1.0;
    NetworkStats last{};
    for (int attempt = 0; attempt < kBterAttempts; ++attempt) {
        RngStream deg_rng(spec.seed, stream_id(kTagBterDegrees, attempt));
        std::vector<std::size_t> degree(n);
        for (std::size_t v = 0; v < n; ++v) degree[v] = model.sample(deg_rng);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
        });

        EdgeAccumulator acc(n);
        RngStream block_rng(spec.seed, stream_id(kTagBterBlocks, attempt));
        std::vector<double> block_deficit(n, 0.0);  // expected within-block degree

        std::size_t idx = 0;
        while (idx < n && degree[order[idx]] < 2) ++idx;  // degree-1 nodes stay unblocked
        while (idx < n) {
            const std::size_t lead_degree = degree[order[idx]];
            const std::size_t size = std::min(lead_degree + 1, n - idx);
            std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(idx),
                                             order.begin() + static_cast<std::ptrdiff_t>(idx + size));
            for (std::size_t m : members)
                block_deficit[m] = rho * static_cast<double>(size - 1);
            fill_block(members, rho, acc, block_rng);
            idx += size;
        }

        // Chung-Lu pass over the excess degree.
        std::vector<double> excess_cum(n);
        double excess_total = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            excess_total += std::max(0.0, static_cast<double>(degree[v]) - block_deficit[v]);
            excess_cum[v] = excess_total;
        }
        RngStream cl_rng(spec.seed, stream_id(kTagBterExcess, attempt));
        const auto target_extra = static_cast<std::size_t>(
            std::llround(edge_boost * excess_total / 2.0));
        std::size_t placed = 0;
        std::size_t draws = 0;
        const std::size_t draw_cap = 40 * target_extra + 100;
        auto pick = [&]() {
            const double u = cl_rng.u01() * excess_total;
            const auto it = std::lower_bound(excess_cum.begin(), excess_cum.end(), u);
            return static_cast<std::size_t>(it - excess_cum.begin());
        };
        while (placed < target_extra && draws < draw_cap && excess_total > 0.0) {
            ++draws;
            const std::size_t a = pick();
            const std::size_t b = pick();
            if (acc.add(a, b)) ++placed;
        }

        ContactNetwork net = ContactNetwork::from_edges(n, acc.edges);
        last.mean_degree = avg_degree(net);
        last.clustering = global_clustering(net);

        const bool mean_ok =
            std::abs(last.mean_degree - spec.target_mean_degree) <=
            kMeanTolerance * spec.target_mean_degree;
        const bool clustering_ok =
            std::abs(last.clustering - spec.target_clustering) <= kClusteringTolerance;
        if (mean_ok && clustering_ok) {
            net.seed_ = spec.seed;
            net.stats_ = last;
            return net;
        }

        // Clustering scales roughly with rho^3; the mean with the edge budget.
        if (!clustering_ok) {
            const double ratio = spec.target_clustering / std::max(last.clustering, 1e-6);
            rho = std::clamp(rho * std::cbrt(ratio), 0.005, 1.0);
        }
        if (!mean_ok)
            edge_boost = std::clamp(
                edge_boost * spec.target_mean_degree / last.mean_degree, 0.25, 4.0);
    }

    std::ostringstream msg;
    msg << "bter: calibration missed after " << kBterAttempts
        << " attempts (realized mean degree " << last.mean_degree << " vs "
        << spec.target_mean_degree << ", clustering " << last.clustering << " vs "
        << spec.target_clustering << ")";
    throw InfeasibleSpecError(msg.str());
}

void write_edge_list(const ContactNetwork& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::size_t n = net.node_count();
    for (std::size_t v = 0; v < n; ++v)
        for (const auto u : net.neighbors(static_cast<ContactNetwork::node_t>(v)))
            if (u > v) out << v << ' ' << u << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_stats_sidecar(const ContactNetwork& net, const std::filesystem::path& path) {
    NetworkStats stats;
    if (net.realized_stats()) {
        stats = *net.realized_stats();
    } else {
        stats.mean_degree = avg_degree(net);
        stats.clustering = global_clustering(net);
    }
    nlohmann::json doc{{"node_count", net.node_count()},
                       {"edge_count", net.edge_count()},
                       {"seed", net.generator_seed()},
                       {"mean_degree", stats.mean_degree},
                       {"clustering", stats.clustering}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

ContactNetwork load_edge_list(const std::filesystem::path& path,
                              std::optional<std::size_t> node_count) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::pair<ContactNetwork::node_t, ContactNetwork::node_t>> edges;
    std::string line;
    std::size_t line_no = 0;
    std::size_t max_id = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::uint64_t u = 0, v = 0;
        if (!(fields >> u >> v))
            throw IoError(path.string() + ":" + std::to_string(line_no) +
                          ": expected 'u v'");
        max_id = std::max({max_id, static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
        edges.emplace_back(static_cast<ContactNetwork::node_t>(u),
                           static_cast<ContactNetwork::node_t>(v));
    }
    const std::size_t n = node_count.value_or(max_id + 1);
    return ContactNetwork::from_edges(n, edges);
}

}  // namespace epismc
