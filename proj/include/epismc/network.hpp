#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epismc {

/// Target profile for the block two-level Erdos-Renyi generator.
struct BterSpec {
    std::size_t node_count = 0;
    double target_mean_degree = 1.0;
    double degree_exponent = 1.0;  // power-law shape; the exponential cutoff is calibrated
    double target_clustering = 0.0;
    std::uint64_t seed = 0;
};

struct NetworkStats {
    double mean_degree = 0.0;
    double clustering = 0.0;
};

/// Immutable undirected graph in compressed adjacency form. Neighbour lists
/// are sorted, self-loop free and duplicate free; every node carries exactly
/// one partition label in [0, partition_count).
class ContactNetwork {
public:
    using node_t = std::uint32_t;

    ContactNetwork() = default;

    /// Builds from an undirected edge list (each edge listed once).
    /// Rejects self-loops and duplicate edges.
    static ContactNetwork from_edges(std::size_t node_count,
                                     std::span<const std::pair<node_t, node_t>> edges);

    std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t edge_count() const { return edge_count_; }

    std::span<const node_t> neighbors(node_t v) const {
        return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t degree(node_t v) const { return offsets_[v + 1] - offsets_[v]; }
    bool has_edge(node_t u, node_t v) const;

    std::uint32_t partition_of(node_t v) const { return partition_[v]; }
    std::uint32_t partition_count() const { return partition_count_; }

    const std::optional<NetworkStats>& realized_stats() const { return stats_; }
    std::uint64_t generator_seed() const { return seed_; }

    friend ContactNetwork partition(ContactNetwork net, std::size_t workers,
                                    std::uint64_t seed);
    friend ContactNetwork generate_bter(const BterSpec& spec);
    friend ContactNetwork complete_graph(std::size_t n);

private:
    std::vector<std::size_t> offsets_;
    std::vector<node_t> neighbors_;
    std::vector<std::uint32_t> partition_;
    std::size_t edge_count_ = 0;
    std::uint32_t partition_count_ = 1;
    std::optional<NetworkStats> stats_;
    std::uint64_t seed_ = 0;
};

/// Two-phase BTER construction: nodes of degree >= 2 are grouped by sorted
/// degree into affinity blocks realized as dense Erdos-Renyi communities,
/// and the excess degree is wired with a Chung-Lu pass. The block fill
/// probability is recalibrated from the measured clustering for a fixed
/// number of attempts; a miss after the budget raises InfeasibleSpecError.
/// Deterministic for a fixed spec (seed included).
ContactNetwork generate_bter(const BterSpec& spec);

ContactNetwork complete_graph(std::size_t n);

/// 2 * edge_count / node_count.
double avg_degree(const ContactNetwork& net);

/// Mean over all nodes of the local clustering coefficient, where nodes of
/// degree < 2 contribute zero.
double global_clustering(const ContactNetwork& net);

/// Relabels nodes with balanced contiguous-block worker assignments.
/// The seed is accepted for interface stability but the block layout is
/// fully determined by (node_count, workers).
ContactNetwork partition(ContactNetwork net, std::size_t workers,
                         std::uint64_t seed = 0);

/// One "u v" pair per line, 0-indexed, each undirected edge once (u < v),
/// ascending order.
void write_edge_list(const ContactNetwork& net, const std::filesystem::path& path);

/// JSON sidecar with node/edge counts, generator seed and realized stats.
void write_stats_sidecar(const ContactNetwork& net, const std::filesystem::path& path);

/// Loads an edge-list file; node count is taken from the sidecar when given,
/// otherwise from the largest node id seen.
ContactNetwork load_edge_list(const std::filesystem::path& path,
                              std::optional<std::size_t> node_count = std::nullopt);

}  // namespace epismc
