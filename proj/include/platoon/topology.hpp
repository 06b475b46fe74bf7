#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace platoon {

/// The four canonical unidirectional information-flow topologies.
enum class TopologyKind { PF, PLF, TPF, TPLF };

TopologyKind topology_kind_from_string(std::string_view s);
std::string to_string(TopologyKind kind);

/// Directed information-flow graph among followers plus leader pinning.
///
/// Followers are indexed 1..N in platoon order; the leader is the
/// distinguished id 0.  edge(i, j) means follower j sends to follower i,
/// which under the unidirectional convention implies j < i.
class Topology {
public:
    static Topology build(TopologyKind kind, int n_followers);

    /// Arbitrary unidirectional graph from explicit edges {i, j} (j sends to i)
    /// and a pinned vector.  Enforces j < i and no self loops.  The kind tag
    /// is only used when rebuilding after insert/remove.
    static Topology custom(int n_followers, const std::vector<std::pair<int, int>>& edges,
                           const std::vector<int>& pinned, TopologyKind kind = TopologyKind::PF);

    int n_followers() const { return n_; }
    TopologyKind kind() const { return kind_; }

    bool edge(int i, int j) const;    // a_ij
    bool pinned(int i) const;         // p_i

    std::vector<int> in_neighbors(int i) const;   // N_i
    std::vector<int> out_neighbors(int i) const;  // O_i
    std::vector<int> info_set(int i) const;       // I_i = N_i plus 0 when pinned

    /// True iff every follower is reachable from the leader through
    /// pinning edges and follower-to-follower edges.
    bool has_leader_spanning_tree() const;

    /// Rebuild the same kind of topology over the ordering with follower i removed.
    Topology remove_vehicle(int i) const;
    /// Rebuild the same kind of topology with one more follower inserted at `position`.
    Topology insert_vehicle(int position) const;

    bool operator==(const Topology&) const = default;

private:
    Topology(TopologyKind kind, int n);
    void check_index(int i) const;

    TopologyKind kind_ = TopologyKind::PF;
    int n_ = 0;
    std::vector<std::uint8_t> adjacency_;  // row-major a[i][j], 0-based
    std::vector<std::uint8_t> pinned_;
};

}  // namespace platoon
