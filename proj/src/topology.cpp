#include "platoon/topology.hpp"

#include <deque>
#include <stdexcept>

namespace platoon {

TopologyKind topology_kind_from_string(std::string_view s) {
    if (s == "pf") return TopologyKind::PF;
    if (s == "plf") return TopologyKind::PLF;
    if (s == "tpf") return TopologyKind::TPF;
    if (s == "tplf") return TopologyKind::TPLF;
    throw std::invalid_argument("unknown topology kind: " + std::string(s) +
                                " (expected pf|plf|tpf|tplf)");
}

std::string to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::PF: return "pf";
        case TopologyKind::PLF: return "plf";
        case TopologyKind::TPF: return "tpf";
        case TopologyKind::TPLF: return "tplf";
    }
    return "pf";
}

Topology::Topology(TopologyKind kind, int n)
    : kind_(kind), n_(n), adjacency_(static_cast<std::size_t>(n) * n, 0), pinned_(n, 0) {}

Topology Topology::build(TopologyKind kind, int n_followers) {
    if (n_followers < 1) throw std::invalid_argument("topology needs at least one follower");
    Topology t(kind, n_followers);
    const bool two_pred = kind == TopologyKind::TPF || kind == TopologyKind::TPLF;
    const bool all_pinned = kind == TopologyKind::PLF || kind == TopologyKind::TPLF;
    for (int i = 1; i < n_followers; ++i) {
        t.adjacency_[static_cast<std::size_t>(i) * n_followers + (i - 1)] = 1;
        if (two_pred && i >= 2)
            t.adjacency_[static_cast<std::size_t>(i) * n_followers + (i - 2)] = 1;
    }
    t.pinned_[0] = 1;  // the head of the chain always hears the leader
    if (all_pinned)
        for (int i = 0; i < n_followers; ++i) t.pinned_[i] = 1;
    return t;
}

Topology Topology::custom(int n_followers, const std::vector<std::pair<int, int>>& edges,
                          const std::vector<int>& pinned, TopologyKind kind) {
    if (n_followers < 1) throw std::invalid_argument("topology needs at least one follower");
    if (static_cast<int>(pinned.size()) != n_followers)
        throw std::invalid_argument("pinned vector length must match the follower count");
    Topology t(kind, n_followers);
    for (const auto& [i, j] : edges) {
        if (i < 1 || i > n_followers || j < 1 || j > n_followers)
            throw std::out_of_range("edge endpoint out of range");
        if (i == j) throw std::invalid_argument("self loops are not allowed");
        if (j >= i)
            throw std::invalid_argument("unidirectional topology requires information to flow "
                                        "rearward (j < i)");
        t.adjacency_[static_cast<std::size_t>(i - 1) * n_followers + (j - 1)] = 1;
    }
    for (int i = 0; i < n_followers; ++i) t.pinned_[i] = pinned[i] ? 1 : 0;
    return t;
}

void Topology::check_index(int i) const {
    if (i < 1 || i > n_) throw std::out_of_range("follower index out of range");
}

bool Topology::edge(int i, int j) const {
    check_index(i);
    check_index(j);
    return adjacency_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)] != 0;
}

bool Topology::pinned(int i) const {
    check_index(i);
    return pinned_[i - 1] != 0;
}

std::vector<int> Topology::in_neighbors(int i) const {
    check_index(i);
    std::vector<int> out;
    for (int j = 1; j <= n_; ++j)
        if (adjacency_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)]) out.push_back(j);
    return out;
}

std::vector<int> Topology::out_neighbors(int i) const {
    check_index(i);
    std::vector<int> out;
    for (int j = 1; j <= n_; ++j)
        if (adjacency_[static_cast<std::size_t>(j - 1) * n_ + (i - 1)]) out.push_back(j);
    return out;
}

std::vector<int> Topology::info_set(int i) const {
    std::vector<int> out;
    if (pinned(i)) out.push_back(0);
    for (int j : in_neighbors(i)) out.push_back(j);
    return out;
}

bool Topology::has_leader_spanning_tree() const {
    if (n_ == 0) return true;
    std::vector<char> reached(n_, 0);
    std::deque<int> frontier;
    for (int i = 0; i < n_; ++i)
        if (pinned_[i]) {
            reached[i] = 1;
            frontier.push_back(i);
        }
    while (!frontier.empty()) {
        const int j = frontier.front();
        frontier.pop_front();
        for (int i = 0; i < n_; ++i)
            if (!reached[i] && adjacency_[static_cast<std::size_t>(i) * n_ + j]) {
                reached[i] = 1;
                frontier.push_back(i);
            }
    }
    for (int i = 0; i < n_; ++i)
        if (!reached[i]) return false;
    return true;
}

Topology Topology::remove_vehicle(int i) const {
    if (n_ == 0) throw std::invalid_argument("cannot remove a vehicle from an empty platoon");
    check_index(i);
    if (n_ == 1) return Topology(kind_, 0);
    return build(kind_, n_ - 1);
}

Topology Topology::insert_vehicle(int position) const {
    if (position < 1 || position > n_ + 1)
        throw std::out_of_range("insert position out of range");
    return build(kind_, n_ + 1);
}

}  // namespace platoon
