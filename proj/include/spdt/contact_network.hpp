#pragma once

// Temporal contact network of same-place different-time (SPDT) links.
//
// A link records one transmission opportunity: the host stays at a place
// during [host_start, host_end]; the neighbor is present at the same place
// during [nbr_start, nbr_end], arriving no earlier than the host and no later
// than the end of the particle window after the host leaves. Times are
// seconds relative to the network origin, which is midnight of day 0.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spdt {

using NodeId = std::uint32_t;
using Seconds = std::int64_t;

inline constexpr Seconds kDaySeconds = 86400;

enum class LinkKind : std::uint8_t { DirectOnly = 0, Mixed = 1, IndirectOnly = 2 };

std::string_view to_string(LinkKind kind);

// Small bitset over LinkKind.
class KindSet {
 public:
  constexpr KindSet() = default;
  constexpr KindSet(std::initializer_list<LinkKind> kinds) {
    for (LinkKind k : kinds) bits_ |= bit(k);
  }

  static constexpr KindSet all() { return {LinkKind::DirectOnly, LinkKind::Mixed, LinkKind::IndirectOnly}; }
  // Links with a co-presence component, i.e. the ones a person can notice.
  static constexpr KindSet direct() { return {LinkKind::DirectOnly, LinkKind::Mixed}; }

  constexpr bool contains(LinkKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool is_subset_of(KindSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  friend constexpr bool operator==(KindSet, KindSet) = default;

  // "all", "direct", or a '+'-joined list of kind names.
  std::string name() const;
  static KindSet parse(std::string_view text);

 private:
  static constexpr std::uint8_t bit(LinkKind k) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k)); }
  std::uint8_t bits_ = 0;
};

struct SpdtLink {
  NodeId host = 0;
  NodeId neighbor = 0;
  Seconds host_start = 0;
  Seconds host_end = 0;
  Seconds nbr_start = 0;
  Seconds nbr_end = 0;
  std::optional<std::uint64_t> location_tag;

  friend bool operator==(const SpdtLink&, const SpdtLink&) = default;
};

// Canonical storage order: day, host, host interval, neighbor, neighbor interval, tag.
bool canonical_less(const SpdtLink& a, const SpdtLink& b);

// Boundaries: nbr_end == host_end is DirectOnly, nbr_start == host_end is IndirectOnly.
LinkKind classify_link(const SpdtLink& link);

// Structural invariants that do not depend on the ingestion window.
bool is_valid_link(const SpdtLink& link);

inline std::int64_t day_of(Seconds t) {
  return t >= 0 ? t / kDaySeconds : -((-t + kDaySeconds - 1) / kDaySeconds);
}

enum class Provenance : std::uint8_t { Ingested = 0, Densified = 1, Synthetic = 2 };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

// Half-open day range [first, last).
struct DayRange {
  std::uint32_t first = 0;
  std::uint32_t last = 0;

  constexpr std::uint32_t size() const { return last > first ? last - first : 0; }
  constexpr bool contains(std::uint32_t d) const { return d >= first && d < last; }
};

// Immutable after construction; safe for concurrent readers.
class ContactNetwork {
 public:
  ContactNetwork() = default;

  // Validates and sorts links into canonical order. Each link is bucketed by
  // the day of its host_start. Throws DataError on invalid input.
  ContactNetwork(std::uint32_t n_nodes, std::uint32_t n_days, Provenance provenance,
                 std::vector<SpdtLink> links);

  std::uint32_t n_nodes() const { return n_nodes_; }
  std::uint32_t n_days() const { return n_days_; }
  Provenance provenance() const { return provenance_; }
  std::size_t link_count() const { return links_.size(); }

  std::span<const SpdtLink> links() const { return links_; }
  std::span<const SpdtLink> links_on(std::uint32_t day) const;
  // Links hosted by `host` on `day`, in canonical order.
  std::span<const SpdtLink> hosted_by(std::uint32_t day, NodeId host) const;

  // Links on `day` whose neighbor is `node`, as offsets into links().
  std::span<const std::uint32_t> received_by(std::uint32_t day, NodeId node) const;

  // Offset of a link inside links(); stable identity for a link.
  std::size_t index_of(const SpdtLink& link) const { return static_cast<std::size_t>(&link - links_.data()); }

  DayRange all_days() const { return {0, n_days_}; }

  friend bool operator==(const ContactNetwork&, const ContactNetwork&) = default;

 private:
  std::uint32_t n_nodes_ = 0;
  std::uint32_t n_days_ = 0;
  Provenance provenance_ = Provenance::Ingested;
  std::vector<SpdtLink> links_;
  std::vector<std::size_t> day_offsets_{0};
  std::vector<std::uint32_t> by_receiver_;  // per day, link offsets sorted by neighbor
};

// Distinct opposite endpoints of links touching `node` (as host or neighbor)
// whose day lies in `days` and whose kind is in `kinds`. Sorted ascending.
// Throws DomainError for an unknown node or a range beyond the network.
std::vector<NodeId> neighbors_of(const ContactNetwork& net, NodeId node, DayRange days, KindSet kinds);

std::size_t contact_degree(const ContactNetwork& net, NodeId node, DayRange days, KindSet kinds);

// Undirected neighbor sets of every node over a window, precomputed once.
// Equivalent to calling neighbors_of for each node.
class AdjacencySnapshot {
 public:
  AdjacencySnapshot(const ContactNetwork& net, DayRange days, KindSet kinds);

  std::span<const NodeId> neighbors(NodeId node) const {
    return {targets_.data() + offsets_[node], targets_.data() + offsets_[node + 1]};
  }
  std::size_t degree(NodeId node) const { return offsets_[node + 1] - offsets_[node]; }
  std::uint32_t n_nodes() const { return static_cast<std::uint32_t>(offsets_.size() - 1); }
  // Nodes with at least one link (of any kind) in the window.
  const std::vector<NodeId>& active_nodes() const { return active_; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<NodeId> active_;
};

// Nodes touching at least one link of any kind in the window, ascending.
std::vector<NodeId> active_nodes(const ContactNetwork& net, DayRange days);

struct ReceivedLinks {
  NodeId node = 0;
  std::vector<const SpdtLink*> links;  // canonical order
};

// For every node outside `infected`, that day's links hosted by an infected
// node and pointing at it. Grouped by receiver, receivers ascending.
// `infected` is indexed by NodeId.
std::vector<ReceivedLinks> links_from_infected(const ContactNetwork& net, std::uint32_t day,
                                               const std::vector<bool>& infected);

}  // namespace spdt
