#include "spdt/contact_network.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <tuple>

#include "spdt/errors.hpp"

namespace spdt {

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::DirectOnly:
      return "direct_only";
    case LinkKind::Mixed:
      return "mixed";
    case LinkKind::IndirectOnly:
      return "indirect_only";
  }
  return "?";
}

std::string KindSet::name() const {
  if (*this == all()) return "all";
  if (*this == direct()) return "direct";
  std::string out;
  for (LinkKind k : {LinkKind::DirectOnly, LinkKind::Mixed, LinkKind::IndirectOnly}) {
    if (!contains(k)) continue;
    if (!out.empty()) out += '+';
    out += to_string(k);
  }
  return out.empty() ? "none" : out;
}

KindSet KindSet::parse(std::string_view text) {
  if (text == "all") return all();
  if (text == "direct") return direct();
  if (text == "none") return {};
  KindSet out;
  while (!text.empty()) {
    const auto plus = text.find('+');
    const std::string_view part = text.substr(0, plus);
    if (part == "direct_only")
      out.bits_ |= bit(LinkKind::DirectOnly);
    else if (part == "mixed")
      out.bits_ |= bit(LinkKind::Mixed);
    else if (part == "indirect_only")
      out.bits_ |= bit(LinkKind::IndirectOnly);
    else
      throw ConfigError("unknown link kind '" + std::string(part) + "'");
    if (plus == std::string_view::npos) break;
    text.remove_prefix(plus + 1);
  }
  return out;
}

bool canonical_less(const SpdtLink& a, const SpdtLink& b) {
  const auto key = [](const SpdtLink& l) {
    return std::make_tuple(day_of(l.host_start), l.host, l.host_start, l.host_end, l.neighbor,
                           l.nbr_start, l.nbr_end, l.location_tag.has_value(),
                           l.location_tag.value_or(0));
  };
  return key(a) < key(b);
}

LinkKind classify_link(const SpdtLink& link) {
  if (link.nbr_start >= link.host_end) return LinkKind::IndirectOnly;
  if (link.nbr_end <= link.host_end) return LinkKind::DirectOnly;
  return LinkKind::Mixed;
}

bool is_valid_link(const SpdtLink& l) {
  return l.host != l.neighbor && l.host_start <= l.host_end && l.nbr_start <= l.nbr_end &&
         l.nbr_start >= l.host_start;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Ingested:
      return "ingested";
    case Provenance::Densified:
      return "densified";
    case Provenance::Synthetic:
      return "synthetic";
  }
  return "?";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "ingested") return Provenance::Ingested;
  if (text == "densified") return Provenance::Densified;
  if (text == "synthetic") return Provenance::Synthetic;
  throw DataError("unknown provenance '" + std::string(text) + "'");
}

namespace {

std::string describe(const SpdtLink& l) {
  std::ostringstream os;
  os << l.host << "->" << l.neighbor << " host[" << l.host_start << "," << l.host_end << "] nbr["
     << l.nbr_start << "," << l.nbr_end << "]";
  return os.str();
}

}  // namespace

ContactNetwork::ContactNetwork(std::uint32_t n_nodes, std::uint32_t n_days, Provenance provenance,
                               std::vector<SpdtLink> links)
    : n_nodes_(n_nodes), n_days_(n_days), provenance_(provenance), links_(std::move(links)) {
  for (const SpdtLink& l : links_) {
    if (l.host >= n_nodes_ || l.neighbor >= n_nodes_)
      throw DataError("link references node outside [0, " + std::to_string(n_nodes_) + "): " + describe(l));
    if (!is_valid_link(l)) throw DataError("invalid link " + describe(l));
    const auto day = day_of(l.host_start);
    if (day < 0 || day >= static_cast<std::int64_t>(n_days_))
      throw DataError("link outside day range [0, " + std::to_string(n_days_) + "): " + describe(l));
  }
  std::sort(links_.begin(), links_.end(), canonical_less);

  day_offsets_.assign(n_days_ + 1, 0);
  std::size_t pos = 0;
  for (std::uint32_t d = 0; d < n_days_; ++d) {
    day_offsets_[d] = pos;
    while (pos < links_.size() && day_of(links_[pos].host_start) == d) ++pos;
  }
  day_offsets_[n_days_] = pos;
  if (pos != links_.size()) throw DataError("internal: day bucketing mismatch");
  if (links_.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("too many links");

  by_receiver_.resize(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) by_receiver_[i] = static_cast<std::uint32_t>(i);
  for (std::uint32_t d = 0; d < n_days_; ++d) {
    std::stable_sort(by_receiver_.begin() + static_cast<std::ptrdiff_t>(day_offsets_[d]),
                     by_receiver_.begin() + static_cast<std::ptrdiff_t>(day_offsets_[d + 1]),
                     [&](std::uint32_t a, std::uint32_t b) { return links_[a].neighbor < links_[b].neighbor; });
  }
}

std::span<const std::uint32_t> ContactNetwork::received_by(std::uint32_t day, NodeId node) const {
  if (day >= n_days_) throw DomainError("day " + std::to_string(day) + " outside network");
  const auto first = by_receiver_.begin() + static_cast<std::ptrdiff_t>(day_offsets_[day]);
  const auto last = by_receiver_.begin() + static_cast<std::ptrdiff_t>(day_offsets_[day + 1]);
  const auto lo = std::lower_bound(first, last, node,
                                   [&](std::uint32_t i, NodeId v) { return links_[i].neighbor < v; });
  const auto hi = std::upper_bound(lo, last, node,
                                   [&](NodeId v, std::uint32_t i) { return v < links_[i].neighbor; });
  return {by_receiver_.data() + (lo - by_receiver_.begin()), static_cast<std::size_t>(hi - lo)};
}

std::span<const SpdtLink> ContactNetwork::links_on(std::uint32_t day) const {
  if (day >= n_days_) throw DomainError("day " + std::to_string(day) + " outside network");
  return {links_.data() + day_offsets_[day], links_.data() + day_offsets_[day + 1]};
}

std::span<const SpdtLink> ContactNetwork::hosted_by(std::uint32_t day, NodeId host) const {
  const auto today = links_on(day);
  const auto lo = std::lower_bound(today.begin(), today.end(), host,
                                   [](const SpdtLink& l, NodeId h) { return l.host < h; });
  const auto hi = std::upper_bound(lo, today.end(), host,
                                   [](NodeId h, const SpdtLink& l) { return h < l.host; });
  return {lo, hi};
}

namespace {

void check_query(const ContactNetwork& net, NodeId node, DayRange days) {
  if (node >= net.n_nodes()) throw DomainError("unknown node " + std::to_string(node));
  if (days.first > days.last || days.last > net.n_days())
    throw DomainError("day range [" + std::to_string(days.first) + ", " + std::to_string(days.last) +
                      ") outside network of " + std::to_string(net.n_days()) + " days");
}

}  // namespace

std::vector<NodeId> neighbors_of(const ContactNetwork& net, NodeId node, DayRange days, KindSet kinds) {
  check_query(net, node, days);
  std::vector<NodeId> out;
  for (std::uint32_t d = days.first; d < days.last; ++d) {
    for (const SpdtLink& l : net.links_on(d)) {
      if (l.host != node && l.neighbor != node) continue;
      if (!kinds.contains(classify_link(l))) continue;
      out.push_back(l.host == node ? l.neighbor : l.host);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t contact_degree(const ContactNetwork& net, NodeId node, DayRange days, KindSet kinds) {
  return neighbors_of(net, node, days, kinds).size();
}

AdjacencySnapshot::AdjacencySnapshot(const ContactNetwork& net, DayRange days, KindSet kinds) {
  if (days.first > days.last || days.last > net.n_days())
    throw DomainError("snapshot window outside network");
  const std::uint32_t n = net.n_nodes();
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<bool> active(n, false);
  for (std::uint32_t d = days.first; d < days.last; ++d) {
    for (const SpdtLink& l : net.links_on(d)) {
      active[l.host] = true;
      active[l.neighbor] = true;
      if (!kinds.contains(classify_link(l))) continue;
      edges.emplace_back(l.host, l.neighbor);
      edges.emplace_back(l.neighbor, l.host);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& e : edges) ++offsets_[e.first + 1];
  for (std::uint32_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
  targets_.reserve(edges.size());
  for (const auto& e : edges) targets_.push_back(e.second);
  for (NodeId v = 0; v < n; ++v)
    if (active[v]) active_.push_back(v);
}

std::vector<NodeId> active_nodes(const ContactNetwork& net, DayRange days) {
  if (days.first > days.last || days.last > net.n_days()) throw DomainError("window outside network");
  std::vector<bool> seen(net.n_nodes(), false);
  for (std::uint32_t d = days.first; d < days.last; ++d) {
    for (const SpdtLink& l : net.links_on(d)) {
      seen[l.host] = true;
      seen[l.neighbor] = true;
    }
  }
  std::vector<NodeId> out;
  for (NodeId v = 0; v < net.n_nodes(); ++v)
    if (seen[v]) out.push_back(v);
  return out;
}

std::vector<ReceivedLinks> links_from_infected(const ContactNetwork& net, std::uint32_t day,
                                               const std::vector<bool>& infected) {
  if (infected.size() != net.n_nodes()) throw DomainError("infected mask size does not match network");
  std::vector<std::pair<NodeId, const SpdtLink*>> hits;
  for (const SpdtLink& l : net.links_on(day)) {
    if (infected[l.host] && !infected[l.neighbor]) hits.emplace_back(l.neighbor, &l);
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ReceivedLinks> out;
  for (const auto& [node, link] : hits) {
    if (out.empty() || out.back().node != node) out.push_back({node, {}});
    out.back().links.push_back(link);
  }
  return out;
}

}  // namespace spdt
