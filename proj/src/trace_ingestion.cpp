#include "spdt/trace_ingestion.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "spdt/errors.hpp"
#include "spdt/random.hpp"

namespace spdt {

void IngestionParams::validate() const {
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) throw ConfigError("radius must be positive");
  if (delta < 0) throw ConfigError("delta must be non-negative");
  if (min_neighbor_updates < 2) throw ConfigError("min_neighbor_updates must be at least 2");
}

namespace {

constexpr double kEarthRadiusM = 6371008.8;
constexpr double kDeg = std::numbers::pi / 180.0;

bool valid_point(GeoPoint p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 &&
         p.lon <= 180.0;
}

}  // namespace

double haversine_m(GeoPoint a, GeoPoint b) {
  const double dlat = (b.lat - a.lat) * kDeg;
  const double dlon = (b.lon - a.lon) * kDeg;
  const double s1 = std::sin(dlat / 2), s2 = std::sin(dlon / 2);
  const double h = s1 * s1 + std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

StayDetection detect_stays(NodeId user, std::span<const TimedPoint> updates, const IngestionParams& params) {
  StayDetection out;
  Stay* open = nullptr;
  for (const TimedPoint& u : updates) {
    if (!valid_point(u.where)) {
      ++out.rejected;
      continue;
    }
    if (open != nullptr && haversine_m(open->anchor, u.where) <= params.radius_m) {
      open->end = u.t;
      ++open->update_count;
      continue;
    }
    out.stays.push_back({user, u.where, u.t, u.t, 1});
    open = &out.stays.back();
  }
  return out;
}

namespace {

struct CellKey {
  std::int64_t lat, lon;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(k.lat) * 0x9e3779b97f4a7c15ULL ^
                                          static_cast<std::uint64_t>(k.lon)));
  }
};

}  // namespace

std::vector<SpdtLink> extract_links(std::span<const Stay> stays, const IngestionParams& params) {
  params.validate();
  // Grid in degrees. Longitude cells are sized for the highest latitude seen,
  // so a neighbor within the radius is always in an adjacent cell.
  const double cell_lat = params.radius_m / (kEarthRadiusM * kDeg);
  double max_abs_lat = 0.0;
  for (const Stay& s : stays) max_abs_lat = std::max(max_abs_lat, std::abs(s.anchor.lat));
  const double cell_lon = cell_lat / std::cos(std::min(max_abs_lat, 89.0) * kDeg);
  const auto key_of = [&](GeoPoint p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.lat / cell_lat)),
                   static_cast<std::int64_t>(std::floor(p.lon / cell_lon))};
  };

  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < stays.size(); ++i) {
    if (stays[i].update_count >= params.min_neighbor_updates) grid[key_of(stays[i].anchor)].push_back(i);
  }
  for (auto& [key, members] : grid) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(stays[a].start, a) < std::tie(stays[b].start, b);
    });
  }

  std::vector<SpdtLink> links;
  for (std::size_t h = 0; h < stays.size(); ++h) {
    const Stay& host = stays[h];
    const Seconds window_end = host.end + params.delta;
    const CellKey center = key_of(host.anchor);
    for (std::int64_t di = -1; di <= 1; ++di) {
      for (std::int64_t dj = -1; dj <= 1; ++dj) {
        const auto it = grid.find({center.lat + di, center.lon + dj});
        if (it == grid.end()) continue;
        const auto& members = it->second;
        auto pos = std::lower_bound(members.begin(), members.end(), host.start,
                                    [&](std::size_t idx, Seconds t) { return stays[idx].start < t; });
        for (; pos != members.end() && stays[*pos].start <= window_end; ++pos) {
          const Stay& nbr = stays[*pos];
          if (nbr.user == host.user) continue;
          if (haversine_m(host.anchor, nbr.anchor) > params.radius_m) continue;
          // Arriving exactly at the window end leaves no presence to expose.
          if (std::min(nbr.end, window_end) <= nbr.start) continue;
          links.push_back({host.user, nbr.user, host.start, host.end, nbr.start, std::min(nbr.end, window_end),
                           static_cast<std::uint64_t>(h)});
        }
      }
    }
  }
  std::sort(links.begin(), links.end(), canonical_less);
  return links;
}

namespace {

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

struct RawUpdate {
  std::string user;
  TimedPoint point;
  std::size_t order;
};

}  // namespace

Trace parse_trace(std::istream& is) {
  Trace trace;
  std::vector<RawUpdate> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    ++trace.records;
    std::string_view fields[4];
    std::string_view rest(line);
    std::size_t count = 0;
    bool overflow = false;
    while (true) {
      const auto comma = rest.find(',');
      if (count == 4) {
        overflow = true;
        break;
      }
      fields[count++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    RawUpdate u{std::string(fields[0]), {}, raw.size()};
    const bool ok = !overflow && count == 4 && !fields[0].empty() && parse_number(fields[1], u.point.where.lat) &&
                    parse_number(fields[2], u.point.where.lon) && parse_number(fields[3], u.point.t) &&
                    valid_point(u.point.where);
    if (!ok) {
      ++trace.rejected;
      trace.rejected_lines.push_back(lineno);
      continue;
    }
    raw.push_back(std::move(u));
  }
  if (raw.empty()) return trace;

  Seconds min_t = raw.front().point.t, max_t = min_t;
  for (const auto& u : raw) {
    min_t = std::min(min_t, u.point.t);
    max_t = std::max(max_t, u.point.t);
  }
  trace.origin = day_of(min_t) * kDaySeconds;
  trace.n_days = static_cast<std::uint32_t>(day_of(max_t - trace.origin) + 1);

  std::sort(raw.begin(), raw.end(), [](const RawUpdate& a, const RawUpdate& b) {
    return std::tie(a.user, a.point.t, a.order) < std::tie(b.user, b.point.t, b.order);
  });
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // Equal timestamps sort by file order; the last one wins.
    if (i + 1 < raw.size() && raw[i + 1].user == raw[i].user && raw[i + 1].point.t == raw[i].point.t) continue;
    if (trace.user_ids.empty() || trace.user_ids.back() != raw[i].user) {
      trace.user_ids.push_back(raw[i].user);
      trace.updates.emplace_back();
    }
    TimedPoint p = raw[i].point;
    p.t -= trace.origin;
    trace.updates.back().push_back(p);
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::string content;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) content.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataError("read error in " + path.string());
  std::istringstream is(content);
  return parse_trace(is);
}

IngestionResult ingest(const Trace& trace, const IngestionParams& params) {
  params.validate();
  IngestionResult result;
  std::vector<Stay> stays;
  for (NodeId u = 0; u < trace.updates.size(); ++u) {
    auto det = detect_stays(u, trace.updates[u], params);
    result.rejected_updates += det.rejected;
    stays.insert(stays.end(), det.stays.begin(), det.stays.end());
  }
  result.stays = stays.size();
  auto links = extract_links(stays, params);
  result.network = ContactNetwork(static_cast<std::uint32_t>(trace.user_ids.size()), trace.n_days,
                                  Provenance::Ingested, std::move(links));
  return result;
}

ContactNetwork densify(const ContactNetwork& net, std::uint32_t target_days, std::uint64_t seed) {
  if (net.link_count() == 0 || net.n_days() == 0) throw DomainError("cannot densify an empty network");
  if (target_days < net.n_days()) throw DomainError("target_days is shorter than the network");

  const std::uint32_t days = net.n_days();
  std::vector<std::vector<std::uint32_t>> active(net.n_nodes());
  for (std::uint32_t d = 0; d < days; ++d) {
    for (const SpdtLink& l : net.links_on(d)) {
      auto& a = active[l.host];
      if (a.empty() || a.back() != d) a.push_back(d);
    }
  }

  std::vector<SpdtLink> out(net.links().begin(), net.links().end());
  const auto copy_day = [&](NodeId u, std::uint32_t from, std::uint32_t to) {
    const Seconds shift = (static_cast<Seconds>(to) - static_cast<Seconds>(from)) * kDaySeconds;
    for (SpdtLink l : net.hosted_by(from, u)) {
      l.host_start += shift;
      l.host_end += shift;
      l.nbr_start += shift;
      l.nbr_end += shift;
      out.push_back(l);
    }
  };

  for (NodeId u = 0; u < net.n_nodes(); ++u) {
    const auto& a = active[u];
    if (a.empty()) continue;
    for (std::uint32_t d = 0; d < target_days; ++d) {
      if (d < days && std::binary_search(a.begin(), a.end(), d)) continue;
      Stream rng(seed, {u, d});
      copy_day(u, a[uniform_index(rng, a.size())], d);
    }
  }
  return ContactNetwork(net.n_nodes(), target_days, Provenance::Densified, std::move(out));
}

}  // namespace spdt
