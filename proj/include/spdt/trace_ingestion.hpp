#pragma once

// GPS location updates -> stays -> SPDT links.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spdt/contact_network.hpp"

namespace spdt {

struct IngestionParams {
  double radius_m = 20.0;
  Seconds delta = 3600;  // indirect window after the host leaves
  std::uint32_t min_neighbor_updates = 2;

  void validate() const;  // throws ConfigError
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Great-circle distance in meters on a sphere of radius 6371008.8 m.
double haversine_m(GeoPoint a, GeoPoint b);

struct TimedPoint {
  GeoPoint where;
  Seconds t = 0;
};

struct Stay {
  NodeId user = 0;
  GeoPoint anchor;
  Seconds start = 0;
  Seconds end = 0;
  std::uint32_t update_count = 0;
};

struct StayDetection {
  std::vector<Stay> stays;
  std::size_t rejected = 0;  // updates with coordinates out of range or non-finite
};

// Greedy segmentation of one user's time-sorted updates: a stay opens at
// every update farther than the radius from the current anchor.
StayDetection detect_stays(NodeId user, std::span<const TimedPoint> updates, const IngestionParams& params);

// One link per (host stay, neighbor stay) pair with the neighbor anchor within
// the radius of the host anchor, enough neighbor updates, and the neighbor
// arriving in [host start, host end + delta]. Neighbor presence is truncated
// at host end + delta. Each host stay's index in `stays` becomes the link's
// location tag. Output in canonical order.
std::vector<SpdtLink> extract_links(std::span<const Stay> stays, const IngestionParams& params);

// Parsed `user_id,lat,lon,unix_seconds` records.
struct Trace {
  std::vector<std::string> user_ids;               // NodeId -> external id, sorted
  std::vector<std::vector<TimedPoint>> updates;    // per NodeId, time-sorted, deduplicated
  Seconds origin = 0;                              // unix time of midnight UTC of day 0
  std::uint32_t n_days = 0;
  std::size_t records = 0;
  std::size_t rejected = 0;
  std::vector<std::size_t> rejected_lines;         // 1-based
};

// Malformed lines are counted, not fatal. Times become relative to `origin`.
// A duplicate timestamp for a user keeps the last record in file order.
Trace parse_trace(std::istream& is);
// Reads plain or gzip-compressed files.
Trace load_trace(const std::filesystem::path& path);

struct IngestionResult {
  ContactNetwork network;
  std::size_t stays = 0;
  std::size_t rejected_updates = 0;
};

IngestionResult ingest(const Trace& trace, const IngestionParams& params);

// Fills each host's link-free days with time-shifted copies of a uniformly
// chosen active day, then extends the network to `target_days` the same way.
// Throws DomainError on an empty network or target_days < n_days.
ContactNetwork densify(const ContactNetwork& net, std::uint32_t target_days, std::uint64_t seed);

}  // namespace spdt
