#pragma once

// Network file formats.
//
// Text (".csv", ".txt", anything not ending in ".spdtb"):
//   #nodes=N days=D provenance=P
//   host_id,neighbor_id,t_s,t_l,t_s_prime,t_l_prime[,location_tag]
//
// Binary (".spdtb"), all integers little-endian:
//   magic   8 bytes  "SPDTNET1"
//   nodes   u32, days u32, provenance u8, 3 zero bytes, link count u64
//   per link: host u32, neighbor u32, t_s i64, t_l i64, t_s' i64, t_l' i64,
//             has_tag u8, tag u64 (0 when absent)

#include <filesystem>
#include <iosfwd>

#include "spdt/contact_network.hpp"

namespace spdt {

void write_text(std::ostream& os, const ContactNetwork& net);
ContactNetwork read_text(std::istream& is);

void write_binary(std::ostream& os, const ContactNetwork& net);
ContactNetwork read_binary(std::istream& is);

// Format chosen by extension on write and by magic bytes on read.
void save_network(const std::filesystem::path& path, const ContactNetwork& net);
ContactNetwork load_network(const std::filesystem::path& path);

}  // namespace spdt
