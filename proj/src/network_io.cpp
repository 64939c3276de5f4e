#include "spdt/network_io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "spdt/errors.hpp"

namespace spdt {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'P', 'D', 'T', 'N', 'E', 'T', '1'};

template <class T>
bool parse_int(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

template <class T>
void put_le(std::ostream& os, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(u & 0xff);
    u = static_cast<U>(u >> 8);
  }
  os.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("truncated binary network");
  U u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<U>((u << 8) | buf[i]);
  return static_cast<T>(u);
}

}  // namespace

void write_text(std::ostream& os, const ContactNetwork& net) {
  os << "#nodes=" << net.n_nodes() << " days=" << net.n_days() << " provenance=" << to_string(net.provenance())
     << '\n';
  for (const SpdtLink& l : net.links()) {
    os << l.host << ',' << l.neighbor << ',' << l.host_start << ',' << l.host_end << ',' << l.nbr_start << ','
       << l.nbr_end;
    if (l.location_tag) os << ',' << *l.location_tag;
    os << '\n';
  }
}

ContactNetwork read_text(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#nodes=", 0) != 0)
    throw DataError("network text file must start with '#nodes=N days=D provenance=P'");
  std::uint32_t nodes = 0, days = 0;
  Provenance prov = Provenance::Ingested;
  {
    std::string_view rest(line);
    rest.remove_prefix(1);
    bool have_nodes = false, have_days = false, have_prov = false;
    while (!rest.empty()) {
      const auto sp = rest.find(' ');
      const auto field = rest.substr(0, sp);
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) throw DataError("bad header field '" + std::string(field) + "'");
      const auto key = field.substr(0, eq), val = field.substr(eq + 1);
      if (key == "nodes")
        have_nodes = parse_int(val, nodes);
      else if (key == "days")
        have_days = parse_int(val, days);
      else if (key == "provenance") {
        prov = parse_provenance(val);
        have_prov = true;
      } else
        throw DataError("unknown header field '" + std::string(key) + "'");
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    if (!have_nodes || !have_days || !have_prov) throw DataError("incomplete network header: " + line);
  }

  std::vector<SpdtLink> links;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view fields[7];
    std::size_t count = 0;
    std::string_view rest(line);
    while (count < 7) {
      const auto comma = rest.find(',');
      fields[count++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) {
        rest = {};
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if ((count != 6 && count != 7) || !rest.empty())
      throw DataError("line " + std::to_string(lineno) + ": expected 6 or 7 fields");
    SpdtLink l;
    bool ok = parse_int(fields[0], l.host) && parse_int(fields[1], l.neighbor) &&
              parse_int(fields[2], l.host_start) && parse_int(fields[3], l.host_end) &&
              parse_int(fields[4], l.nbr_start) && parse_int(fields[5], l.nbr_end);
    if (count == 7) {
      std::uint64_t tag = 0;
      ok = ok && parse_int(fields[6], tag);
      l.location_tag = tag;
    }
    if (!ok) throw DataError("line " + std::to_string(lineno) + ": unparsable link");
    links.push_back(l);
  }
  return ContactNetwork(nodes, days, prov, std::move(links));
}

void write_binary(std::ostream& os, const ContactNetwork& net) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, net.n_nodes());
  put_le<std::uint32_t>(os, net.n_days());
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(net.provenance()));
  os.write("\0\0\0", 3);
  put_le<std::uint64_t>(os, net.link_count());
  for (const SpdtLink& l : net.links()) {
    put_le<std::uint32_t>(os, l.host);
    put_le<std::uint32_t>(os, l.neighbor);
    put_le<std::int64_t>(os, l.host_start);
    put_le<std::int64_t>(os, l.host_end);
    put_le<std::int64_t>(os, l.nbr_start);
    put_le<std::int64_t>(os, l.nbr_end);
    put_le<std::uint8_t>(os, l.location_tag ? 1 : 0);
    put_le<std::uint64_t>(os, l.location_tag.value_or(0));
  }
}

ContactNetwork read_binary(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("not a binary SPDT network");
  const auto nodes = get_le<std::uint32_t>(is);
  const auto days = get_le<std::uint32_t>(is);
  const auto prov = get_le<std::uint8_t>(is);
  if (prov > 2) throw DataError("bad provenance byte");
  char pad[3];
  if (!is.read(pad, 3)) throw DataError("truncated binary network");
  const auto count = get_le<std::uint64_t>(is);
  std::vector<SpdtLink> links;
  links.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    SpdtLink l;
    l.host = get_le<std::uint32_t>(is);
    l.neighbor = get_le<std::uint32_t>(is);
    l.host_start = get_le<std::int64_t>(is);
    l.host_end = get_le<std::int64_t>(is);
    l.nbr_start = get_le<std::int64_t>(is);
    l.nbr_end = get_le<std::int64_t>(is);
    const auto has_tag = get_le<std::uint8_t>(is);
    const auto tag = get_le<std::uint64_t>(is);
    if (has_tag) l.location_tag = tag;
    links.push_back(l);
  }
  return ContactNetwork(nodes, days, static_cast<Provenance>(prov), std::move(links));
}

void save_network(const std::filesystem::path& path, const ContactNetwork& net) {
  const bool binary = path.extension() == ".spdtb";
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot write " + path.string());
  if (binary)
    write_binary(os, net);
  else
    write_text(os, net);
  if (!os) throw DataError("write failed: " + path.string());
}

ContactNetwork load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::array<char, 8> head{};
  is.read(head.data(), head.size());
  const bool binary = is.gcount() == 8 && head == kMagic;
  is.clear();
  is.seekg(0);
  return binary ? read_binary(is) : read_text(is);
}

}  // namespace spdt
