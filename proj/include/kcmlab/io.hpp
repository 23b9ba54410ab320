#pragma once

// Site lists as CSV (`x,y` per line, `#` comments) and atomic file writes.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kcmlab/lattice.hpp"
#include "kcmlab/version.hpp"

namespace kcmlab {

inline void write_sites_csv(std::ostream& os, const SiteSet& sites, std::uint64_t seed) {
  os << csv_banner(seed) << "\nx,y\n";
  for (auto s : sites) os << s.x << ',' << s.y << '\n';
}

/// Reads `x,y` rows; blank lines, `#` comments and an `x,y` header are skipped.
inline SiteSet read_sites_csv(std::istream& is) {
  std::vector<Site> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line == "x,y") continue;
    std::istringstream ls(line);
    Site s;
    char comma = 0;
    if (!(ls >> s.x >> comma >> s.y) || comma != ',' || !(ls >> std::ws).eof())
      throw Error("line " + std::to_string(n) + ": expected 'x,y'");
    out.push_back(s);
  }
  return make_site_set(std::move(out));
}

inline SiteSet read_sites_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_sites_csv(in);
}

/// Configuration on `region` whose empty sites are exactly `empties`.
inline Configuration configuration_from_empties(const Region& region, const SiteSet& empties, Exterior ext = AllHealthy{}) {
  std::vector<std::uint8_t> bits(region.size(), 1);
  for (auto s : empties) {
    auto i = region.index_of(s);
    if (i == Region::npos) throw Error("site " + to_string(s) + " lies outside the region");
    bits[static_cast<std::size_t>(i)] = 0;
  }
  return Configuration(region, std::move(bits), std::move(ext));
}

/// Writes through a temporary file in the same directory and renames it.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace kcmlab
