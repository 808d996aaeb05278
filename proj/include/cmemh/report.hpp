#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cmemh/ensemble.hpp"
#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"

namespace cmemh {

inline constexpr const char* kHistogramHeader = "species,state,count,frequency";

/// One row per species and integer state 0..cap, including empty bins.
inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << kHistogramHeader << '\n';
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const auto freq = h.frequencies(i);
    for (std::size_t k = 0; k < h.counts[i].size(); ++k)
      os << h.species[i] << ',' << k << ',' << h.counts[i][k] << ',' << format_real(freq[k]) << '\n';
  }
}

/// Histogram table as read back from CSV.
struct HistogramTable {
  struct Series {
    std::string species;
    std::vector<std::int64_t> states;
    std::vector<std::int64_t> counts;
    std::vector<double> frequencies;
  };
  std::vector<Series> series;
};

inline HistogramTable read_histogram_csv(std::istream& in) {
  HistogramTable t;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty histogram file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHistogramHeader) throw ParseError(1, "expected header '" + std::string(kHistogramHeader) + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError(line_no, "expected 4 columns");
    auto parse_i = [&](const std::string& s) {
      std::int64_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(line_no, "bad integer '" + s + "'");
      return v;
    };
    double f = 0.0;
    {
      const auto& s = cells[3];
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), f);
      if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(line_no, "bad real '" + s + "'");
    }
    if (t.series.empty() || t.series.back().species != cells[0]) {
      for (const auto& s : t.series)
        if (s.species == cells[0]) throw ParseError(line_no, "species rows for '" + cells[0] + "' are not contiguous");
      t.series.push_back({cells[0], {}, {}, {}});
    }
    auto& s = t.series.back();
    s.states.push_back(parse_i(cells[1]));
    s.counts.push_back(parse_i(cells[2]));
    s.frequencies.push_back(f);
  }
  return t;
}

inline HistogramTable read_histogram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open histogram file '" + path + "'");
  return read_histogram_csv(in);
}

inline HistogramTable to_table(const Histogram& h) {
  HistogramTable t;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    HistogramTable::Series s;
    s.species = h.species[i];
    s.frequencies = h.frequencies(i);
    for (std::size_t k = 0; k < h.counts[i].size(); ++k) {
      s.states.push_back(static_cast<std::int64_t>(k));
      s.counts.push_back(h.counts[i][k]);
    }
    t.series.push_back(std::move(s));
  }
  return t;
}

/// Per-species sum_k |f_a(k) - f_b(k)|, in [0, 2]. Species and bins must match.
inline std::vector<std::pair<std::string, double>> compare_histograms(const HistogramTable& a,
                                                                      const HistogramTable& b) {
  if (a.series.size() != b.series.size()) throw DomainError("histograms have different species counts");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    const auto& sa = a.series[i];
    const auto& sb = b.series[i];
    if (sa.species != sb.species) throw DomainError("species mismatch: '" + sa.species + "' vs '" + sb.species + "'");
    if (sa.states != sb.states) throw DomainError("state bins differ for species '" + sa.species + "'");
    double d = 0.0;
    for (std::size_t k = 0; k < sa.frequencies.size(); ++k) d += std::fabs(sa.frequencies[k] - sb.frequencies[k]);
    out.emplace_back(sa.species, d);
  }
  return out;
}

inline std::vector<std::pair<std::string, double>> compare_histograms(const Histogram& a, const Histogram& b) {
  return compare_histograms(to_table(a), to_table(b));
}

inline std::vector<std::pair<std::string, double>> compare_histograms(const std::string& path_a,
                                                                      const std::string& path_b) {
  return compare_histograms(read_histogram_csv(path_a), read_histogram_csv(path_b));
}

/// key=value lines, in insertion order.
class Diagnostics {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_real(value)); }
  void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace cmemh
