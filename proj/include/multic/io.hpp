#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "multic/core.hpp"

namespace multic {

// Network TSV:
//   # nodes=<N> layers=<K>
//   layer<TAB>src<TAB>dst<TAB>rate
//   one edge per line, rate printed with 17 significant digits.
MultilayerNetwork read_network(const std::string& path);
MultilayerNetwork parse_network(std::istream& in, const std::string& source = "<stream>");
void write_network(const MultilayerNetwork& net, const std::string& path);
void write_network(const MultilayerNetwork& net, std::ostream& out);

// Cascade JSON-lines: one object per line,
//   {"id":0,"T":10.0,"events":[[node,time],...],"truth":{"main_layer":k,"eps":e,"pi":[...]}}
// with events in ascending time and "truth" optional.
CascadeSet read_cascades(const std::string& path);
CascadeSet parse_cascades(std::istream& in, const std::string& source = "<stream>");
void write_cascades(const CascadeSet& cascades, const std::string& path);
void write_cascades(const CascadeSet& cascades, std::ostream& out);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

/// Throws std::runtime_error naming the path if the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace multic
