#include "multic/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace multic {
namespace {

using nlohmann::json;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path);
}

MultilayerNetwork parse_network(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError(source, 1, "missing metadata line");
  ++lineno;
  line = strip_cr(line);
  int n_nodes = -1;
  int n_layers = -1;
  {
    std::istringstream meta(line);
    std::string hash, nodes_kv, layers_kv;
    meta >> hash >> nodes_kv >> layers_kv;
    if (hash != "#" || nodes_kv.rfind("nodes=", 0) != 0 || layers_kv.rfind("layers=", 0) != 0 ||
        !parse_number(std::string_view(nodes_kv).substr(6), n_nodes) ||
        !parse_number(std::string_view(layers_kv).substr(7), n_layers) || n_nodes < 0 || n_layers < 1) {
      throw ParseError(source, lineno, "expected '# nodes=<N> layers=<K>'");
    }
  }
  if (!std::getline(in, line) || strip_cr(line) != "layer\tsrc\tdst\trate") {
    throw ParseError(source, 2, "expected header 'layer\\tsrc\\tdst\\trate'");
  }
  ++lineno;

  std::vector<std::vector<Edge>> layers(static_cast<std::size_t>(n_layers));
  std::set<std::tuple<int, NodeId, NodeId>> seen;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    int layer = 0;
    Edge e;
    if (fields.size() != 4 || !parse_number(fields[0], layer) || !parse_number(fields[1], e.src) ||
        !parse_number(fields[2], e.dst) || !parse_number(fields[3], e.rate)) {
      throw ParseError(source, lineno, "malformed edge line");
    }
    if (layer < 0 || layer >= n_layers) throw ParseError(source, lineno, "layer out of range");
    if (e.src < 0 || e.src >= n_nodes || e.dst < 0 || e.dst >= n_nodes) {
      throw ParseError(source, lineno, "node id out of range");
    }
    if (e.src == e.dst) throw ParseError(source, lineno, "self-loop");
    if (!(e.rate > 0.0 && e.rate <= 1.0)) throw ParseError(source, lineno, "rate outside (0,1]");
    if (!seen.emplace(layer, e.src, e.dst).second) throw ParseError(source, lineno, "duplicate edge");
    layers[static_cast<std::size_t>(layer)].push_back(e);
  }
  return MultilayerNetwork(n_nodes, n_layers, std::move(layers));
}

MultilayerNetwork read_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_network(in, path);
}

void write_network(const MultilayerNetwork& net, std::ostream& out) {
  out << "# nodes=" << net.n_nodes() << " layers=" << net.n_layers() << "\n";
  out << "layer\tsrc\tdst\trate\n";
  char rate[40];
  for (int k = 0; k < net.n_layers(); ++k) {
    for (const Edge& e : net.layer(k)) {
      std::snprintf(rate, sizeof(rate), "%.17g", e.rate);
      out << k << '\t' << e.src << '\t' << e.dst << '\t' << rate << '\n';
    }
  }
}

void write_network(const MultilayerNetwork& net, const std::string& path) {
  std::ostringstream ss;
  write_network(net, ss);
  write_file(path, ss.str());
}

CascadeSet parse_cascades(std::istream& in, const std::string& source) {
  CascadeSet cascades;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    try {
      const json doc = json::parse(line);
      const auto id = doc.at("id").get<std::int64_t>();
      const auto horizon = doc.at("T").get<double>();
      std::vector<Activation> events;
      for (const auto& ev : doc.at("events")) {
        if (!ev.is_array() || ev.size() != 2) throw std::invalid_argument("event must be [node, time]");
        events.push_back({ev[0].get<NodeId>(), ev[1].get<double>()});
      }
      std::optional<CascadeTruth> truth;
      if (doc.contains("truth")) {
        const auto& t = doc["truth"];
        CascadeTruth tr;
        tr.main_layer = t.at("main_layer").get<int>();
        tr.eps = t.value("eps", 0.0);
        tr.pi = t.at("pi").get<std::vector<double>>();
        truth = std::move(tr);
      }
      cascades.emplace_back(id, horizon, std::move(events), std::move(truth));
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return cascades;
}

CascadeSet read_cascades(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_cascades(in, path);
}

void write_cascades(const CascadeSet& cascades, std::ostream& out) {
  for (const Cascade& c : cascades) {
    nlohmann::ordered_json doc;
    doc["id"] = c.id();
    doc["T"] = c.horizon();
    auto events = nlohmann::ordered_json::array();
    for (const Activation& a : c.events()) events.push_back({a.node, a.time});
    doc["events"] = std::move(events);
    if (c.truth()) {
      doc["truth"] = {{"main_layer", c.truth()->main_layer}, {"eps", c.truth()->eps}, {"pi", c.truth()->pi}};
    }
    out << doc.dump() << '\n';
  }
}

void write_cascades(const CascadeSet& cascades, const std::string& path) {
  std::ostringstream ss;
  write_cascades(cascades, ss);
  write_file(path, ss.str());
}

}  // namespace multic
