#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrtb/broadcast.hpp"
#include "rrtb/tree.hpp"

namespace rrtb {

// Parent-sequence files:
//   # model=urrt n=10 beta=0 seed=7
//   0 -1
//   1 0
//   ...
struct TreeFileHeader {
  std::string model = "urrt";
  double beta = 0.0;
  std::uint64_t seed = 0;
};

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

inline void write_tree(std::ostream& out, const Tree& tree, const TreeFileHeader& h) {
  out << "# model=" << h.model << " n=" << tree.edge_count() << " beta=" << h.beta << " seed=" << h.seed << '\n';
  for (std::size_t i = 0; i < tree.vertex_count(); ++i) out << i << ' ' << tree.parent(static_cast<Vertex>(i)) << '\n';
}

inline void write_tree_file(const std::string& path, const Tree& tree, const TreeFileHeader& h) {
  auto out = open_for_write(path);
  write_tree(out, tree, h);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::pair<Tree, TreeFileHeader> read_tree(std::istream& in, const std::string& name = "<stream>") {
  TreeFileHeader h;
  std::vector<Vertex> parent;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "model") h.model = val;
        else if (key == "beta") h.beta = std::stod(val);
        else if (key == "seed") h.seed = std::stoull(val);
      }
      continue;
    }
    std::istringstream ss(line);
    long long i = 0, p = 0;
    if (!(ss >> i >> p) || i != static_cast<long long>(parent.size())) {
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected '" + std::to_string(parent.size()) +
                               " <parent>'");
    }
    parent.push_back(static_cast<Vertex>(p));
  }
  if (parent.empty()) throw std::runtime_error(name + ": no vertices");
  try {
    return {Tree{std::move(parent)}, h};
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(name + ": " + e.what());
  }
}

inline std::pair<Tree, TreeFileHeader> read_tree_file(const std::string& path) {
  auto in = open_for_read(path);
  return read_tree(in, path);
}

// Bit files: one "v bit" line per vertex, bit in {-1, 1}, '*' when masked.
inline void write_bits(std::ostream& out, const BitAssignment& bits) {
  for (std::size_t v = 0; v < bits.size(); ++v) {
    out << v << ' ';
    if (bits.is_visible(static_cast<Vertex>(v))) out << static_cast<int>(bits.bit(static_cast<Vertex>(v)));
    else out << '*';
    out << '\n';
  }
}

inline void write_bits_file(const std::string& path, const BitAssignment& bits) {
  auto out = open_for_write(path);
  write_bits(out, bits);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// Any masked entry makes the observation leaves-only.
inline ObservedBits read_bits(std::istream& in, const std::string& name = "<stream>") {
  std::vector<Bit> bits;
  std::vector<char> visible;
  bool masked = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long v = 0;
    std::string b;
    if (!(ss >> v >> b) || v != static_cast<long long>(bits.size())) {
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected '" + std::to_string(bits.size()) +
                               " <bit>'");
    }
    if (b == "*") {
      masked = true;
      bits.push_back(1);
      visible.push_back(0);
    } else if (b == "1" || b == "+1" || b == "-1") {
      bits.push_back(b == "-1" ? Bit{-1} : Bit{1});
      visible.push_back(1);
    } else {
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": bit must be 1, -1 or *");
    }
  }
  return ObservedBits{std::move(bits), std::move(visible), masked ? Visibility::leaves_only : Visibility::all_vertices};
}

inline ObservedBits read_bits_file(const std::string& path) {
  auto in = open_for_read(path);
  return read_bits(in, path);
}

}  // namespace rrtb
