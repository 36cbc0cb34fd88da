#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "whends/matrix.hpp"

namespace whends {

// Checkpoint file layout: a plain-text manifest followed by a flat binary
// section of little-endian 64-bit floats.
//
//   WHENDS-CKPT 1
//   meta <key>=<value>            (zero or more)
//   tensor <name> <rows> <cols> <byte-offset>
//   ...
//   DATA
//   <raw doubles>

class CheckpointWriter {
 public:
  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }

  void add(const std::string& name, const Matrix& m) {
    if (offsets_.count(name)) throw CorruptCheckpoint("duplicate tensor name: " + name);
    offsets_[name] = data_.size() * sizeof(double);
    shapes_[name] = {m.rows(), m.cols()};
    order_.push_back(name);
    data_.insert(data_.end(), m.data().begin(), m.data().end());
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << "WHENDS-CKPT 1\n";
    for (const auto& [k, v] : meta_) out << "meta " << k << "=" << v << "\n";
    for (const auto& name : order_) {
      const auto& [r, c] = shapes_.at(name);
      out << "tensor " << name << " " << r << " " << c << " " << offsets_.at(name) << "\n";
    }
    out << "DATA\n";
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(double)));
    if (!out) throw IoError("short write: " + path);
  }

 private:
  std::map<std::string, std::size_t> offsets_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> shapes_;
  std::vector<std::string> order_;
  std::vector<double> data_;
  std::map<std::string, std::string> meta_;
};

struct Checkpoint {
  std::map<std::string, Matrix> tensors;
  std::map<std::string, std::string> meta;

  const Matrix& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CorruptCheckpoint("missing tensor: " + name);
    return it->second;
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "WHENDS-CKPT 1")
      throw CorruptCheckpoint("bad checkpoint header");
    Checkpoint ck;
    struct Entry {
      std::string name;
      std::size_t rows, cols, offset;
    };
    std::vector<Entry> entries;
    while (std::getline(in, line)) {
      if (line == "DATA") break;
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "meta") {
        std::string rest;
        std::getline(ls, rest);
        if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
        const auto eq = rest.find('=');
        if (eq == std::string::npos) throw CorruptCheckpoint("bad meta line");
        ck.meta[rest.substr(0, eq)] = rest.substr(eq + 1);
      } else if (tag == "tensor") {
        Entry e;
        if (!(ls >> e.name >> e.rows >> e.cols >> e.offset))
          throw CorruptCheckpoint("bad tensor line: " + line);
        entries.push_back(e);
      } else {
        throw CorruptCheckpoint("unexpected manifest line: " + line);
      }
    }
    if (line != "DATA") throw CorruptCheckpoint("manifest missing DATA marker");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const auto& e : entries) {
      const std::size_t bytes = e.rows * e.cols * sizeof(double);
      if (e.offset + bytes > raw.size())
        throw CorruptCheckpoint("tensor " + e.name + " exceeds data section");
      if (ck.tensors.count(e.name)) throw CorruptCheckpoint("duplicate tensor: " + e.name);
      Matrix m(e.rows, e.cols);
      std::memcpy(m.data().data(), raw.data() + e.offset, bytes);
      ck.tensors.emplace(e.name, std::move(m));
    }
    return ck;
  }
};

}  // namespace whends
