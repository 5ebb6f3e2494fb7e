#pragma once

// IdStore import/export.
//
// Binary layout (all integers unsigned, all values little-endian):
//
//   offset  size   field
//   0       8      magic "HAMOSID1"
//   8       4      C       number of classes
//   12      4      d       embedding dimension
//   16      8      B       per-class buffer capacity
//   24      8      gamma   EMA factor, IEEE-754 float64
//   32      ...    C class records, in class order:
//                    8        n   number of buffered embeddings (n <= B)
//                    n*d*8    embeddings, row-major float64, oldest first
//                    1        1 if a prototype follows, else 0
//                    d*8      prototype, float64 (only if flag == 1)
//
// The JSON form carries the same content:
//   {"format": "hamos-idstore", "version": 1, "C": .., "d": .., "B": ..,
//    "gamma": .., "classes": [{"embeddings": [[..], ..], "prototype": [..] | null}]}
//
// Loading replays the embeddings through IdStore::insert, so the insertion
// order (and with it kNN tie-breaking) survives a round trip.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hamos/error.hpp"
#include "hamos/id_store.hpp"

namespace hamos {

namespace detail {

inline constexpr std::array<char, 8> kStoreMagic = {'H', 'A', 'M', 'O', 'S', 'I', 'D', '1'};

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw Error(ErrorKind::Io, "truncated store file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_store_binary(const IdStore& store, std::ostream& os) {
  os.write(detail::kStoreMagic.data(), detail::kStoreMagic.size());
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.num_classes()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.dim()));
  detail::write_le<std::uint64_t>(os, store.capacity());
  detail::write_le<double>(os, store.ema_factor());
  for (int c = 0; c < store.num_classes(); ++c) {
    detail::write_le<std::uint64_t>(os, store.size(c));
    for (std::size_t i = 0; i < store.size(c); ++i) {
      for (double x : store.embedding(c, i)) detail::write_le<double>(os, x);
    }
    const bool has = store.has_prototype(c);
    detail::write_le<std::uint8_t>(os, has ? 1 : 0);
    if (has) {
      for (double x : store.prototype(c).coords()) detail::write_le<double>(os, x);
    }
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing store");
}

inline IdStore read_store_binary(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != detail::kStoreMagic) {
    throw Error(ErrorKind::Io, "not a binary id store (bad magic)");
  }
  const auto num_classes = detail::read_le<std::uint32_t>(is);
  const auto dim = detail::read_le<std::uint32_t>(is);
  const auto capacity = detail::read_le<std::uint64_t>(is);
  const auto gamma = detail::read_le<double>(is);
  IdStore store(static_cast<int>(num_classes), dim, capacity, gamma);
  Vec row(dim);
  for (int c = 0; c < store.num_classes(); ++c) {
    const auto n = detail::read_le<std::uint64_t>(is);
    if (n > capacity) throw Error(ErrorKind::Io, "class buffer larger than capacity");
    for (std::uint64_t i = 0; i < n; ++i) {
      for (auto& x : row) x = detail::read_le<double>(is);
      store.insert(c, row);
    }
    const auto has = detail::read_le<std::uint8_t>(is);
    if (has > 1) throw Error(ErrorKind::Io, "bad prototype flag");
    if (has == 1) {
      for (auto& x : row) x = detail::read_le<double>(is);
      store.set_prototype(c, UnitVector::adopt(row));
    }
  }
  return store;
}

inline nlohmann::json store_to_json(const IdStore& store) {
  nlohmann::json j;
  j["format"] = "hamos-idstore";
  j["version"] = 1;
  j["C"] = store.num_classes();
  j["d"] = store.dim();
  j["B"] = store.capacity();
  j["gamma"] = store.ema_factor();
  auto& classes = j["classes"] = nlohmann::json::array();
  for (int c = 0; c < store.num_classes(); ++c) {
    nlohmann::json cls;
    auto& emb = cls["embeddings"] = nlohmann::json::array();
    for (std::size_t i = 0; i < store.size(c); ++i) {
      const auto e = store.embedding(c, i);
      emb.push_back(Vec(e.begin(), e.end()));
    }
    cls["prototype"] = store.has_prototype(c) ? nlohmann::json(store.prototype(c).vec())
                                              : nlohmann::json(nullptr);
    classes.push_back(std::move(cls));
  }
  return j;
}

inline IdStore store_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "hamos-idstore") {
      throw Error(ErrorKind::Io, "not a JSON id store");
    }
    IdStore store(j.at("C").get<int>(), j.at("d").get<std::size_t>(), j.at("B").get<std::size_t>(),
                  j.at("gamma").get<double>());
    const auto& classes = j.at("classes");
    if (classes.size() != static_cast<std::size_t>(store.num_classes())) {
      throw Error(ErrorKind::Io, "class count does not match header");
    }
    for (int c = 0; c < store.num_classes(); ++c) {
      const auto& cls = classes[static_cast<std::size_t>(c)];
      const auto& emb = cls.at("embeddings");
      if (emb.size() > store.capacity()) throw Error(ErrorKind::Io, "class buffer larger than capacity");
      for (const auto& row : emb) store.insert(c, row.get<Vec>());
      if (!cls.at("prototype").is_null()) {
        store.set_prototype(c, UnitVector::adopt(cls.at("prototype").get<Vec>()));
      }
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed store JSON: ") + e.what());
  }
}

/// Writes JSON when the path ends in ".json", the binary layout otherwise.
inline void save_store(const IdStore& store, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
    os << store_to_json(store).dump() << '\n';
    if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
  write_store_binary(store, os);
}

inline IdStore load_store(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Io, std::string("malformed store JSON: ") + e.what());
    }
    return store_from_json(j);
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_store_binary(is);
}

}  // namespace hamos
