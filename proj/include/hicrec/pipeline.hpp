#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hicrec/binary_io.hpp"
#include "hicrec/config.hpp"
#include "hicrec/dataset.hpp"
#include "hicrec/errors.hpp"
#include "hicrec/hin.hpp"
#include "hicrec/metapath.hpp"

namespace hicrec {

/// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes) {
    if (EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()) != 1) throw std::runtime_error("SHA-256 update failed");
  }

  /// Length-prefixed, so adjacent fields cannot run together.
  void field(std::string_view bytes) {
    update(std::to_string(bytes.size()));
    update(":");
    update(bytes);
  }

  std::array<unsigned char, 32> digest() {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != out.size()) {
      throw std::runtime_error("SHA-256 finalisation failed");
    }
    return out;
  }

  std::string hex() {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned char b : digest()) {
      s.push_back(digits[b >> 4]);
      s.push_back(digits[b & 15]);
    }
    return s;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Content hash of everything a prepared dataset depends on.
inline std::string dataset_hash(const RunConfig& c) {
  Sha256 h;
  h.field("hicrec-dataset-v1");
  h.field(read_file_bytes(c.edges));
  h.field(read_file_bytes(c.interactions));
  h.field(c.schema.user_symbol);
  h.field(c.schema.item_symbol);
  for (const auto& t : c.schema.types) {
    h.field(t.symbol);
    h.field(std::to_string(t.pinned_count));
  }
  for (const auto& a : c.aspects) {
    h.field(a.name);
    h.field(a.user_path);
    h.field(a.item_path);
  }
  h.field(to_string(c.normalize));
  return h.hex();
}

/// Split and aspects, as produced by prepare and consumed by later commands.
struct PreparedData {
  InteractionSplit split;
  std::vector<Aspect> aspects;
  std::string hash;
  bool cache_hit = false;

  std::vector<const Aspect*> aspect_ptrs() const {
    std::vector<const Aspect*> out;
    for (const auto& a : aspects) out.push_back(&a);
    return out;
  }
};

namespace cache_detail {

inline constexpr char kMagic[8] = {'H', 'I', 'C', 'C', 'A', 'C', 'H', '1'};

inline void write_path(std::ostream& out, const MetaPath& p) {
  io::write_string(out, p.text);
  io::write_sizes(out, p.types);
}

inline MetaPath read_path(std::istream& in) {
  MetaPath p;
  p.text = io::read_string(in);
  p.types = io::read_sizes(in);
  return p;
}

inline std::string encode_split(const InteractionSplit& s) {
  std::ostringstream out;
  io::write_u64(out, s.num_users);
  io::write_u64(out, s.num_items);
  io::write_u64(out, s.skipped_users);
  for (const auto* pairs : {&s.train_pairs, &s.test_pairs}) {
    io::write_u64(out, pairs->size());
    for (const auto& p : *pairs) {
      io::write_u32(out, p.user);
      io::write_u32(out, p.item);
    }
  }
  return out.str();
}

inline InteractionSplit decode_split(const std::string& bytes) {
  std::istringstream in(bytes);
  InteractionSplit s;
  s.num_users = io::read_u64(in);
  s.num_items = io::read_u64(in);
  s.skipped_users = io::read_u64(in);
  s.train_items.resize(s.num_users);
  s.test_item.resize(s.num_users);
  for (auto* pairs : {&s.train_pairs, &s.test_pairs}) {
    const std::uint64_t n = io::read_u64(in);
    if (n > bytes.size()) throw DataError("corrupt split: pair count");
    for (std::uint64_t k = 0; k < n; ++k) {
      const NodeId u = io::read_u32(in);
      const NodeId i = io::read_u32(in);
      if (u >= s.num_users || i >= s.num_items) throw DataError("corrupt split: id out of range");
      pairs->push_back({u, i});
    }
  }
  for (const auto& p : s.train_pairs) s.train_items[p.user].push_back(p.item);
  for (auto& items : s.train_items) std::sort(items.begin(), items.end());
  for (const auto& p : s.test_pairs) s.test_item[p.user] = p.item;
  return s;
}

inline std::string encode_aspect(const Aspect& a) {
  std::ostringstream out;
  io::write_string(out, a.name);
  write_path(out, a.user_path);
  write_path(out, a.item_path);
  for (const auto* m : {&a.user_adj, &a.item_adj, &a.user_feat, &a.item_feat}) io::write_csr(out, *m);
  return out.str();
}

inline Aspect decode_aspect(const std::string& bytes) {
  std::istringstream in(bytes);
  Aspect a;
  a.name = io::read_string(in);
  a.user_path = read_path(in);
  a.item_path = read_path(in);
  for (auto* m : {&a.user_adj, &a.item_adj, &a.user_feat, &a.item_feat}) *m = io::read_csr(in);
  return a;
}

/// magic, dataset hash, payload, SHA-256 of the payload.
inline void write_bundle(const std::filesystem::path& path, const std::string& hash, const std::string& payload) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write cache file " + tmp);
    out.write(kMagic, sizeof kMagic);
    io::write_string(out, hash);
    io::write_string(out, payload);
    io::write_string(out, sha256_hex(payload));
    if (!out) throw DataError("write failed for cache file " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_bundle(const std::filesystem::path& path, const std::string& hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing cache file " + path.string());
  char magic[8];
  io::read_exact(in, magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kMagic)) throw DataError("bad magic in " + path.string());
  if (io::read_string(in) != hash) throw DataError("hash mismatch in " + path.string());
  std::string payload = io::read_string(in, std::size_t{1} << 34);
  if (io::read_string(in) != sha256_hex(payload)) throw DataError("checksum mismatch in " + path.string());
  return payload;
}

}  // namespace cache_detail

inline std::filesystem::path cache_dir_for(const RunConfig& c, const std::string& hash) {
  return c.cache_dir() / hash.substr(0, 16);
}

/// Loads the attribute relations and interactions and builds every aspect.
inline Dataset build_dataset(const RunConfig& c) {
  require_inputs(c);
  HinBuilder builder(c.schema);
  builder.add_edge_file(c.edges);
  const auto interactions = load_interactions(c.interactions, c.schema);
  return assemble_dataset(std::move(builder), interactions, c.aspects, c.normalize);
}

/// Reads a cached bundle set; throws DataError if anything is missing or corrupt.
inline PreparedData read_prepared(const RunConfig& c, const std::string& hash) {
  const auto dir = cache_dir_for(c, hash);
  PreparedData out;
  out.hash = hash;
  out.split = cache_detail::decode_split(cache_detail::read_bundle(dir / "split.bin", hash));
  for (std::size_t k = 0; k < c.aspects.size(); ++k) {
    out.aspects.push_back(
        cache_detail::decode_aspect(cache_detail::read_bundle(dir / ("aspect-" + std::to_string(k) + ".bin"), hash)));
    if (out.aspects.back().name != c.aspects[k].name) throw DataError("aspect order mismatch in cache");
  }
  out.cache_hit = true;
  return out;
}

/// Returns the cached dataset when its hash matches, otherwise rebuilds and
/// writes one split bundle plus one bundle per aspect.
inline PreparedData prepare(const RunConfig& c, std::ostream& log = std::cerr) {
  require_inputs(c);
  const std::string hash = dataset_hash(c);
  const auto dir = cache_dir_for(c, hash);
  if (std::filesystem::exists(dir / "split.bin")) {
    try {
      return read_prepared(c, hash);
    } catch (const DataError& e) {
      log << "warning: cache " << dir.string() << " is unusable (" << e.what() << "); rebuilding\n";
    }
  }
  Dataset ds = build_dataset(c);
  std::filesystem::create_directories(dir);
  cache_detail::write_bundle(dir / "split.bin", hash, cache_detail::encode_split(ds.split));
  for (std::size_t k = 0; k < ds.aspects.size(); ++k) {
    cache_detail::write_bundle(dir / ("aspect-" + std::to_string(k) + ".bin"), hash,
                               cache_detail::encode_aspect(ds.aspects[k]));
  }
  PreparedData out;
  out.split = std::move(ds.split);
  out.aspects = std::move(ds.aspects);
  out.hash = hash;
  return out;
}

/// Loads what prepare produced without building anything.
inline PreparedData load_prepared(const RunConfig& c) {
  require_inputs(c);
  const std::string hash = dataset_hash(c);
  if (!std::filesystem::exists(cache_dir_for(c, hash) / "split.bin")) {
    throw ConfigError("no prepared dataset for this config; run `hicrec prepare --config <path>` first");
  }
  try {
    return read_prepared(c, hash);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + "; rerun `hicrec prepare` to rebuild the cache");
  }
}

}  // namespace hicrec
