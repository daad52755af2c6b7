#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "plastic/ad/meta_params.hpp"

namespace plastic::net {

// Self-describing key-value container written as
//
//   "PLSTCKPT" | u32 version | u64 entry count | entries...
//   entry: u32 key length | key bytes | u8 type | payload
//     type 0 text:    u64 length | bytes
//     type 1 integer: i64
//     type 2 matrix:  u64 rows | u64 cols | rows*cols f64, row-major
//
// All integers and floats are little-endian; doubles are stored bit-exact.
// Keys are kept sorted, so equal contents give identical bytes.
class KvFile {
 public:
  using Value = std::variant<std::string, std::int64_t, ad::Matrix>;
  static constexpr std::uint32_t kVersion = 1;

  void set(const std::string& key, Value v) { entries_[key] = std::move(v); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  const std::string& text(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  const ad::Matrix& matrix(const std::string& key) const;

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  const std::map<std::string, Value>& entries() const { return entries_; }

  std::string serialize() const;
  static KvFile deserialize(const std::string& bytes);

  void write(const std::filesystem::path& path) const;
  static KvFile read(const std::filesystem::path& path);

 private:
  std::map<std::string, Value> entries_;
};

// Stores every slot of `meta` under "<prefix><slot name>".
void store_params(KvFile& kv, const std::string& prefix, const ad::MetaParams& meta);
// Overwrites the values of existing slots; shapes must match.
void load_params(const KvFile& kv, const std::string& prefix, ad::MetaParams& meta);

}  // namespace plastic::net
