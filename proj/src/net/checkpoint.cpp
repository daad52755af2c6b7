#include "plastic/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace plastic::net {
namespace {

constexpr char kMagic[8] = {'P', 'L', 'S', 'T', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& KvFile::text(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("checkpoint: missing key '" + key + "'");
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw std::runtime_error("checkpoint: key '" + key + "' is not text");
}

std::int64_t KvFile::integer(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("checkpoint: missing key '" + key + "'");
  if (auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
  throw std::runtime_error("checkpoint: key '" + key + "' is not an integer");
}

const ad::Matrix& KvFile::matrix(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("checkpoint: missing key '" + key + "'");
  if (auto* m = std::get_if<ad::Matrix>(&it->second)) return *m;
  throw std::runtime_error("checkpoint: key '" + key + "' is not a matrix");
}

std::vector<std::string> KvFile::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

std::string KvFile::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, entries_.size());
  for (const auto& [key, value] : entries_) {
    put_u32(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    if (const auto* s = std::get_if<std::string>(&value)) {
      out.push_back(0);
      put_u64(out, s->size());
      out += *s;
    } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
      out.push_back(1);
      put_u64(out, static_cast<std::uint64_t>(*i));
    } else {
      const auto& m = std::get<ad::Matrix>(value);
      out.push_back(2);
      put_u64(out, static_cast<std::uint64_t>(m.rows()));
      put_u64(out, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index k = 0; k < m.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[k]));
    }
  }
  return out;
}

KvFile KvFile::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const auto version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  KvFile kv;
  const auto n = r.u64();
  for (std::uint64_t e = 0; e < n; ++e) {
    std::string key = r.take(r.u32());
    switch (r.u8()) {
      case 0:
        kv.entries_[key] = r.take(r.u64());
        break;
      case 1:
        kv.entries_[key] = static_cast<std::int64_t>(r.u64());
        break;
      case 2: {
        const auto rows = r.u64();
        const auto cols = r.u64();
        ad::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = std::bit_cast<double>(r.u64());
        kv.entries_[key] = std::move(m);
        break;
      }
      default:
        throw std::runtime_error("checkpoint: unknown value type for key '" + key + "'");
    }
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return kv;
}

void KvFile::write(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + tmp);
    const auto bytes = serialize();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

KvFile KvFile::read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

void store_params(KvFile& kv, const std::string& prefix, const ad::MetaParams& meta) {
  for (std::size_t s = 0; s < meta.slots(); ++s) kv.set(prefix + meta.name(s), meta.value(s));
}

void load_params(const KvFile& kv, const std::string& prefix, ad::MetaParams& meta) {
  for (std::size_t s = 0; s < meta.slots(); ++s) {
    const auto& m = kv.matrix(prefix + meta.name(s));
    auto& dst = meta.value(s);
    if (m.rows() != dst.rows() || m.cols() != dst.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + meta.name(s) + "'");
    }
    dst = m;
  }
}

}  // namespace plastic::net
