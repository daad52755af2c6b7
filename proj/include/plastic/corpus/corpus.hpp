#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace plastic::corpus {

inline constexpr int kAlphabetSize = 27;
inline constexpr int kOtherSymbol = 26;

// Letters a-z (either case) map to 0-25; every other byte, including bytes
// >= 128, maps to 26.
int symbol_of(unsigned char c);
char char_of(int symbol);  // 26 renders as ' '

// Immutable symbol sequence read with wraparound.
class SymbolStream {
 public:
  explicit SymbolStream(std::vector<std::uint8_t> symbols);

  std::size_t size() const { return symbols_.size(); }
  int at(std::int64_t position) const;  // position >= 0, taken modulo size()
  const std::vector<std::uint8_t>& symbols() const { return symbols_; }

 private:
  std::vector<std::uint8_t> symbols_;
};

// Throws std::invalid_argument on empty input.
SymbolStream load_corpus(std::string_view text);
SymbolStream load_corpus_file(const std::filesystem::path& path);

std::string render(const SymbolStream& stream);

struct Window {
  std::vector<int> inputs;   // previous symbol per step, -1 before position 0
  std::vector<int> targets;  // symbols at t0 .. t0 + length - 1
};

Window window(const SymbolStream& stream, std::int64_t start, int length);

std::array<std::size_t, kAlphabetSize> histogram(const SymbolStream& stream);

}  // namespace plastic::corpus
