#include "plastic/corpus/corpus.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace plastic::corpus {

int symbol_of(unsigned char c) {
  if (c >= 'a' && c <= 'z') return c - 'a';
  if (c >= 'A' && c <= 'Z') return c - 'A';
  return kOtherSymbol;
}

char char_of(int symbol) {
  if (symbol >= 0 && symbol < kOtherSymbol) return static_cast<char>('a' + symbol);
  return ' ';
}

SymbolStream::SymbolStream(std::vector<std::uint8_t> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw std::invalid_argument("corpus: empty symbol stream");
}

int SymbolStream::at(std::int64_t position) const {
  if (position < 0) throw std::out_of_range("corpus: negative position");
  return symbols_[static_cast<std::size_t>(position % static_cast<std::int64_t>(symbols_.size()))];
}

SymbolStream load_corpus(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("corpus: empty input text");
  std::vector<std::uint8_t> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<std::uint8_t>(symbol_of(static_cast<unsigned char>(c))));
  return SymbolStream(std::move(out));
}

SymbolStream load_corpus_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("corpus: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_corpus(ss.str());
}

std::string render(const SymbolStream& stream) {
  std::string s;
  s.reserve(stream.size());
  for (auto sym : stream.symbols()) s.push_back(char_of(sym));
  return s;
}

Window window(const SymbolStream& stream, std::int64_t start, int length) {
  if (length < 1) throw std::invalid_argument("corpus: window length must be >= 1");
  Window w;
  w.inputs.reserve(static_cast<std::size_t>(length));
  w.targets.reserve(static_cast<std::size_t>(length));
  for (int k = 0; k < length; ++k) {
    const std::int64_t pos = start + k;
    w.targets.push_back(stream.at(pos));
    w.inputs.push_back(pos == 0 ? -1 : stream.at(pos - 1));
  }
  return w;
}

std::array<std::size_t, kAlphabetSize> histogram(const SymbolStream& stream) {
  std::array<std::size_t, kAlphabetSize> h{};
  for (auto s : stream.symbols()) ++h[s];
  return h;
}

}  // namespace plastic::corpus
