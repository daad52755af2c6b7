#include "plastic/train/metrics.hpp"

#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace plastic::train {

std::string format_row(const MetricRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%d,%llu,%.3f,%s",
                static_cast<long long>(row.step), row.loss_past, row.loss_online, row.delay,
                static_cast<unsigned long long>(row.seed), row.wall_ms, row.model.c_str());
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("metrics: cannot open " + path.string());
  if (fresh) out_ << kMetricsHeader << '\n';
}

void MetricsWriter::append(const MetricRow& row) {
  out_ << format_row(row) << '\n';
  out_.flush();
}

std::vector<MetricRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics: unexpected header in " + path.string());
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 7) throw std::runtime_error("metrics: malformed row '" + line + "'");
    MetricRow r;
    r.step = std::stoll(f[0]);
    r.loss_past = std::stod(f[1]);
    r.loss_online = std::stod(f[2]);
    r.delay = std::stoi(f[3]);
    r.seed = std::stoull(f[4]);
    r.wall_ms = std::stod(f[5]);
    r.model = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

double early_loss(const std::vector<MetricRow>& rows, std::int64_t window) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.step > window) break;
    sum += r.loss_past;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

double final_loss(const std::vector<MetricRow>& rows, std::int64_t window) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::int64_t cutoff = rows.back().step - window;
  double sum = 0.0;
  std::size_t n = 0;
  for (auto it = rows.rbegin(); it != rows.rend() && it->step > cutoff; ++it) {
    sum += it->loss_past;
    ++n;
  }
  return sum / static_cast<double>(n);
}

double best_trailing_loss(const std::vector<MetricRow>& rows, std::int64_t window) {
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t head = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sum += rows[i].loss_past;
    while (rows[head].step <= rows[i].step - window) sum -= rows[head++].loss_past;
    // Only full windows count.
    if (rows[i].step >= window) best = std::min(best, sum / static_cast<double>(i - head + 1));
  }
  return best;
}

}  // namespace plastic::train
