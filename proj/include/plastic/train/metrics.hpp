#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace plastic::train {

struct MetricRow {
  std::int64_t step = 0;
  double loss_past = 0.0;
  double loss_online = 0.0;
  int delay = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::string model;
};

inline constexpr const char* kMetricsHeader = "step,loss_past,loss_online,delay,seed,wall_ms,model";

std::string format_row(const MetricRow& row);

// Append-only CSV sink. Writes the header when the file is new or empty.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void append(const MetricRow& row);

 private:
  std::ofstream out_;
};

std::vector<MetricRow> read_metrics(const std::filesystem::path& path);

// Mean loss_past over rows with step <= window.
double early_loss(const std::vector<MetricRow>& rows, std::int64_t window);
// Mean loss_past over rows within `window` steps of the last row.
double final_loss(const std::vector<MetricRow>& rows, std::int64_t window);
// Smallest trailing-window mean of loss_past over the run.
double best_trailing_loss(const std::vector<MetricRow>& rows, std::int64_t window);

}  // namespace plastic::train
