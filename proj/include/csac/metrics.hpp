#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace csac {

inline constexpr const char* kMetricsHeader =
    "step,eval_return_mean,eval_return_std,critic_loss_1,critic_loss_2,actor_loss,entropy_est,"
    "kl_est,wall_secs";

/// One evaluation point. Loss and estimate columns average the updates since
/// the previous row.
struct MetricsRow {
  std::size_t step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double critic_loss_1 = 0.0;
  double critic_loss_2 = 0.0;
  double actor_loss = 0.0;
  double entropy_est = 0.0;
  double kl_est = 0.0;
  double wall_secs = 0.0;
};

void write_metrics_row(std::ostream& out, const MetricsRow& row);

/// Throws ValidationError on a wrong header, a malformed line or steps that
/// do not increase strictly.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

/// First row whose mean evaluation return reaches the threshold.
std::optional<std::size_t> steps_to_threshold(const std::vector<MetricsRow>& rows,
                                              double threshold);

}  // namespace csac
