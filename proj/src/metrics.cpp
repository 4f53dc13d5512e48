#include "csac/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "csac/errors.hpp"

namespace csac {

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.step,
                r.eval_return_mean, r.eval_return_std, r.critic_loss_1, r.critic_loss_2,
                r.actor_loss, r.entropy_est, r.kl_est, r.wall_secs);
  out << buf;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ValidationError("metrics file " + path.string() + ": unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 9) throw ValidationError(where + ": expected 9 columns");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0') throw ValidationError(where + ": bad number '" + s + "'");
      return d;
    };
    MetricsRow r;
    char* end = nullptr;
    const unsigned long long step = std::strtoull(f[0].c_str(), &end, 10);
    if (f[0].empty() || *end != '\0') throw ValidationError(where + ": bad step '" + f[0] + "'");
    r.step = step;
    r.eval_return_mean = num(f[1]);
    r.eval_return_std = num(f[2]);
    r.critic_loss_1 = num(f[3]);
    r.critic_loss_2 = num(f[4]);
    r.actor_loss = num(f[5]);
    r.entropy_est = num(f[6]);
    r.kl_est = num(f[7]);
    r.wall_secs = num(f[8]);
    if (!rows.empty() && r.step <= rows.back().step) {
      throw ValidationError(where + ": steps must increase strictly");
    }
    rows.push_back(r);
  }
  return rows;
}

std::optional<std::size_t> steps_to_threshold(const std::vector<MetricsRow>& rows,
                                              double threshold) {
  for (const auto& r : rows) {
    if (r.eval_return_mean >= threshold) return r.step;
  }
  return std::nullopt;
}

}  // namespace csac
