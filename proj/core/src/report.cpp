#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "microorch/telemetry.hpp"

namespace microorch {

namespace {

double median_of_sorted(const std::vector<double>& values) {
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fmt(double value, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << std::fixed << value;
  std::string text = out.str();
  if (text.find('.') != std::string::npos) {
    while (text.back() == '0') text.pop_back();
    if (text.back() == '.') text.pop_back();
  }
  return text;
}

struct ChartSeries {
  std::string title;
  std::string unit;
  std::vector<std::pair<double, double>> points;
};

/// Step-after line chart: each value holds until the next sample.
std::string render_svg(const ChartSeries& series) {
  constexpr double kWidth = 720.0;
  constexpr double kHeight = 340.0;
  constexpr double kLeft = 64.0;
  constexpr double kRight = 24.0;
  constexpr double kTop = 36.0;
  constexpr double kBottom = 44.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double t_min = series.points.front().first;
  double t_max = series.points.back().first;
  if (t_max <= t_min) t_max = t_min + 1.0;
  double v_min = series.points.front().second;
  double v_max = v_min;
  for (const auto& [t, v] : series.points) {
    v_min = std::min(v_min, v);
    v_max = std::max(v_max, v);
  }
  if (v_min > 0.0) v_min = 0.0;
  if (v_max <= v_min) v_max = v_min + 1.0;
  v_max *= 1.05;

  auto x_at = [&](double t) { return kLeft + (t - t_min) / (t_max - t_min) * plot_w; };
  auto y_at = [&](double v) { return kTop + plot_h - (v - v_min) / (v_max - v_min) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "  <text x=\"" << kLeft << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">"
      << series.title << "</text>\n";

  constexpr int kTicks = 5;
  svg << "  <g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    double v = v_min + (v_max - v_min) * i / kTicks;
    double y = y_at(v);
    svg << "    <line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kWidth - kRight
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    svg << "    <text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << fmt(v, 2) << "</text>\n";
  }
  for (int i = 0; i <= kTicks; ++i) {
    double t = t_min + (t_max - t_min) * i / kTicks;
    double x = x_at(t);
    svg << "    <line x1=\"" << x << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << x << "\" y2=\""
        << kTop + plot_h + 5 << "\" stroke=\"#444\"/>\n";
    svg << "    <text x=\"" << x << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << fmt(t, 0) << "</text>\n";
  }
  svg << "    <text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">ts_ms</text>\n";
  svg << "    <text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << kTop + plot_h / 2 << ")\">" << series.unit
      << "</text>\n";
  svg << "  </g>\n";
  svg << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";

  svg << "  <path fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" d=\"";
  const auto& pts = series.points;
  svg << "M " << x_at(pts[0].first) << " " << y_at(pts[0].second);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    svg << " L " << x_at(pts[i].first) << " " << y_at(pts[i - 1].second);
    svg << " L " << x_at(pts[i].first) << " " << y_at(pts[i].second);
  }
  svg << "\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
  if (!out) throw TelemetryError(TelemetryErrc::Io, "cannot write " + path);
}

}  // namespace

Report analyze_samples(std::vector<TelemetrySample> samples, std::size_t corrupt_lines) {
  if (samples.empty()) {
    throw TelemetryError(TelemetryErrc::EmptyLog, "no telemetry samples to analyze");
  }
  Report report;
  report.samples = std::move(samples);
  report.corrupt_lines = corrupt_lines;
  report.t_begin_ms = report.samples.front().ts_ms;
  report.t_end_ms = report.samples.back().ts_ms;

  std::map<std::string, std::vector<std::pair<double, double>>> rail_series;
  std::vector<std::pair<double, double>> total_series;
  std::vector<double> mses;
  for (const auto& s : report.samples) {
    total_series.emplace_back(s.ts_ms, s.total_w);
    for (const auto& [id, watts] : s.rails) rail_series[id].emplace_back(s.ts_ms, watts);
    if (s.mse) mses.push_back(*s.mse);
    if (s.reconfig_ms > 0.0) {
      report.reconfig_count += 1;
      report.reconfig_total_ms += s.reconfig_ms;
    }
  }

  report.total_energy_j = energy_joules(total_series);
  for (auto& [id, series] : rail_series) {
    RailStats stats;
    stats.min_w = series.front().second;
    stats.max_w = series.front().second;
    double sum = 0.0;
    for (const auto& [t, w] : series) {
      stats.min_w = std::min(stats.min_w, w);
      stats.max_w = std::max(stats.max_w, w);
      sum += w;
    }
    stats.mean_w = sum / static_cast<double>(series.size());
    stats.energy_j = energy_joules(series);
    report.rails[id] = stats;
  }

  if (!mses.empty()) {
    std::sort(mses.begin(), mses.end());
    report.mse.count = mses.size();
    report.mse.min = mses.front();
    report.mse.max = mses.back();
    report.mse.median = median_of_sorted(mses);
    double sum = 0.0;
    for (double v : mses) sum += v;
    report.mse.mean = sum / static_cast<double>(mses.size());
  }
  return report;
}

Report analyze_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TelemetryError(TelemetryErrc::Io, "cannot open telemetry log: " + path);
  std::vector<TelemetrySample> samples;
  std::size_t corrupt = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json_line(line));
    } catch (const TelemetryError&) {
      corrupt += 1;
    }
  }
  return analyze_samples(std::move(samples), corrupt);
}

std::string report_text(const Report& report) {
  std::ostringstream out;
  out << "samples: " << report.samples.size();
  if (report.corrupt_lines > 0) out << " (skipped " << report.corrupt_lines << " corrupt lines)";
  out << "\n";
  out << "window: " << fmt(report.t_begin_ms, 3) << " ms .. " << fmt(report.t_end_ms, 3)
      << " ms\n";
  out << "total energy: " << fmt(report.total_energy_j, 6) << " J\n";
  out << "rails:\n";
  for (const auto& [id, stats] : report.rails) {
    out << "  " << id << ": min " << fmt(stats.min_w) << " W, mean " << fmt(stats.mean_w)
        << " W, max " << fmt(stats.max_w) << " W, energy " << fmt(stats.energy_j, 6) << " J\n";
  }
  if (report.mse.count > 0) {
    out << "mse (" << report.mse.count << " samples): min " << fmt(report.mse.min, 9)
        << ", median " << fmt(report.mse.median, 9) << ", mean " << fmt(report.mse.mean, 9)
        << ", max " << fmt(report.mse.max, 9) << "\n";
  } else {
    out << "mse: no fixed-point samples\n";
  }
  out << "reconfigurations: " << report.reconfig_count << " totaling "
      << fmt(report.reconfig_total_ms, 3) << " ms\n";
  return out.str();
}

void write_report_svgs(const Report& report, const std::string& dir) {
  ChartSeries total{"total power", "W", {}};
  ChartSeries exec{"execution time", "ms", {}};
  for (const auto& s : report.samples) {
    total.points.emplace_back(s.ts_ms, s.total_w);
    exec.points.emplace_back(s.ts_ms, s.exec_time_ms);
  }
  write_file(dir + "/total_w.svg", render_svg(total));
  write_file(dir + "/exec_time_ms.svg", render_svg(exec));
}

}  // namespace microorch
