#include "report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "errors.hpp"

namespace cpcseq::eval {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;

const char* kPalette[] = {"#d95f02", "#1b9e77", "#7570b3", "#e7298a",
                          "#66a61e", "#e6ab02", "#a6761d"};

struct Series {
  std::string label;
  std::vector<double> x, median, lo, hi;
};

double map_x(double x, double x0, double x1) {
  if (x1 <= x0) return kLeft;
  return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
}

double map_y(double y, double y0, double y1) {
  if (y1 <= y0) return kHeight - kBottom;
  return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
}

std::string render_chart(const std::vector<Series>& series, const std::string& title,
                         const std::vector<std::pair<double, std::string>>& x_ticks,
                         const std::string& x_label, const std::string& y_label) {
  double x0 = 1e300, x1 = -1e300, y0 = 0.0, y1 = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) {
      x0 = std::min(x0, v);
      x1 = std::max(x1, v);
    }
    for (double v : s.hi) y1 = std::max(y1, v);
  }
  if (series.empty() || x1 < x0) {
    x0 = 0;
    x1 = 1;
  }
  y1 = std::max(y1 * 1.05, 0.1);

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
      << "font-family=\"sans-serif\">" << title << "</text>\n";

  // axes
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y0 + (y1 - y0) * i / 5.0;
    const double y = map_y(v, y0, y1);
    svg << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << static_cast<int>(v * 100 + 0.5) / 100.0 << "</text>\n";
  }
  for (const auto& [xv, label] : x_ticks) {
    const double x = map_x(xv, x0, x1);
    svg << "<line x1=\"" << x << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << x << "\" y2=\""
        << kHeight - kBottom + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << label
        << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
  svg << "<text x=\"14\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 14 " << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label
      << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (ser.x.size() > 1) {
      // min-max band
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i)
        svg << map_x(ser.x[i], x0, x1) << ',' << map_y(ser.hi[i], y0, y1) << ' ';
      for (std::size_t i = ser.x.size(); i-- > 0;)
        svg << map_x(ser.x[i], x0, x1) << ',' << map_y(ser.lo[i], y0, y1) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i)
      svg << map_x(ser.x[i], x0, x1) << ',' << map_y(ser.median[i], y0, y1) << ' ';
    svg << "\"/>\n";
    for (std::size_t i = 0; i < ser.x.size(); ++i)
      svg << "<circle cx=\"" << map_x(ser.x[i], x0, x1) << "\" cy=\""
          << map_y(ser.median[i], y0, y1) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    // legend
    const double ly = kTop + 16.0 * static_cast<double>(s);
    svg << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << ly - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << kWidth - kRight - 136 << "\" y=\"" << ly
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << ser.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::string sweep_svg(const SweepResult& result) {
  // group points by arm; x position is the point order within the group
  std::map<std::string, Series> by_group;
  std::vector<std::pair<double, std::string>> ticks;
  std::map<std::string, double> setting_x;
  for (const auto& p : result.points) {
    if (!setting_x.count(p.setting)) {
      const double x = static_cast<double>(setting_x.size());
      setting_x[p.setting] = x;
      ticks.emplace_back(x, p.setting);
    }
  }
  for (const auto& p : result.points) {
    Series& s = by_group[p.group.empty() ? "all" : p.group];
    s.label = p.group.empty() ? result.axis : p.group;
    s.x.push_back(setting_x.at(p.setting));
    s.median.push_back(p.median);
    s.lo.push_back(p.min);
    s.hi.push_back(p.max);
  }
  std::vector<Series> series;
  for (auto& [_, s] : by_group) series.push_back(std::move(s));
  return render_chart(series, "test mean F1 vs " + result.axis, ticks, result.axis,
                      "test mean F1");
}

std::string step_accuracy_svg(const SweepResult& result) {
  std::vector<Series> series;
  std::vector<std::pair<double, std::string>> ticks;
  std::size_t max_steps = 0;
  for (const auto& p : result.points) {
    if (!p.extra.contains("per_seed_step_accuracy")) continue;
    const auto& per_seed = p.extra.at("per_seed_step_accuracy");
    if (per_seed.empty() || per_seed[0].is_null()) continue;
    const std::size_t steps = per_seed[0].size();
    max_steps = std::max(max_steps, steps);
    Series s;
    s.label = p.setting;
    for (std::size_t j = 0; j < steps; ++j) {
      std::vector<double> vals;
      for (const auto& seed_acc : per_seed)
        if (!seed_acc.is_null() && j < seed_acc.size()) vals.push_back(seed_acc[j].get<double>());
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      s.x.push_back(static_cast<double>(j + 1));
      s.median.push_back(vals.size() % 2 == 1
                             ? vals[vals.size() / 2]
                             : 0.5 * (vals[vals.size() / 2 - 1] + vals[vals.size() / 2]));
      s.lo.push_back(vals.front());
      s.hi.push_back(vals.back());
    }
    series.push_back(std::move(s));
  }
  for (std::size_t j = 1; j <= max_steps; ++j)
    ticks.emplace_back(static_cast<double>(j), std::to_string(j));
  return render_chart(series, "pretext accuracy per future step", ticks, "future step",
                      "accuracy");
}

}  // namespace cpcseq::eval
