#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace roi10d {

// Minimal line-plot writer: fixed viewport, linear axes, one polyline per
// series plus a light frame and axis labels. Enough for loss curves and
// precision-recall plots without a plotting dependency.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& name, const std::vector<double>& xs,
                  const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::domain_error("svg plot: series size mismatch");
    if (xs.empty()) return;
    series_.push_back({name, xs, ys});
  }

  // Pin the y range (e.g. [0, 1] for precision); otherwise data bounds rule.
  void set_y_range(double lo, double hi) {
    y_lo_ = lo;
    y_hi_ = hi;
    fixed_y_ = true;
  }

  void set_log_y(bool log_y) { log_y_ = log_y; }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << render();
    if (!out) throw std::runtime_error("short write: " + path);
  }

  std::string render() const {
    const double width = 860, height = 520;
    const double ml = 70, mr = 160, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = fixed_y_ ? y_lo_ : std::numeric_limits<double>::infinity();
    double y_hi = fixed_y_ ? y_hi_ : -std::numeric_limits<double>::infinity();
    for (const auto& s : series_) {
      for (double x : s.xs) {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
      }
      if (!fixed_y_)
        for (double y : s.ys) {
          const double yy = transform_y(y);
          if (!std::isfinite(yy)) continue;
          y_lo = std::min(y_lo, yy);
          y_hi = std::max(y_hi, yy);
        }
    }
    if (series_.empty() || !std::isfinite(x_lo)) {
      x_lo = 0;
      x_hi = 1;
    }
    if (!std::isfinite(y_lo) || !std::isfinite(y_hi)) {
      y_lo = 0;
      y_hi = 1;
    }
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;

    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double y) { return mt + ph - (transform_y(y) - y_lo) / (y_hi - y_lo) * ph; };

    std::string svg;
    char buf[512];
    auto emit = [&](const char* fmt, auto... args) {
      std::snprintf(buf, sizeof(buf), fmt, args...);
      svg += buf;
    };

    emit("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
         "viewBox=\"0 0 %.0f %.0f\">\n", width, height, width, height);
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    emit("<text x=\"%.0f\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
         "text-anchor=\"middle\">%s</text>\n", ml + pw / 2, title_.c_str());
    emit("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
         "stroke=\"#888\"/>\n", ml, mt, pw, ph);
    emit("<text x=\"%.0f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\">%s</text>\n", ml + pw / 2, height - 12, x_label_.c_str());
    emit("<text x=\"16\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 16 %.0f)\">%s%s</text>\n",
         mt + ph / 2, mt + ph / 2, y_label_.c_str(), log_y_ ? " (log10)" : "");

    for (int g = 0; g <= 4; ++g) {
      const double gx = x_lo + (x_hi - x_lo) * g / 4.0;
      const double gy = y_lo + (y_hi - y_lo) * g / 4.0;
      emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#eee\"/>\n",
           px(gx), mt, px(gx), mt + ph);
      emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#eee\"/>\n",
           ml, mt + ph - (gy - y_lo) / (y_hi - y_lo) * ph, ml + pw,
           mt + ph - (gy - y_lo) / (y_hi - y_lo) * ph);
      emit("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" "
           "text-anchor=\"middle\">%.3g</text>\n", px(gx), mt + ph + 16, gx);
      emit("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" "
           "text-anchor=\"end\">%.3g</text>\n", ml - 6,
           mt + ph - (gy - y_lo) / (y_hi - y_lo) * ph + 4, gy);
    }

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    for (std::size_t s = 0; s < series_.size(); ++s) {
      const char* color = kColors[s % 8];
      std::string points;
      for (std::size_t i = 0; i < series_[s].xs.size(); ++i) {
        if (!std::isfinite(transform_y(series_[s].ys[i]))) continue;
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(series_[s].xs[i]),
                      py(series_[s].ys[i]));
        points += buf;
      }
      emit("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"%s\"/>\n",
           color, points.c_str());
      emit("<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" "
           "stroke-width=\"3\"/>\n", ml + pw + 12, mt + 16.0 * s + 8, ml + pw + 34,
           mt + 16.0 * s + 8, color);
      emit("<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\">%s"
           "</text>\n", ml + pw + 40, mt + 16.0 * s + 12, series_[s].name.c_str());
    }
    svg += "</svg>\n";
    return svg;
  }

  std::size_t series_count() const { return series_.size(); }
  std::size_t point_count(std::size_t s) const { return series_.at(s).xs.size(); }

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };

  double transform_y(double y) const { return log_y_ ? std::log10(std::max(y, 1e-300)) : y; }

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  bool fixed_y_ = false, log_y_ = false;
  double y_lo_ = 0.0, y_hi_ = 1.0;
};

}  // namespace roi10d
