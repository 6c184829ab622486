#pragma once

// Minimal SVG charts: lines, steps, scatter points and bars on linear axes.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vidplan/text.hpp"

namespace vidplan::cli {

enum class Style { Line, Step, Points, Bars };

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  Style style = Style::Line;
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
  std::vector<std::string> categories;  // x tick labels for bar charts

  std::string render() const;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return text::fixed(v, 2); }

inline std::string tick(double v) {
  const double a = std::abs(v);
  if (a != 0 && (a >= 1e5 || a < 1e-2)) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
  }
  return text::fixed(v, a >= 100 ? 0 : 2);
}

}  // namespace detail

inline std::string Plot::render() const {
  constexpr double W = 720, H = 440, L = 80, R = 170, T = 40, B = 60;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = 0.0, y1 = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const bool bars = std::any_of(series.begin(), series.end(), [](const Series& s) { return s.style == Style::Bars; });
  if (bars) x0 -= 0.5, x1 += 0.5;
  y1 += 0.05 * (y1 - y0);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  using detail::num;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' '
    << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(title)
    << "</text>\n";
  o << "<line x1=\"" << num(L) << "\" y1=\"" << num(H - B) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(H - B)
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(L) << "\" y1=\"" << num(T) << "\" x2=\"" << num(L) << "\" y2=\"" << num(H - B)
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double yv = y0 + (y1 - y0) * k / 5.0;
    o << "<text x=\"" << num(L - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << detail::tick(yv)
      << "</text>\n";
    o << "<line x1=\"" << num(L) << "\" y1=\"" << num(py(yv)) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(py(yv))
      << "\" stroke=\"#ddd\"/>\n";
  }
  if (!categories.empty()) {
    for (std::size_t k = 0; k < categories.size(); ++k) {
      o << "<text x=\"" << num(px(static_cast<double>(k))) << "\" y=\"" << num(H - B + 16) << "\" text-anchor=\"middle\">"
        << detail::escape(categories[k]) << "</text>\n";
    }
  } else {
    for (int k = 0; k <= 5; ++k) {
      const double xv = x0 + (x1 - x0) * k / 5.0;
      o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(H - B + 16) << "\" text-anchor=\"middle\">" << detail::tick(xv)
        << "</text>\n";
    }
  }
  o << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"" << num(H - 16) << "\" text-anchor=\"middle\">"
    << detail::escape(xlabel) << "</text>\n";
  o << "<text x=\"18\" y=\"" << num((T + H - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << num((T + H - B) / 2) << ")\">" << detail::escape(ylabel) << "</text>\n";
  const std::size_t n_bars =
      std::count_if(series.begin(), series.end(), [](const Series& s) { return s.style == Style::Bars; });
  std::size_t bar_slot = 0;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color = kColors[si % 8];
    if (s.style == Style::Line || s.style == Style::Step) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.points.size(); ++k) {
        const auto& [x, y] = s.points[k];
        if (s.style == Style::Step && k > 0) o << num(px(x)) << ',' << num(py(s.points[k - 1].second)) << ' ';
        o << num(px(x)) << ',' << num(py(y)) << ' ';
      }
      o << "\"/>\n";
    } else if (s.style == Style::Points) {
      for (const auto& [x, y] : s.points) {
        o << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"4\" fill=\"" << color << "\"/>\n";
      }
    } else {
      const double slot = (px(1) - px(0)) * 0.8 / static_cast<double>(n_bars);
      for (const auto& [x, y] : s.points) {
        const double left = px(x) - (px(1) - px(0)) * 0.4 + slot * static_cast<double>(bar_slot);
        o << "<rect x=\"" << num(left) << "\" y=\"" << num(py(std::max(y, 0.0))) << "\" width=\"" << num(slot)
          << "\" height=\"" << num(std::abs(py(y) - py(0))) << "\" fill=\"" << color << "\"/>\n";
      }
      ++bar_slot;
    }
    const double ly = T + 10 + 18 * static_cast<double>(si);
    o << "<rect x=\"" << num(W - R + 12) << "\" y=\"" << num(ly - 9) << "\" width=\"12\" height=\"12\" fill=\"" << color
      << "\"/>\n";
    o << "<text x=\"" << num(W - R + 30) << "\" y=\"" << num(ly + 1) << "\">" << detail::escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace vidplan::cli
