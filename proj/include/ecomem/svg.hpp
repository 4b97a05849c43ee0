#pragma once

// Static SVG 1.1 figures: memory-function panels and overlaid effect densities.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ecomem/diagnostics.hpp"

namespace ecomem::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

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

struct Frame {
  double x0, y0, w, h;  // plotting area in pixels
  double xmin, xmax, ymin, ymax;
  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

inline void axes(std::ostringstream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel, int xticks,
                 bool integer_x) {
  o << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w) << "\" height=\"" << num(f.h)
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= xticks; ++i) {
    double v = f.xmin + (f.xmax - f.xmin) * i / xticks;
    if (integer_x) v = std::round(v);
    o << "<text x=\"" << num(f.px(v)) << "\" y=\"" << num(f.y0 + f.h + 16) << "\" font-size=\"11\" text-anchor=\"middle\">"
      << tick(v) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double v = f.ymin + (f.ymax - f.ymin) * i / 4;
    o << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.py(v) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
      << tick(v) << "</text>\n";
  }
  o << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\"" << num(f.y0 + f.h + 34)
    << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  o << "<text x=\"" << num(f.x0 - 42) << "\" y=\"" << num(f.y0 + f.h / 2) << "\" font-size=\"12\" text-anchor=\"middle\" "
    << "transform=\"rotate(-90 " << num(f.x0 - 42) << ' ' << num(f.y0 + f.h / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

inline std::string points(const Frame& f, const std::vector<double>& x, const std::vector<double>& y) {
  std::string s;
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? " " : "") + num(f.px(x[i])) + "," + num(f.py(y[i]));
  return s;
}

}  // namespace detail

// One panel per memory function; truth (by covariate name) is overlaid when present.
inline std::string memory_plot(const std::vector<MemoryFunction>& functions,
                               const std::map<std::string, std::vector<double>>& truth = {}) {
  const double pw = 420, ph = 320;
  const double width = pw * std::max<std::size_t>(1, functions.size());
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << detail::num(width) << "\" height=\""
    << detail::num(ph) << "\" viewBox=\"0 0 " << detail::num(width) << ' ' << detail::num(ph) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < functions.size(); ++p) {
    const auto& f = functions[p];
    auto t = truth.find(f.name);
    double ymax = 0.0;
    for (double v : f.upper) ymax = std::max(ymax, v);
    if (t != truth.end())
      for (double v : t->second) ymax = std::max(ymax, v);
    ymax = std::max(ymax * 1.05, f.threshold * 2);
    const int L = f.max_lag();
    detail::Frame fr{pw * p + 60, 48, pw - 80, ph - 100, 0.0, static_cast<double>(std::max(L, 1)), 0.0, ymax};
    std::vector<double> lags(f.mean.size());
    for (std::size_t l = 0; l < lags.size(); ++l) lags[l] = static_cast<double>(l);

    o << "<g class=\"panel\" id=\"panel-" << detail::escape(f.name) << "\">\n";
    o << "<text x=\"" << detail::num(fr.x0 + fr.w / 2) << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
      << detail::escape(f.name) << "</text>\n";
    char sub[96];
    std::snprintf(sub, sizeof sub, "%g%% credible band, threshold %g", f.cred * 100.0, f.threshold);
    o << "<text class=\"subtitle\" x=\"" << detail::num(fr.x0 + fr.w / 2)
      << "\" y=\"36\" font-size=\"11\" text-anchor=\"middle\">" << sub << "</text>\n";
    detail::axes(o, fr, "lag", "weight", std::min(L, 10), true);

    std::vector<double> bx = lags, by = f.upper;
    for (std::size_t l = lags.size(); l-- > 0;) {
      bx.push_back(lags[l]);
      by.push_back(f.lower[l]);
    }
    o << "<polygon class=\"band\" points=\"" << detail::points(fr, bx, by) << "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>\n";
    o << "<line class=\"threshold\" x1=\"" << detail::num(fr.px(fr.xmin)) << "\" y1=\"" << detail::num(fr.py(f.threshold))
      << "\" x2=\"" << detail::num(fr.px(fr.xmax)) << "\" y2=\"" << detail::num(fr.py(f.threshold))
      << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    o << "<polyline class=\"mean\" points=\"" << detail::points(fr, lags, f.mean)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.6\"/>\n";
    if (t != truth.end() && t->second.size() == lags.size())
      o << "<polyline class=\"truth\" points=\"" << detail::points(fr, lags, t->second)
        << "\" fill=\"none\" stroke=\"darkred\" stroke-width=\"1.6\"/>\n";
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// Overlaid posterior densities of one coefficient with and without memory.
inline std::string effect_plot(const EffectComparison& cmp) {
  const double W = 520, H = 340;
  double lo = std::min(*std::min_element(cmp.memory.begin(), cmp.memory.end()),
                       *std::min_element(cmp.baseline.begin(), cmp.baseline.end()));
  double hi = std::max(*std::max_element(cmp.memory.begin(), cmp.memory.end()),
                       *std::max_element(cmp.baseline.begin(), cmp.baseline.end()));
  const double pad = 0.05 * std::max(hi - lo, 1e-6);
  lo -= pad;
  hi += pad;
  auto dm = kernel_density(cmp.memory, lo, hi);
  auto db = kernel_density(cmp.baseline, lo, hi);
  double ymax = 0.0;
  for (double v : dm.y) ymax = std::max(ymax, v);
  for (double v : db.y) ymax = std::max(ymax, v);
  ymax = ymax > 0 ? ymax * 1.05 : 1.0;
  detail::Frame fr{70, 40, W - 100, H - 100, lo, hi, 0.0, ymax};

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << detail::num(W) << "\" height=\""
    << detail::num(H) << "\" viewBox=\"0 0 " << detail::num(W) << ' ' << detail::num(H) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::num(W / 2) << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">Effect of "
    << detail::escape(cmp.term) << "</text>\n";
  detail::axes(o, fr, "coefficient", "density", 5, false);
  if (lo < 0.0 && hi > 0.0)
    o << "<line class=\"zero\" x1=\"" << detail::num(fr.px(0)) << "\" y1=\"" << detail::num(fr.y0) << "\" x2=\""
      << detail::num(fr.px(0)) << "\" y2=\"" << detail::num(fr.y0 + fr.h) << "\" stroke=\"#bbb\"/>\n";
  o << "<polyline class=\"density-memory\" points=\"" << detail::points(fr, dm.x, dm.y)
    << "\" fill=\"none\" stroke=\"darkred\" stroke-width=\"1.8\"/>\n";
  o << "<polyline class=\"density-baseline\" points=\"" << detail::points(fr, db.x, db.y)
    << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.8\" stroke-dasharray=\"5 3\"/>\n";
  o << "<text x=\"" << detail::num(fr.x0 + 8) << "\" y=\"" << detail::num(fr.y0 + 16)
    << "\" font-size=\"11\" fill=\"darkred\">memory</text>\n";
  o << "<text x=\"" << detail::num(fr.x0 + 8) << "\" y=\"" << detail::num(fr.y0 + 30)
    << "\" font-size=\"11\">no memory (lag 0)</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace ecomem::svg
