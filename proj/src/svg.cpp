#include "ikkt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ikkt {

namespace {

constexpr double kW = 480, kH = 480, kPad = 48;

struct Frame {
  double x0, x1, y0, y1;  // data range
  double w = kW, h = kH;

  double px(double x) const { return kPad + (x - x0) / (x1 - x0) * (w - 2 * kPad); }
  double py(double y) const { return h - kPad - (y - y0) / (y1 - y0) * (h - 2 * kPad); }
};

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

void open(std::ostringstream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h
     << "\" viewBox=\"0 0 " << f.w << ' ' << f.h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << f.w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xl, const std::string& yl) {
  os << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << f.w - 2 * kPad
     << "\" height=\"" << f.h - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0, y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << f2(f.px(x)) << "\" y=\"" << f.h - kPad + 14 << "\" text-anchor=\"middle\">"
       << tick(x) << "</text>\n";
    os << "<text x=\"" << kPad - 4 << "\" y=\"" << f2(f.py(y) + 4) << "\" text-anchor=\"end\">"
       << tick(y) << "</text>\n";
  }
  os << "<text x=\"" << f.w / 2 << "\" y=\"" << f.h - 10 << "\" text-anchor=\"middle\">" << xl
     << "</text>\n";
  os << "<text x=\"12\" y=\"" << f.h / 2 << "\" transform=\"rotate(-90 12 " << f.h / 2
     << ")\" text-anchor=\"middle\">" << yl << "</text>\n";
}

void rect(std::ostringstream& os, const Frame& f, const BoxConstraint& b, const char* style) {
  if (b.nw() < 2) return;
  os << "<rect x=\"" << f2(f.px(b.lb(0))) << "\" y=\"" << f2(f.py(b.ub(1))) << "\" width=\""
     << f2(f.px(b.ub(0)) - f.px(b.lb(0))) << "\" height=\"" << f2(f.py(b.lb(1)) - f.py(b.ub(1)))
     << "\" " << style << "/>\n";
}

}  // namespace

std::string svg_overlay(const std::vector<Trajectory>& demos, const std::vector<BoxConstraint>& truth,
                        const std::vector<BoxConstraint>& recovered, const std::string& title) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Frame f{inf, -inf, inf, -inf};
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    f.x0 = std::min(f.x0, x);
    f.x1 = std::max(f.x1, x);
    f.y0 = std::min(f.y0, y);
    f.y1 = std::max(f.y1, y);
  };
  for (const auto& t : demos)
    for (int k = 0; k < t.length(); ++k) grow(t.states(k, 0), t.states(k, 1));
  for (const auto* set : {&truth, &recovered})
    for (const auto& b : *set)
      if (b.nw() >= 2) {
        grow(b.lb(0), b.lb(1));
        grow(b.ub(0), b.ub(1));
      }
  if (!std::isfinite(f.x0)) f = {0, 1, 0, 1};
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);

  std::ostringstream os;
  open(os, f, title);
  axes(os, f, "x1", "x2");
  for (const auto& b : truth) rect(os, f, b, "fill=\"#bbbbbb\" stroke=\"#888888\"");
  for (const auto& t : demos) {
    os << "<polyline fill=\"none\" stroke=\"#666666\" stroke-width=\"1.2\" points=\"";
    for (int k = 0; k < t.length(); ++k)
      os << f2(f.px(t.states(k, 0))) << ',' << f2(f.py(t.states(k, 1))) << ' ';
    os << "\"/>\n";
  }
  for (const auto& b : recovered)
    rect(os, f, b, "fill=\"none\" stroke=\"red\" stroke-width=\"2\" stroke-dasharray=\"6 4\"");
  os << "</svg>\n";
  return os.str();
}

std::string svg_trace(const Segmentation& seg, int demo, const std::string& title) {
  const auto& d = seg.demos.at(demo);
  Frame f{0, 1, 0, 1, 640, 320};
  if (!d.estimates.empty()) {
    f.x0 = d.estimates.front().j;
    f.x1 = d.estimates.back().j;
    f.y0 = f.y1 = d.estimates.front().trace_omega;
    for (const auto& e : d.estimates) {
      f.y0 = std::min(f.y0, e.trace_omega);
      f.y1 = std::max(f.y1, e.trace_omega);
    }
  }
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::ostringstream os;
  open(os, f, title);
  axes(os, f, "window start j", "trace(Omega)");
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" points=\"";
  for (const auto& e : d.estimates) os << f2(f.px(e.j)) << ',' << f2(f.py(e.trace_omega)) << ' ';
  os << "\"/>\n";
  for (size_t i = 0; i < d.estimates.size(); ++i) {
    const bool out =
        std::find(d.outlier_windows.begin(), d.outlier_windows.end(), static_cast<int>(i)) !=
        d.outlier_windows.end();
    const auto& e = d.estimates[i];
    os << "<circle cx=\"" << f2(f.px(e.j)) << "\" cy=\"" << f2(f.py(e.trace_omega)) << "\" r=\""
       << (out ? 4 : 2) << "\" fill=\"" << (out ? "red" : "#1f77b4") << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_sweep(const SweepTable& t) {
  const int n = static_cast<int>(t.rows.size());
  Frame f{-0.5, std::max(0.5, n - 0.5), 0.0, 1.05, 640, 360};
  std::ostringstream os;
  open(os, f, "IoU and convergence per sigma");
  os << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << f.w - 2 * kPad
     << "\" height=\"" << f.h - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double bw = 0.6 * (f.px(1) - f.px(0));
  for (int i = 0; i < n; ++i) {
    const auto& r = t.rows[i];
    const double top = f.py(r.conv_pct / 100.0);
    os << "<rect x=\"" << f2(f.px(i) - bw / 2) << "\" y=\"" << f2(top) << "\" width=\"" << f2(bw)
       << "\" height=\"" << f2(f.py(0) - top) << "\" fill=\"#cccccc\"/>\n";
    os << "<text x=\"" << f2(f.px(i)) << "\" y=\"" << f.h - kPad + 14 << "\" text-anchor=\"middle\">"
       << (r.learned ? std::string("learned") : tick(r.sigma)) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i)
    os << "<text x=\"" << kPad - 4 << "\" y=\"" << f2(f.py(i / 4.0) + 4) << "\" text-anchor=\"end\">"
       << tick(i / 4.0) << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"";
  for (int i = 0; i < n; ++i) os << f2(f.px(i)) << ',' << f2(f.py(t.rows[i].metrics.iou)) << ' ';
  os << "\"/>\n";
  os << "<text x=\"" << f.w / 2 << "\" y=\"" << f.h - 10
     << "\" text-anchor=\"middle\">sigma (bars: converged fraction, line: IoU)</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace ikkt
