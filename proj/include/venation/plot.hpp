#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "venation/errors.hpp"

// Minimal deterministic 2-D drawing: one Painter interface, a raster
// backend on OpenCV and an SVG text backend, plus XY chart scaffolding.
namespace venation::plot {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kGrey{150, 150, 150};
inline constexpr Color kLightGrey{225, 225, 225};

// Categorical palette: the ten strong colours first, then their light
// counterparts.
inline Color palette(std::size_t i) {
  static constexpr std::array<Color, 20> kColors{{
      {31, 119, 180},  {255, 127, 14},  {44, 160, 44},   {214, 39, 40},
      {148, 103, 189}, {140, 86, 75},   {227, 119, 194}, {127, 127, 127},
      {188, 189, 34},  {23, 190, 207},  {174, 199, 232}, {255, 187, 120},
      {152, 223, 138}, {255, 152, 150}, {197, 176, 213}, {196, 156, 148},
      {247, 182, 210}, {199, 199, 199}, {219, 219, 141}, {158, 218, 229},
  }};
  return kColors[i % kColors.size()];
}

// White -> dark blue ramp for t in [0, 1].
inline Color blues(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](double a, double b) {
    return static_cast<std::uint8_t>(std::lround(a + (b - a) * t));
  };
  return {mix(247, 8), mix(251, 48), mix(255, 107)};
}

struct Pt {
  double x = 0, y = 0;
};

enum class Anchor { start, middle, end };

class Painter {
 public:
  virtual ~Painter() = default;
  virtual void line(Pt a, Pt b, Color c, double width, bool dashed = false) = 0;
  virtual void polyline(const std::vector<Pt>& pts, Color c, double width) = 0;
  virtual void fill_rect(double x, double y, double w, double h, Color c) = 0;
  virtual void stroke_rect(double x, double y, double w, double h, Color c) = 0;
  // `y` is the text baseline; `size` the cap height in pixels.
  virtual void text(double x, double y, const std::string& s, double size, Color c,
                    Anchor anchor = Anchor::start) = 0;

  // Shared metric so both backends lay out identically.
  static double text_width(const std::string& s, double size) {
    int baseline = 0;
    const auto sz = cv::getTextSize(s, cv::FONT_HERSHEY_SIMPLEX, size / 22.0, 1, &baseline);
    return sz.width;
  }
};

class RasterPainter final : public Painter {
 public:
  RasterPainter(int width, int height) : img_(height, width, CV_8UC3, cv::Scalar(255, 255, 255)) {}

  void line(Pt a, Pt b, Color c, double width, bool dashed) override {
    if (!dashed) {
      cv::line(img_, px(a), px(b), bgr(c), thickness(width), cv::LINE_AA);
      return;
    }
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double dash = 6.0;
    for (double s = 0; s < len; s += 2 * dash) {
      const double e = std::min(len, s + dash);
      cv::line(img_, px(lerp(a, b, s / len)), px(lerp(a, b, e / len)), bgr(c),
               thickness(width), cv::LINE_AA);
    }
  }

  void polyline(const std::vector<Pt>& pts, Color c, double width) override {
    if (pts.size() < 2) return;
    std::vector<cv::Point> p;
    p.reserve(pts.size());
    for (const auto& q : pts) p.push_back(px(q));
    cv::polylines(img_, p, false, bgr(c), thickness(width), cv::LINE_AA);
  }

  void fill_rect(double x, double y, double w, double h, Color c) override {
    cv::rectangle(img_, cv::Point(r(x), r(y)), cv::Point(r(x + w) - 1, r(y + h) - 1), bgr(c),
                  cv::FILLED);
  }

  void stroke_rect(double x, double y, double w, double h, Color c) override {
    cv::rectangle(img_, cv::Point(r(x), r(y)), cv::Point(r(x + w), r(y + h)), bgr(c), 1);
  }

  void text(double x, double y, const std::string& s, double size, Color c,
            Anchor anchor) override {
    const double w = text_width(s, size);
    if (anchor == Anchor::middle) x -= w / 2;
    if (anchor == Anchor::end) x -= w;
    cv::putText(img_, s, cv::Point(r(x), r(y)), cv::FONT_HERSHEY_SIMPLEX, size / 22.0, bgr(c),
                1, cv::LINE_AA);
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img_, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
      throw Error("failed to write " + path.string());
    }
  }

 private:
  static int r(double v) { return static_cast<int>(std::lround(v)); }
  static cv::Point px(Pt p) { return {r(p.x), r(p.y)}; }
  static cv::Scalar bgr(Color c) { return {double(c.b), double(c.g), double(c.r)}; }
  static int thickness(double w) { return std::max(1, r(w)); }
  static Pt lerp(Pt a, Pt b, double t) { return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t}; }

  cv::Mat img_;
};

class SvgPainter final : public Painter {
 public:
  SvgPainter(int width, int height) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
         << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  }

  void line(Pt a, Pt b, Color c, double width, bool dashed) override {
    out_ << "<line x1=\"" << num(a.x) << "\" y1=\"" << num(a.y) << "\" x2=\"" << num(b.x)
         << "\" y2=\"" << num(b.y) << "\" stroke=\"" << hex(c) << "\" stroke-width=\""
         << num(width) << '"' << (dashed ? " stroke-dasharray=\"6 6\"" : "") << "/>\n";
  }

  void polyline(const std::vector<Pt>& pts, Color c, double width) override {
    if (pts.size() < 2) return;
    out_ << "<polyline fill=\"none\" stroke=\"" << hex(c) << "\" stroke-width=\"" << num(width)
         << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out_ << (i ? " " : "") << num(pts[i].x) << ',' << num(pts[i].y);
    }
    out_ << "\"/>\n";
  }

  void fill_rect(double x, double y, double w, double h, Color c) override {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"" << hex(c) << "\"/>\n";
  }

  void stroke_rect(double x, double y, double w, double h, Color c) override {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
         << "\" height=\"" << num(h) << "\" fill=\"none\" stroke=\"" << hex(c) << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size, Color c,
            Anchor anchor) override {
    static constexpr const char* kAnchor[] = {"start", "middle", "end"};
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y)
         << "\" font-family=\"Helvetica,Arial,sans-serif\" font-size=\"" << num(size * 1.4)
         << "\" text-anchor=\"" << kAnchor[static_cast<int>(anchor)] << "\" fill=\"" << hex(c)
         << "\">" << escape(s) << "</text>\n";
  }

  void save(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << out_.str() << "</svg>\n";
    if (!f) throw Error("failed to write " + path.string());
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  static std::string hex(Color c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
  }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char ch : s) {
      switch (ch) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += ch;
      }
    }
    return o;
  }

  std::ostringstream out_;
};

inline std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Tick positions covering [lo, hi] with a 1-2-5 step.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step) {
    t.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
  }
  return t;
}

struct Frame {
  double left = 0, top = 0, width = 0, height = 0;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  Pt map(double x, double y) const {
    return {left + (x - x_min) / (x_max - x_min) * width,
            top + height - (y - y_min) / (y_max - y_min) * height};
  }
  std::vector<Pt> map(const std::vector<Pt>& data) const {
    std::vector<Pt> out;
    out.reserve(data.size());
    for (const auto& p : data) out.push_back(map(p.x, p.y));
    return out;
  }
};

inline int tick_digits(const std::vector<double>& ticks) {
  if (ticks.size() < 2) return 1;
  const double step = ticks[1] - ticks[0];
  return step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
}

// Axes box, grid, ticks, labels and title.
inline void draw_axes(Painter& p, const Frame& f, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      std::vector<double> x_ticks = {}, std::vector<double> y_ticks = {},
                      bool y_scale = true) {
  if (x_ticks.empty()) x_ticks = nice_ticks(f.x_min, f.x_max);
  if (y_ticks.empty() && y_scale) y_ticks = nice_ticks(f.y_min, f.y_max);
  const int xd = tick_digits(x_ticks), yd = tick_digits(y_ticks);
  for (double t : x_ticks) {
    const auto a = f.map(t, f.y_min);
    p.line({a.x, f.top}, {a.x, f.top + f.height}, kLightGrey, 1);
    p.line(a, {a.x, a.y + 5}, kBlack, 1);
    p.text(a.x, a.y + 20, fixed(t, xd), 11, kBlack, Anchor::middle);
  }
  for (double t : y_ticks) {
    const auto a = f.map(f.x_min, t);
    p.line({f.left, a.y}, {f.left + f.width, a.y}, kLightGrey, 1);
    p.line({a.x - 5, a.y}, a, kBlack, 1);
    p.text(a.x - 8, a.y + 5, fixed(t, yd), 11, kBlack, Anchor::end);
  }
  p.stroke_rect(f.left, f.top, f.width, f.height, kBlack);
  p.text(f.left + f.width / 2, f.top - 24, title, 15, kBlack, Anchor::middle);
  p.text(f.left + f.width / 2, f.top + f.height + 44, x_label, 13, kBlack, Anchor::middle);
  p.text(f.left, f.top - 7, y_label, 11, kBlack, Anchor::start);
}

struct LegendEntry {
  std::string label;
  Color color;
  bool dashed = false;
};

// Boxed legend whose top-right corner sits at (right, top).
inline void draw_legend(Painter& p, double right, double top,
                        const std::vector<LegendEntry>& entries) {
  if (entries.empty()) return;
  double w = 0;
  for (const auto& e : entries) w = std::max(w, Painter::text_width(e.label, 11));
  w += 48;
  const double row = 17, h = row * entries.size() + 8;
  const double left = right - w;
  p.fill_rect(left, top, w, h, kWhite);
  p.stroke_rect(left, top, w, h, kGrey);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double y = top + 4 + row * (i + 0.5);
    p.line({left + 6, y}, {left + 30, y}, entries[i].color, 2, entries[i].dashed);
    p.text(left + 38, y + 5, entries[i].label, 11, kBlack);
  }
}

}  // namespace venation::plot
