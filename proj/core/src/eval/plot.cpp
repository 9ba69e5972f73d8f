#include "atr/eval/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace atr::eval {

Image render_heatmap(const HeatmapGrid& g, const HeatmapStyle& style) {
  if (!(style.cap > 0.0)) throw std::invalid_argument("heatmap: cap must be positive");
  if (style.block < 1) throw std::invalid_argument("heatmap: block must be at least 1");
  Image img;
  img.width = g.nv * style.block;
  img.height = g.nw * style.block;
  img.rgb.assign(static_cast<std::size_t>(img.width * img.height * 3), 255);
  for (int iv = 0; iv < g.nv; ++iv) {
    for (int iw = 0; iw < g.nw; ++iw) {
      const CellResult& c = g.at(iv, iw);
      const double err = style.metric == HeatmapMetric::kForward ? c.rms_v : c.rms_w;
      double level = 1.0;
      if (c.evaluated && c.completed && std::isfinite(err)) level = std::min(err / style.cap, 1.0);
      const auto gray = static_cast<std::uint8_t>(std::lround(255.0 * level));
      const int row0 = (g.nw - 1 - iw) * style.block;
      const int col0 = iv * style.block;
      for (int r = row0; r < row0 + style.block; ++r) {
        for (int col = col0; col < col0 + style.block; ++col) {
          const auto p = static_cast<std::size_t>((r * img.width + col) * 3);
          img.rgb[p] = img.rgb[p + 1] = img.rgb[p + 2] = gray;
        }
      }
    }
  }
  return img;
}

void write_ppm(const Image& img, std::ostream& os) {
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.rgb.data()),
           static_cast<std::streamsize>(img.rgb.size()));
}

Image read_ppm(std::istream& is) {
  std::string magic;
  Image img;
  int maxval = 0;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || maxval != 255 || img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("ppm: expected a binary P6 image with maxval 255");
  is.get();
  img.rgb.resize(static_cast<std::size_t>(img.width * img.height * 3));
  is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!is) throw std::invalid_argument("ppm: truncated pixel data");
  return img;
}

namespace {

constexpr double kW = 720.0, kH = 420.0;
constexpr double kLeft = 70.0, kRight = 160.0, kTop = 20.0, kBottom = 50.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range range_of(const std::vector<double>& v, Range fallback) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (!(lo <= hi)) return fallback;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

class Svg {
 public:
  Svg(Range x, Range y, const std::string& x_label, const std::string& y_label)
      : x_(x), y_(y) {
    os_ << std::setprecision(6);
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
    os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    os_ << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    os_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n";
    os_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      os_ << "<line x1=\"" << px(fx) << "\" y1=\"" << y0 << "\" x2=\"" << px(fx) << "\" y2=\""
          << y0 + 5 << "\"/>\n";
      os_ << "<line x1=\"" << x0 - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << x0 << "\" y2=\""
          << py(fy) << "\"/>\n";
      os_ << "<text x=\"" << px(fx) << "\" y=\"" << y0 + 18 << "\" font-size=\"11\" "
          << "text-anchor=\"middle\" stroke=\"none\">" << fx << "</text>\n";
      os_ << "<text x=\"" << x0 - 8 << "\" y=\"" << py(fy) + 4 << "\" font-size=\"11\" "
          << "text-anchor=\"end\" stroke=\"none\">" << fy << "</text>\n";
    }
    os_ << "</g>\n";
    os_ << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kH - 10
        << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    os_ << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 16 " << (y0 + y1) / 2 << ")\">" << escape(y_label)
        << "</text>\n";
  }

  void polyline(const std::vector<double>& x, const std::vector<double>& y, const char* color) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
      os_ << px(x[i]) << ',' << py(y[i]) << ' ';
    }
    os_ << "\"/>\n";
  }

  void legend(int i, const std::string& name, const char* color) {
    const double x = kW - kRight + 15, y = kTop + 10 + 18 * i;
    os_ << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + 20 << "\" y2=\"" << y
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os_ << "<text x=\"" << x + 26 << "\" y=\"" << y + 4 << "\" font-size=\"11\">" << escape(name)
        << "</text>\n";
  }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  double px(double x) const {
    return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kW - kRight - kLeft);
  }
  double py(double y) const {
    return kH - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kH - kBottom - kTop);
  }

  Range x_, y_;
  std::ostringstream os_;
};

}  // namespace

std::string render_series_svg(const std::string& x_label, const std::vector<double>& x,
                              const std::vector<Series>& series) {
  std::vector<double> all;
  for (const auto& s : series) all.insert(all.end(), s.y.begin(), s.y.end());
  Svg svg(range_of(x, {0.0, 1.0}), range_of(all, {-1.0, 1.0}), x_label, "value");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg.polyline(x, series[i].y, color);
    svg.legend(static_cast<int>(i), series[i].name, color);
  }
  return svg.finish();
}

std::string render_area_svg(const std::vector<AreaPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.thresh_v);
    y.push_back(p.area);
  }
  Svg svg(range_of(x, {0.0, 1.0}), {0.0, 1.0}, "forward-velocity threshold (m/s)",
          "command area fraction");
  svg.polyline(x, y, kColors[0]);
  svg.legend(0, "area", kColors[0]);
  return svg.finish();
}

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "heatmap") return PlotKind::kHeatmap;
  if (s == "series") return PlotKind::kSeries;
  if (s == "area") return PlotKind::kArea;
  throw std::invalid_argument("unknown plot kind '" + s + "' (heatmap, series, area)");
}

namespace {

constexpr const char* kGridHeader = "c_v,c_w,rms_v,rms_w,completed,evaluated";
constexpr const char* kAreaHeader = "thresh_v,thresh_w,area";

std::string first_line(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw std::invalid_argument("cannot open " + p.string());
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void write_text(const std::filesystem::path& out, const std::string& s) {
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot write " + out.string());
  os << s;
}

}  // namespace

void plot_file(const std::filesystem::path& in, PlotKind kind, const std::filesystem::path& out,
               const HeatmapStyle& style) {
  const std::string header = first_line(in);
  std::ifstream is(in);
  switch (kind) {
    case PlotKind::kHeatmap: {
      if (header != kGridHeader)
        throw std::invalid_argument("heatmap needs a grid CSV with header '" +
                                    std::string(kGridHeader) + "', got '" + header + "'");
      const Image img = render_heatmap(read_grid_csv(is), style);
      std::ofstream os(out, std::ios::binary);
      if (!os) throw std::invalid_argument("cannot write " + out.string());
      write_ppm(img, os);
      return;
    }
    case PlotKind::kArea: {
      std::vector<AreaPoint> pts;
      if (header == kGridHeader) {
        std::vector<double> scales;
        for (int i = 1; i <= 30; ++i) scales.push_back(0.1 * i);
        pts = area_curve(read_grid_csv(is), scales);
      } else if (header == kAreaHeader) {
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
          if (line.empty() || line == "\r") continue;
          const auto f = split_csv(line);
          if (f.size() != 3) throw std::invalid_argument("area csv: expected 3 fields per row");
          pts.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
        }
      } else {
        throw std::invalid_argument("area plot needs a CSV with header '" +
                                    std::string(kAreaHeader) + "' or '" + kGridHeader +
                                    "', got '" + header + "'");
      }
      write_text(out, render_area_svg(pts));
      return;
    }
    case PlotKind::kSeries: {
      const auto names = split_csv(header);
      if (names.size() < 2 || names[0] != "t")
        throw std::invalid_argument("series plot needs a CSV whose first column is 't' (e.g. '" +
                                    std::string(kRolloutHeader) + "'), got '" + header + "'");
      std::vector<double> x;
      std::vector<Series> series;
      for (std::size_t i = 1; i < names.size(); ++i) series.push_back({names[i], {}});
      std::string line;
      std::getline(is, line);
      int lineno = 1;
      while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != names.size())
          throw std::invalid_argument("series csv line " + std::to_string(lineno) + ": expected " +
                                      std::to_string(names.size()) + " fields");
        x.push_back(std::stod(f[0]));
        for (std::size_t i = 1; i < f.size(); ++i) series[i - 1].y.push_back(std::stod(f[i]));
      }
      write_text(out, render_series_svg(names[0] + " (s)", x, series));
      return;
    }
  }
}

}  // namespace atr::eval
