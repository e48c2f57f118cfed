#include "lanedrop/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lanedrop::svg {

namespace {

struct Rgb {
  int r, g, b;
};

// blue -> cyan -> green -> yellow -> red
Rgb ramp(double u) {
  u = std::clamp(u, 0.0, 1.0);
  static const Rgb stops[] = {{13, 8, 135}, {70, 160, 246}, {32, 201, 151},
                              {253, 231, 37}, {220, 50, 32}};
  const double x = u * 4.0;
  const int i = std::min(3, static_cast<int>(x));
  const double f = x - i;
  return Rgb{static_cast<int>(stops[i].r + f * (stops[i + 1].r - stops[i].r)),
             static_cast<int>(stops[i].g + f * (stops[i + 1].g - stops[i].g)),
             static_cast<int>(stops[i].b + f * (stops[i + 1].b - stops[i].b))};
}

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

}  // namespace

void write_heatmap(const std::filesystem::path& path, const metrics::Grid& grid,
                   const HeatmapStyle& style) {
  const int nt = grid.spec.nt();
  const int nx = grid.spec.nx();
  double vmin = style.vmin, vmax = style.vmax;
  if (!(vmax > vmin)) {
    vmin = grid.values.empty() ? 0.0 : *std::min_element(grid.values.begin(), grid.values.end());
    vmax = grid.values.empty() ? 1.0 : *std::max_element(grid.values.begin(), grid.values.end());
    if (vmax <= vmin) vmax = vmin + 1.0;
  }

  const int cell = std::max(1, style.cell_px);
  const int margin_l = 70, margin_b = 46, margin_t = 30, margin_r = 86;
  const int plot_w = nt * cell, plot_h = nx * cell;
  const int width = margin_l + plot_w + margin_r;
  const int height = margin_t + plot_h + margin_b;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_heatmap: cannot open " + path.string());
  out << fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
             "viewBox=\"0 0 %d %d\">\n",
             width, height, width, height);
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << fmt("<text x=\"%d\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">%s</text>\n",
             margin_l, style.title.c_str());

  for (int it = 0; it < nt; ++it) {
    for (int ix = 0; ix < nx; ++ix) {
      const double v = grid.at(it, ix);
      const Rgb c = ramp((v - vmin) / (vmax - vmin));
      const int x = margin_l + it * cell;
      const int y = margin_t + (nx - 1 - ix) * cell;  // distance grows upward
      out << fmt("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,%d)\"/>\n",
                 x, y, cell, cell, c.r, c.g, c.b);
    }
  }

  // axes labels
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">t = %.0f s</text>\n",
             margin_l, margin_t + plot_h + 16, grid.spec.t0);
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"end\">%.0f s</text>\n",
             margin_l + plot_w, margin_t + plot_h + 16, grid.spec.t1);
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"end\">%.0f ft</text>\n",
             margin_l - 6, margin_t + 12, grid.spec.x1);
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\" "
             "text-anchor=\"end\">%.0f ft</text>\n",
             margin_l - 6, margin_t + plot_h, grid.spec.x0);

  // color bar
  const int bar_x = margin_l + plot_w + 18, bar_w = 14;
  const int bar_steps = 32;
  for (int i = 0; i < bar_steps; ++i) {
    const Rgb c = ramp(1.0 - static_cast<double>(i) / (bar_steps - 1));
    out << fmt("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,%d)\"/>\n",
               bar_x, margin_t + i * plot_h / bar_steps, bar_w,
               plot_h / bar_steps + 1, c.r, c.g, c.b);
  }
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%.3g</text>\n",
             bar_x + bar_w + 4, margin_t + 10, vmax);
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%.3g</text>\n",
             bar_x + bar_w + 4, margin_t + plot_h, vmin);
  out << fmt("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"10\">%s</text>\n",
             bar_x - 4, margin_t - 8, style.value_label.c_str());
  out << "</svg>\n";
}

}  // namespace lanedrop::svg
