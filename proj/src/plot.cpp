#include "tyche/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tyche/png_io.hpp"

namespace tyche {

namespace {

// 5x7 column-encoded bitmap font, ASCII 0x20..0x5F (uppercase only).
const uint8_t kFont[][5] = {
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00},
    {0x00, 0x07, 0x00, 0x07, 0x00}, {0x14, 0x7F, 0x14, 0x7F, 0x14},
    {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00},
    {0x00, 0x1C, 0x22, 0x41, 0x00}, {0x00, 0x41, 0x22, 0x1C, 0x00},
    {0x08, 0x2A, 0x1C, 0x2A, 0x08}, {0x08, 0x08, 0x3E, 0x08, 0x08},
    {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08},
    {0x00, 0x60, 0x60, 0x00, 0x00}, {0x20, 0x10, 0x08, 0x04, 0x02},
    {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
    {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
    {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
    {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E},
    {0x00, 0x36, 0x36, 0x00, 0x00}, {0x00, 0x56, 0x36, 0x00, 0x00},
    {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x41, 0x22, 0x14, 0x08, 0x00}, {0x02, 0x01, 0x51, 0x09, 0x06},
    {0x32, 0x49, 0x79, 0x41, 0x3E}, {0x7E, 0x11, 0x11, 0x11, 0x7E},
    {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
    {0x7F, 0x41, 0x41, 0x22, 0x1C}, {0x7F, 0x49, 0x49, 0x49, 0x41},
    {0x7F, 0x09, 0x09, 0x09, 0x01}, {0x3E, 0x41, 0x49, 0x49, 0x7A},
    {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41},
    {0x7F, 0x40, 0x40, 0x40, 0x40}, {0x7F, 0x02, 0x0C, 0x02, 0x7F},
    {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
    {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E},
    {0x7F, 0x09, 0x19, 0x29, 0x46}, {0x46, 0x49, 0x49, 0x49, 0x31},
    {0x01, 0x01, 0x7F, 0x01, 0x01}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x7F, 0x20, 0x18, 0x20, 0x7F},
    {0x63, 0x14, 0x08, 0x14, 0x63}, {0x03, 0x04, 0x78, 0x04, 0x03},
    {0x61, 0x51, 0x49, 0x45, 0x43}, {0x00, 0x7F, 0x41, 0x41, 0x00},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x00, 0x41, 0x41, 0x7F, 0x00},
    {0x04, 0x02, 0x01, 0x02, 0x04}, {0x40, 0x40, 0x40, 0x40, 0x40},
};

struct Canvas {
    int h, w;
    std::vector<uint8_t> rgb;

    Canvas(int h_, int w_) : h(h_), w(w_), rgb(static_cast<size_t>(h_) * w_ * 3, 255) {}

    void set(int y, int x, const std::array<uint8_t, 3>& c) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        size_t o = (static_cast<size_t>(y) * w + x) * 3;
        rgb[o] = c[0];
        rgb[o + 1] = c[1];
        rgb[o + 2] = c[2];
    }

    void line(int y0, int x0, int y1, int x1, const std::array<uint8_t, 3>& c) {
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(y0, x0, c);
            if (x0 == x1 && y0 == y1) break;
            int e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    }

    void text(int y, int x, const std::string& s, const std::array<uint8_t, 3>& c) {
        for (char raw : s) {
            int ch = std::toupper(static_cast<unsigned char>(raw));
            if (ch < 0x20 || ch > 0x5F) ch = '?';
            const uint8_t* glyph = kFont[ch - 0x20];
            for (int col = 0; col < 5; ++col)
                for (int row = 0; row < 7; ++row)
                    if (glyph[col] >> row & 1) set(y + row, x + col, c);
            x += 6;
        }
    }

    void marker(int y, int x, const std::array<uint8_t, 3>& c) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) set(y + dy, x + dx, c);
    }
};

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

void render_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                      const std::string& title, int width, int height) {
    if (series.empty()) throw std::invalid_argument("render_line_plot: no series");

    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || (!s.ci.empty() && s.ci.size() != s.y.size()))
            throw std::invalid_argument("render_line_plot: series size mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            double lo = s.y[i] - (s.ci.empty() ? 0.0 : s.ci[i]);
            double hi = s.y[i] + (s.ci.empty() ? 0.0 : s.ci[i]);
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, lo);
            yhi = std::max(yhi, hi);
        }
    }
    if (xlo > xhi) throw std::invalid_argument("render_line_plot: empty series");
    if (xhi - xlo < 1e-12) { xlo -= 0.5; xhi += 0.5; }
    if (yhi - ylo < 1e-12) { ylo -= 0.05; yhi += 0.05; }
    double xpad = 0.05 * (xhi - xlo), ypad = 0.07 * (yhi - ylo);
    xlo -= xpad; xhi += xpad; ylo -= ypad; yhi += ypad;

    const int ml = 64, mr = 16, mt = 28, mb = 32;
    Canvas cv(height, width);
    const std::array<uint8_t, 3> black = {0, 0, 0}, gray = {205, 205, 205};

    auto px = [&](double x) {
        return ml + static_cast<int>(std::lround((x - xlo) / (xhi - xlo) * (width - ml - mr)));
    };
    auto py = [&](double y) {
        return height - mb -
               static_cast<int>(std::lround((y - ylo) / (yhi - ylo) * (height - mt - mb)));
    };

    const int nticks = 5;
    for (int t = 0; t <= nticks; ++t) {
        double xv = xlo + (xhi - xlo) * t / nticks;
        double yv = ylo + (yhi - ylo) * t / nticks;
        cv.line(py(yv), ml, py(yv), width - mr, gray);
        cv.line(mt, px(xv), height - mb, px(xv), gray);
        cv.text(height - mb + 8, px(xv) - 10, fmt_tick(xv), black);
        cv.text(py(yv) - 3, 8, fmt_tick(yv), black);
    }
    cv.line(height - mb, ml, height - mb, width - mr, black);
    cv.line(mt, ml, height - mb, ml, black);
    if (!title.empty()) cv.text(8, ml, title, black);

    int legend_y = mt + 6;
    for (const auto& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            int x = px(s.x[i]), y = py(s.y[i]);
            if (i > 0) cv.line(py(s.y[i - 1]), px(s.x[i - 1]), y, x, s.color);
            cv.marker(y, x, s.color);
            if (!s.ci.empty() && s.ci[i] > 0.0) {
                int yl = py(s.y[i] - s.ci[i]), yh = py(s.y[i] + s.ci[i]);
                cv.line(yh, x, yl, x, s.color);
                cv.line(yh, x - 3, yh, x + 3, s.color);
                cv.line(yl, x - 3, yl, x + 3, s.color);
            }
        }
        if (!s.name.empty()) {
            cv.line(legend_y + 3, width - mr - 110, legend_y + 3, width - mr - 96, s.color);
            cv.text(legend_y, width - mr - 92, s.name, black);
            legend_y += 11;
        }
    }

    write_rgb_png(path, height, width, cv.rgb);
}

}  // namespace tyche
