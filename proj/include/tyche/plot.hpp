#pragma once

#include <array>
#include <string>
#include <vector>

namespace tyche {

struct PlotSeries {
    std::vector<double> x, y;
    std::vector<double> ci;  // 95% half-widths; empty = no error bars
    std::array<uint8_t, 3> color = {31, 119, 180};
    std::string name;
};

// Minimal line plot with axes, numeric tick labels, and CI error bars,
// rendered straight to an RGB PNG.
void render_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                      const std::string& title = "", int width = 640, int height = 480);

}  // namespace tyche
