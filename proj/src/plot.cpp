#include "amdcn/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

namespace amdcn {

namespace {

struct Rgb {
    unsigned char r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{20, 20, 20};
constexpr Rgb kGray{200, 200, 200};
constexpr Rgb kRed{200, 40, 40};    // aggregator on
constexpr Rgb kBlue{40, 80, 200};   // aggregator off

class Canvas {
public:
    Canvas(int w, int h) : w_(w), h_(h), pix_(static_cast<std::size_t>(w * h), kWhite) {}

    void set(int x, int y, Rgb c) {
        if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
        pix_[static_cast<std::size_t>(y * w_ + x)] = c;
    }

    void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y, c);
    }

    void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        int x = x0, y = y0;
        while (true) {
            const int t = thickness / 2;
            fill_rect(x - t, y - t, x + t, y + t, c);
            if (x == x1 && y == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y += sy;
            }
        }
    }

    void marker(int x, int y, Rgb c) { fill_rect(x - 3, y - 3, x + 3, y + 3, c); }

    // 5x7 bitmap glyphs, enough for axis labels and the legend
    void text(int x, int y, const std::string& s, Rgb c, int scale = 1);

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("plot: cannot open '" + path + "' for writing");
        f << "P6\n" << w_ << " " << h_ << "\n255\n";
        f.write(reinterpret_cast<const char*>(pix_.data()), static_cast<std::streamsize>(pix_.size() * 3));
        if (!f) throw DataError("plot: write to '" + path + "' failed");
    }

private:
    int w_, h_;
    std::vector<Rgb> pix_;
};

const std::map<char, std::array<unsigned char, 7>>& font() {
    // bits are left-to-right in the low 5 bits of each row byte
    static const std::map<char, std::array<unsigned char, 7>> glyphs = {
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
        {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
        {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
        {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
        {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
        {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
        {'f', {0x06, 0x08, 0x1C, 0x08, 0x08, 0x08, 0x08}},
        {'g', {0x00, 0x00, 0x0F, 0x11, 0x0F, 0x01, 0x0E}},
        {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'m', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x15, 0x15}},
        {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
        {'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
        {'s', {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E}},
        {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    };
    return glyphs;
}

void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
    int cx = x;
    for (char ch : s) {
        auto it = font().find(ch);
        if (it != font().end()) {
            for (int row = 0; row < 7; ++row)
                for (int col = 0; col < 5; ++col)
                    if (it->second[static_cast<std::size_t>(row)] & (1 << (4 - col))) {
                        fill_rect(cx + col * scale, y + row * scale, cx + col * scale + scale - 1,
                                  y + row * scale + scale - 1, c);
                    }
        }
        cx += 6 * scale;
    }
}

std::string short_num(scalar v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), v < 10 ? "%.2f" : "%.1f", v);
    return buf;
}

} // namespace

void write_ablation_plot(const std::string& path, const std::vector<AblationCell>& cells) {
    if (cells.empty()) throw DataError("plot: no ablation cells");
    const int W = 640, H = 420;
    const int left = 70, right = 24, top = 30, bottom = 50;
    Canvas canvas(W, H);

    scalar max_mae = 0.0;
    int max_cols = 1;
    for (const AblationCell& c : cells) {
        max_mae = std::max(max_mae, c.mae);
        max_cols = std::max(max_cols, c.columns);
    }
    if (max_mae <= 0.0) max_mae = 1.0;

    const int px0 = left, px1 = W - right, py0 = H - bottom, py1 = top;
    auto x_of = [&](int columns) {
        return px0 + (px1 - px0) * (columns - 1) / std::max(1, max_cols - 1);
    };
    auto y_of = [&](scalar mae) {
        return py0 - static_cast<int>(std::lround((py0 - py1) * (mae / (1.1 * max_mae))));
    };

    // gridlines + y tick labels
    for (int tick = 0; tick <= 4; ++tick) {
        const scalar v = 1.1 * max_mae * tick / 4.0;
        const int y = y_of(v);
        canvas.line(px0, y, px1, y, kGray);
        canvas.text(6, y - 3, short_num(v), kBlack);
    }
    // axes
    canvas.line(px0, py0, px1, py0, kBlack);
    canvas.line(px0, py0, px0, py1, kBlack);
    // x ticks
    for (int columns = 1; columns <= max_cols; ++columns) {
        const int x = x_of(columns);
        canvas.line(x, py0, x, py0 + 4, kBlack);
        canvas.text(x - 2, py0 + 8, std::to_string(columns), kBlack);
    }
    canvas.text((px0 + px1) / 2 - 24, H - 16, "columns", kBlack);
    canvas.text(6, 8, "mae", kBlack);

    for (const bool agg : {false, true}) {
        const Rgb color = agg ? kRed : kBlue;
        int prev_x = -1, prev_y = -1;
        for (const AblationCell& c : cells) {
            if (c.aggregator != agg) continue;
            const int x = x_of(c.columns), y = y_of(c.mae);
            if (prev_x >= 0) canvas.line(prev_x, prev_y, x, y, color, 3);
            canvas.marker(x, y, color);
            prev_x = x;
            prev_y = y;
        }
    }

    // legend
    canvas.fill_rect(px1 - 120, py1, px1 - 108, py1 + 12, kRed);
    canvas.text(px1 - 100, py1 + 3, "agg on", kBlack);
    canvas.fill_rect(px1 - 120, py1 + 18, px1 - 108, py1 + 30, kBlue);
    canvas.text(px1 - 100, py1 + 21, "agg off", kBlack);

    canvas.save(path);
}

} // namespace amdcn
