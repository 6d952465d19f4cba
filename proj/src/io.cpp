#include "amdcn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace amdcn {
namespace io {

namespace fs = std::filesystem;

namespace {

int pgm_read_token(std::istream& in) {
    // skips whitespace and '#' comments per the netpbm grammar
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw DataError("pgm: unexpected end of header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

} // namespace

Tensor read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("pgm: cannot open '" + path + "'");
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '2')) {
        throw DataError("pgm: '" + path + "' is not a P5/P2 grayscale image");
    }
    const bool binary = (m1 == '5');
    const int w = pgm_read_token(f);
    const int h = pgm_read_token(f);
    const int maxval = pgm_read_token(f);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
        throw DataError("pgm: bad header in '" + path + "'");
    }
    Tensor image({1, h, w});
    if (binary) {
        std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!f) throw DataError("pgm: truncated pixel data in '" + path + "'");
        for (std::size_t i = 0; i < raw.size(); ++i) {
            image[static_cast<std::int64_t>(i)] = static_cast<scalar>(raw[i]) / maxval;
        }
    } else {
        for (std::int64_t i = 0; i < image.numel(); ++i) {
            image[i] = static_cast<scalar>(pgm_read_token(f)) / maxval;
        }
    }
    return image;
}

void write_pgm(const std::string& path, const Tensor& image) {
    std::int64_t h = 0, w = 0;
    if (image.rank() == 2) {
        h = image.dim(0);
        w = image.dim(1);
    } else if (image.rank() == 3 && image.dim(0) == 1) {
        h = image.dim(1);
        w = image.dim(2);
    } else {
        throw ShapeError("pgm: expected [H,W] or [1,H,W], got " + image.shape_str());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("pgm: cannot open '" + path + "' for writing");
    f << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        const scalar v = std::clamp(image[i], 0.0, 1.0);
        raw[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw DataError("pgm: write to '" + path + "' failed");
}

PointAnnotations read_annotations(const std::string& path, std::int64_t height, std::int64_t width) {
    std::ifstream f(path);
    if (!f) throw DataError("annotations: cannot open '" + path + "'");
    PointAnnotations ann;
    ann.height = height;
    ann.width = width;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        scalar x = 0, y = 0;
        char comma = 0;
        std::istringstream ss(line);
        if (!(ss >> x >> comma >> y) || comma != ',') {
            throw DataError("annotations: '" + path + "' line " + std::to_string(lineno) +
                            ": expected `x,y`, got '" + line + "'");
        }
        ann.points.push_back({x, y});
    }
    validate_annotations(ann);
    return ann;
}

void write_annotations(const std::string& path, const PointAnnotations& ann) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("annotations: cannot open '" + path + "' for writing");
    char buf[80];
    for (const Point2& p : ann.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.x, p.y);
        f << buf;
    }
    if (!f) throw DataError("annotations: write to '" + path + "' failed");
}

PerspectiveMap read_perspective(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("perspective map: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(f, header)) throw DataError("perspective map: '" + path + "' is empty");
    while (!header.empty() && (header.back() == '\r' || header.back() == ' ')) header.pop_back();
    PerspectiveMap map;
    map.semantics = perspective_semantics_from_name(header);
    std::vector<scalar> values;
    std::int64_t width = -1, height = 0;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::vector<scalar> row;
        scalar v;
        while (ss >> v) row.push_back(v);
        if (row.empty()) continue;
        if (width < 0) {
            width = static_cast<std::int64_t>(row.size());
        } else if (width != static_cast<std::int64_t>(row.size())) {
            throw DataError("perspective map: '" + path + "' row " + std::to_string(height + 1) +
                            " has " + std::to_string(row.size()) + " values, expected " +
                            std::to_string(width));
        }
        values.insert(values.end(), row.begin(), row.end());
        ++height;
    }
    if (height == 0 || width < 1) throw DataError("perspective map: '" + path + "' has no grid data");
    map.values = Tensor({height, width}, std::move(values));
    validate_perspective(map, height, width);
    return map;
}

void write_perspective(const std::string& path, const PerspectiveMap& map) {
    if (map.values.rank() != 2) {
        throw ShapeError("perspective map: expected rank-2 grid, got " + map.values.shape_str());
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("perspective map: cannot open '" + path + "' for writing");
    f << perspective_semantics_name(map.semantics) << "\n";
    const std::int64_t H = map.values.dim(0), W = map.values.dim(1);
    char buf[40];
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.values.at2(y, x));
            f << buf << (x + 1 == W ? '\n' : ' ');
        }
    }
    if (!f) throw DataError("perspective map: write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset: '" + dir + "' is not a directory");
    std::vector<std::string> stems;
    const fs::path manifest = fs::path(dir) / "manifest.json";
    if (fs::exists(manifest)) {
        std::ifstream f(manifest);
        try {
            nlohmann::json j;
            f >> j;
            for (const auto& s : j.at("images")) stems.push_back(s.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("dataset: bad manifest '" + manifest.string() + "': " + e.what());
        }
    } else {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".pgm") stems.push_back(entry.path().stem().string());
        }
        std::sort(stems.begin(), stems.end());
    }
    if (stems.empty()) throw DataError("dataset: no images found in '" + dir + "'");

    Dataset ds;
    for (const std::string& stem : stems) {
        DatasetRecord rec;
        rec.stem = stem;
        rec.image = read_pgm((fs::path(dir) / (stem + ".pgm")).string());
        rec.annotations =
            read_annotations((fs::path(dir) / (stem + ".ann")).string(), rec.image.dim(1), rec.image.dim(2));
        const fs::path pmap = fs::path(dir) / (stem + ".pmap");
        if (fs::exists(pmap)) {
            rec.perspective = read_perspective(pmap.string());
            validate_perspective(*rec.perspective, rec.image.dim(1), rec.image.dim(2));
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

} // namespace io
} // namespace amdcn
