#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amdcn/supervision.hpp"
#include "amdcn/tensor.hpp"

namespace amdcn {
namespace io {

// Grayscale images travel as 8-bit binary PGM (P5, maxval 255); pixel values
// map to [0,1] in tensors. Plain-text P2 is accepted on read.
Tensor read_pgm(const std::string& path); // -> [1,H,W]
void write_pgm(const std::string& path, const Tensor& image); // [1,H,W] or [H,W], values in [0,1]

// Annotation file: one `x,y` pair per line (reals, pixels), `#` comments.
PointAnnotations read_annotations(const std::string& path, std::int64_t height, std::int64_t width);
void write_annotations(const std::string& path, const PointAnnotations& ann);

// Perspective map file: a one-line semantics header (`ucsd_divisor` or
// `worldexpo_meters`), then H rows of W whitespace-separated reals.
PerspectiveMap read_perspective(const std::string& path);
void write_perspective(const std::string& path, const PerspectiveMap& map);

struct DatasetRecord {
    std::string stem;
    Tensor image; // [C,H,W], values in [0,1]
    PointAnnotations annotations;
    std::optional<PerspectiveMap> perspective;
};

struct Dataset {
    std::vector<DatasetRecord> records;
};

// Loads `<stem>.pgm` + `<stem>.ann` (+ optional `<stem>.pmap`) triples.
// Stems come from manifest.json's "images" list when present, else from a
// sorted directory scan.
Dataset load_dataset(const std::string& dir);

} // namespace io
} // namespace amdcn
