#ifndef RADCAP_FUSION_HPP
#define RADCAP_FUSION_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "radcap/image.hpp"
#include "radcap/tensor.hpp"

namespace radcap {

struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
};

struct NormalizedBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
};

// Per-object feature vector with its bounding box.
struct RegionFeature {
    Vector vector;
    BBox box;
};

struct FusionConfig {
    int d_region = 2048;
    int d_model = 32;
    int patch_size = 8;
    uint64_t seed = 42;
};

// [x_min/w, y_min/h, x_max/w, y_max/h]; rejects non-positive dims,
// inverted or out-of-bounds boxes.
NormalizedBox normalize_bbox(const BBox& b, double w, double h);

// Affine projections of region vectors and normalized boxes to the model
// dimension; the two projections are summed row-wise.
struct ObjectProjection {
    Matrix w_region;  // d_region x d_model
    Matrix b_region;  // 1 x d_model
    Matrix w_box;     // 4 x d_model
    Matrix b_box;     // 1 x d_model

    static ObjectProjection frozen(const FusionConfig& cfg);
};

// Row i = (r_i * W_r + b_r) + (norm_box_i * W_b + b_b); k rows.
// Rejects mixed region dimensions.
Matrix object_embedding(const std::vector<RegionFeature>& regions, double w, double h,
                        const ObjectProjection& proj);

// Frozen patch encoder: non-overlapping patches flattened and linearly
// projected with seed-deterministic weights, plus fixed sinusoidal
// position encodings per patch index.
struct VisualEncoder {
    FusionConfig cfg;
    Matrix projection;         // (patch*patch) x d_model
    bool add_positions = true;

    static VisualEncoder frozen(const FusionConfig& cfg);

    // Rejects images smaller than one patch. Patch count is
    // floor(w/p) * floor(h/p), scanned row-major.
    Matrix features(const GrayImage& img) const;

    // FNV-1a over the weight bit patterns; used to assert the provider
    // stays frozen across training.
    uint64_t checksum() const;
};

// Row-wise concatenation, V rows first. A 0-row V_obj yields V unchanged
// (the no-object-features ablation path). Column counts must match when
// both are non-empty.
Matrix fuse(const Matrix& v, const Matrix& v_obj);

// One image per line:
// {"id": str, "width": int, "height": int,
//  "regions": [{"box": [x0,y0,x1,y1], "vector": [...]}, ...]}
struct RegionFile {
    struct Entry {
        std::string id;
        int width = 0;
        int height = 0;
        std::vector<RegionFeature> regions;
    };
    std::vector<Entry> entries;

    const Entry* find(const std::string& id) const;
};

RegionFile load_region_jsonl(const std::filesystem::path& path);

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 1469598103934665603ULL);

}  // namespace radcap

#endif
