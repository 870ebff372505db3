#include "radcap/fusion.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "radcap/text.hpp"

namespace radcap {

NormalizedBox normalize_bbox(const BBox& b, double w, double h) {
    if (!(w > 0.0) || !(h > 0.0))
        throw std::invalid_argument("normalize_bbox: image dimensions must be positive");
    if (b.x_min > b.x_max || b.y_min > b.y_max)
        throw std::invalid_argument("normalize_bbox: inverted box");
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w || b.y_max > h)
        throw std::invalid_argument("normalize_bbox: box outside image bounds");
    return {b.x_min / w, b.y_min / h, b.x_max / w, b.y_max / h};
}

ObjectProjection ObjectProjection::frozen(const FusionConfig& cfg) {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    ObjectProjection p;
    p.w_region = Matrix(cfg.d_region, cfg.d_model);
    p.b_region = Matrix(1, cfg.d_model);
    p.w_box = Matrix(4, cfg.d_model);
    p.b_box = Matrix(1, cfg.d_model);
    xavier_uniform(p.w_region, rng);
    xavier_uniform(p.w_box, rng);
    return p;
}

Matrix object_embedding(const std::vector<RegionFeature>& regions, double w, double h,
                        const ObjectProjection& proj) {
    const int d_model = proj.w_region.cols;
    Matrix out(static_cast<int>(regions.size()), d_model);
    if (regions.empty()) return out;
    const int d_region = regions.front().vector.dim();
    for (size_t i = 0; i < regions.size(); ++i) {
        if (regions[i].vector.dim() != d_region)
            throw std::invalid_argument("object_embedding: mixed region dims " +
                                        std::to_string(regions[i].vector.dim()) + " vs " +
                                        std::to_string(d_region));
    }
    if (d_region != proj.w_region.rows)
        throw std::invalid_argument("object_embedding: region dim " + std::to_string(d_region) +
                                    " does not match projection " + shape_str(proj.w_region));
    for (size_t i = 0; i < regions.size(); ++i) {
        const NormalizedBox nb = normalize_bbox(regions[i].box, w, h);
        const double box[4] = {nb.x_min, nb.y_min, nb.x_max, nb.y_max};
        for (int j = 0; j < d_model; ++j) {
            double acc = proj.b_region.at(0, j) + proj.b_box.at(0, j);
            for (int k = 0; k < d_region; ++k)
                acc += regions[i].vector[k] * proj.w_region.at(k, j);
            for (int k = 0; k < 4; ++k) acc += box[k] * proj.w_box.at(k, j);
            out.at(static_cast<int>(i), j) = acc;
        }
    }
    return out;
}

VisualEncoder VisualEncoder::frozen(const FusionConfig& cfg) {
    if (cfg.patch_size < 1) throw std::invalid_argument("patch size must be >= 1");
    if (cfg.d_model < 1) throw std::invalid_argument("d_model must be >= 1");
    std::mt19937_64 rng(cfg.seed);
    VisualEncoder enc;
    enc.cfg = cfg;
    enc.projection = Matrix(cfg.patch_size * cfg.patch_size, cfg.d_model);
    xavier_uniform(enc.projection, rng);
    return enc;
}

Matrix VisualEncoder::features(const GrayImage& img) const {
    const int p = cfg.patch_size;
    const int nx = img.width / p;
    const int ny = img.height / p;
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("visual_features: image " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + " smaller than one patch of size " +
                                    std::to_string(p));
    const int n_patches = nx * ny;
    const int d_model = projection.cols;
    Matrix out(n_patches, d_model);
    Vector flat(p * p);
    const Matrix pe = add_positions ? sinusoidal_positions(n_patches, d_model) : Matrix();
    for (int py = 0; py < ny; ++py) {
        for (int px = 0; px < nx; ++px) {
            const int idx = py * nx + px;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    flat[y * p + x] = img.at(px * p + x, py * p + y);
            for (int j = 0; j < d_model; ++j) {
                double acc = 0.0;
                for (int k = 0; k < p * p; ++k) acc += flat[k] * projection.at(k, j);
                if (add_positions) acc += pe.at(idx, j);
                out.at(idx, j) = acc;
            }
        }
    }
    return out;
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = seed;
    for (size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

uint64_t VisualEncoder::checksum() const {
    return fnv1a64(projection.data.data(), projection.data.size() * sizeof(double));
}

Matrix fuse(const Matrix& v, const Matrix& v_obj) {
    if (v_obj.rows == 0) return v;
    if (v.rows == 0) return v_obj;
    if (v.cols != v_obj.cols)
        throw std::invalid_argument("fuse: column mismatch " + shape_str(v) + " vs " + shape_str(v_obj));
    Matrix out(v.rows + v_obj.rows, v.cols);
    std::copy(v.data.begin(), v.data.end(), out.data.begin());
    std::copy(v_obj.data.begin(), v_obj.data.end(), out.data.begin() + v.data.size());
    return out;
}

const RegionFile::Entry* RegionFile::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

RegionFile load_region_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open region feature file");
    RegionFile file;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": invalid JSON: " + e.what());
        }
        RegionFile::Entry entry;
        entry.id = j.at("id").get<std::string>();
        entry.width = j.at("width").get<int>();
        entry.height = j.at("height").get<int>();
        for (const auto& r : j.at("regions")) {
            RegionFeature feat;
            const auto& box = r.at("box");
            if (box.size() != 4)
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                         ": box must have 4 coordinates");
            feat.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                        box[3].get<double>()};
            feat.vector.data = r.at("vector").get<std::vector<double>>();
            entry.regions.push_back(std::move(feat));
        }
        file.entries.push_back(std::move(entry));
    }
    return file;
}

}  // namespace radcap
