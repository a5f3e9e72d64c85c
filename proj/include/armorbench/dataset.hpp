#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "image.hpp"

namespace armorbench {

enum class DataSource { cifar10, synthetic };

inline std::string to_string(DataSource s) {
    return s == DataSource::cifar10 ? "cifar10" : "synthetic";
}

inline DataSource data_source_from_string(const std::string& s) {
    if (s == "cifar10") return DataSource::cifar10;
    if (s == "synthetic") return DataSource::synthetic;
    throw ConfigError("unknown data source '" + s + "'");
}

// Ordered sample collection with a class-name table. Ids are unique and
// strictly increasing; construction helpers below maintain that.
struct LabeledDataset {
    std::vector<ImageSample> samples;
    std::vector<std::string> class_names;
    DataSource source = DataSource::synthetic;

    std::size_t size() const { return samples.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    void validate() const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            if (s.label < 0 || s.label >= num_classes())
                throw InputError("sample " + std::to_string(s.id) + ": label " +
                                 std::to_string(s.label) + " outside [0," +
                                 std::to_string(num_classes()) + ")");
            if (i > 0 && samples[i - 1].id >= s.id)
                throw InputError("sample ids not strictly increasing at position " +
                                 std::to_string(i));
        }
    }
};

struct AnnotationRecord {
    std::string filename;
    int label_index = 0;
    std::string label_text;

    bool operator==(const AnnotationRecord&) const = default;
};

inline const std::vector<std::string>& cifar10_class_names() {
    static const std::vector<std::string> names = {"airplane", "automobile", "bird", "cat",
                                                   "deer",     "dog",        "frog", "horse",
                                                   "ship",     "truck"};
    return names;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batch format: per record one label byte then 3072 pixel
// bytes (1024 R, 1024 G, 1024 B, row-major 32x32), no header.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;

inline LabeledDataset parse_cifar10_batch(std::span<const std::uint8_t> raw) {
    if (raw.empty() || raw.size() % kCifarRecordBytes != 0)
        throw FormatError("cifar batch length " + std::to_string(raw.size()) +
                          " is not a positive multiple of 3073");
    LabeledDataset ds;
    ds.source = DataSource::cifar10;
    ds.class_names = cifar10_class_names();
    const std::size_t n = raw.size() / kCifarRecordBytes;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = raw.data() + i * kCifarRecordBytes;
        if (rec[0] >= 10)
            throw FormatError("cifar record " + std::to_string(i) + ": corrupt label byte " +
                              std::to_string(rec[0]));
        ImageSample s;
        s.id = static_cast<std::int64_t>(i);
        s.label = rec[0];
        s.channels = 3;
        s.height = 32;
        s.width = 32;
        s.pixels.resize(3072);
        for (std::size_t p = 0; p < 3072; ++p)
            s.pixels[p] = static_cast<float>(rec[1 + p]) / 255.0f;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline std::vector<std::uint8_t> serialize_cifar10_batch(const LabeledDataset& ds) {
    std::vector<std::uint8_t> out;
    out.reserve(ds.size() * kCifarRecordBytes);
    for (const auto& s : ds.samples) {
        if (s.pixels.size() != 3072)
            throw ShapeError("sample " + std::to_string(s.id) +
                             ": cifar serialization needs 3x32x32 pixels");
        out.push_back(static_cast<std::uint8_t>(s.label));
        for (float p : s.pixels) {
            const long v = std::lround(static_cast<double>(p) * 255.0);
            out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0l, 255l)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seeded synthetic dataset built around two kinds of class evidence:
//   - a robust cue: an oriented bar (even classes) or an offset disc (odd
//     classes) in a class-specific hue at 0.3 contrast over a mid-gray
//     background, far wider than any epsilon ball this workbench attacks.
//     One sample in five carries a decoy shape drawn from a different class,
//     so shape evidence alone cannot reach zero loss;
//   - a fragile cue: a fixed class-specific +/-0.015 sign template covering
//     every pixel, always consistent with the label. Aggregated over the
//     whole image it is the highest-SNR feature available and the only route
//     to zero loss, so clean training leans on it - yet any L-inf attacker
//     with epsilon > 0.015 can overwrite it with the opposite sign.
// Clean training therefore produces accurate but attackable models, and
// adversarial training still has genuinely robust structure left to learn
// (the four-in-five honest shapes).
// ---------------------------------------------------------------------------

inline LabeledDataset gen_synthetic(std::uint64_t seed, std::size_t n, int k, int h, int w) {
    if (k < 2) throw ConfigError("gen_synthetic: class count " + std::to_string(k) + " < 2");
    if (n < static_cast<std::size_t>(k))
        throw ConfigError("gen_synthetic: n=" + std::to_string(n) + " smaller than k=" +
                          std::to_string(k));
    if (h < 4 || w < 4) throw ConfigError("gen_synthetic: image dims must be at least 4x4");

    LabeledDataset ds;
    ds.source = DataSource::synthetic;
    for (int c = 0; c < k; ++c) ds.class_names.push_back("class_" + std::to_string(c));

    const std::size_t dim = static_cast<std::size_t>(3 * h * w);
    constexpr double kBackground = 0.5;
    constexpr double kRobustContrast = 0.3;
    constexpr double kFragileAmp = 0.015;
    constexpr double kNoiseAmp = 0.1;
    constexpr double kDecoyFraction = 0.2;

    // Per-class fragile sign templates, fixed for the entire dataset.
    Rng template_rng(derive_seed(seed, "gen_synthetic_templates"));
    std::vector<std::vector<float>> fragile(static_cast<std::size_t>(k));
    for (auto& t : fragile) {
        t.resize(dim);
        for (float& v : t)
            v = template_rng.below(2) ? static_cast<float>(kFragileAmp)
                                      : static_cast<float>(-kFragileAmp);
    }

    Rng rng(derive_seed(seed, "gen_synthetic"));
    const double cx0 = (w - 1) / 2.0, cy0 = (h - 1) / 2.0;
    const double unit = std::min(h, w);

    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(k));

        // The painted shape is usually the labelled class, occasionally a
        // decoy from another class.
        int shape_class = c;
        if (rng.uniform(0.0, 1.0) < kDecoyFraction) {
            const int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
            shape_class = other >= c ? other + 1 : other;
        }
        double cr, cg, cb;
        hue_to_rgb(static_cast<double>(shape_class) / k, cr, cg, cb);
        // Hues in [0,1] become signed per-channel contrasts in [-1,1], so the
        // shape always moves at least two channels by the full 0.3.
        const double sr = 2.0 * cr - 1.0, sg = 2.0 * cg - 1.0, sb = 2.0 * cb - 1.0;
        const double jx = rng.uniform(-2.0, 2.0);
        const double jy = rng.uniform(-2.0, 2.0);

        ImageSample s;
        s.id = static_cast<std::int64_t>(i);
        s.label = c;
        s.channels = 3;
        s.height = h;
        s.width = w;
        s.pixels.resize(dim);

        auto paint = [&](int y, int x, bool inside) {
            const double m = inside ? kRobustContrast : 0.0;
            s.at(0, y, x) = static_cast<float>(kBackground + sr * m);
            s.at(1, y, x) = static_cast<float>(kBackground + sg * m);
            s.at(2, y, x) = static_cast<float>(kBackground + sb * m);
        };

        if (shape_class % 2 == 0) {
            // Oriented bar through the (jittered) center, angle set by class.
            const double theta = M_PI * shape_class / k;
            const double nx = -std::sin(theta), ny = std::cos(theta);
            const double thickness = unit / 10.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    paint(y, x,
                          std::abs((x - cx0 - jx) * nx + (y - cy0 - jy) * ny) < thickness);
        } else {
            // Filled disc offset from the center in a class-specific direction.
            const double phi = 2.0 * M_PI * shape_class / k;
            const double ox = cx0 + jx + std::cos(phi) * unit / 5.0;
            const double oy = cy0 + jy + std::sin(phi) * unit / 5.0;
            const double radius = unit / 5.5;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    paint(y, x, std::hypot(x - ox, y - oy) < radius);
        }

        // Values stay inside [0.08, 0.92]: a full-epsilon step at 8/255 never
        // clips, so attacks see the unconstrained geometry.
        const auto& tmpl = fragile[static_cast<std::size_t>(c)];
        for (std::size_t p = 0; p < dim; ++p) {
            const double noisy = static_cast<double>(s.pixels[p]) +
                                 static_cast<double>(tmpl[p]) +
                                 rng.uniform(-kNoiseAmp, kNoiseAmp);
            s.pixels[p] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Per-channel affine normalization used inside model forward passes.
// ---------------------------------------------------------------------------

struct ChannelStats {
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    std::array<double, 3> std{0.5, 0.5, 0.5};

    void validate() const {
        for (double s : std)
            if (!(s > 0.0)) throw ConfigError("normalization std must be strictly positive");
    }
};

inline std::vector<float> normalize(const ImageSample& s, const ChannelStats& stats) {
    stats.validate();
    const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
    std::vector<float> out(s.pixels.size());
    for (int c = 0; c < s.channels; ++c)
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t idx = c * plane + p;
            out[idx] = static_cast<float>((s.pixels[idx] - stats.mean[c]) / stats.std[c]);
        }
    return out;
}

inline std::vector<float> denormalize(std::span<const float> x, int channels, int height,
                                      int width, const ChannelStats& stats) {
    stats.validate();
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    check_same_shape(x.size(), plane * channels, "denormalize");
    std::vector<float> out(x.size());
    for (int c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t idx = c * plane + p;
            out[idx] = static_cast<float>(x[idx] * stats.std[c] + stats.mean[c]);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Annotation CSV: header `filename,label_index,label_text`, UTF-8, LF.
// ---------------------------------------------------------------------------

inline std::string annotation_filename(std::int64_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%06lld.png", static_cast<long long>(id));
    return buf;
}

inline std::vector<AnnotationRecord> make_annotations(const LabeledDataset& ds) {
    std::vector<AnnotationRecord> recs;
    recs.reserve(ds.size());
    for (const auto& s : ds.samples)
        recs.push_back({annotation_filename(s.id), s.label,
                        ds.class_names.at(static_cast<std::size_t>(s.label))});
    return recs;
}

inline void write_annotations(const std::vector<AnnotationRecord>& recs,
                              const std::filesystem::path& path) {
    std::string out = "filename,label_index,label_text\n";
    for (const auto& r : recs)
        out += r.filename + "," + std::to_string(r.label_index) + "," + r.label_text + "\n";
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

inline void write_annotations(const LabeledDataset& ds, const std::filesystem::path& path) {
    write_annotations(make_annotations(ds), path);
}

inline std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    if (!std::getline(in, line) || line != "filename,label_index,label_text")
        throw FormatError(path.string() + ":1: missing annotation header");
    std::vector<AnnotationRecord> recs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 3 comma-separated fields");
        AnnotationRecord r;
        r.filename = line.substr(0, c1);
        const std::string idx = line.substr(c1 + 1, c2 - c1 - 1);
        if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": label_index '" + idx + "' is not a nonnegative integer");
        r.label_index = std::stoi(idx);
        r.label_text = line.substr(c2 + 1);
        recs.push_back(std::move(r));
    }
    return recs;
}

// ---------------------------------------------------------------------------
// Deterministic seeded split. Both sides keep ids in ascending order so the
// strictly-increasing-id invariant survives.
// ---------------------------------------------------------------------------

inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                       double train_fraction,
                                                       std::uint64_t seed) {
    if (ds.samples.empty()) throw InputError("split: dataset is empty");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train_fraction " + std::to_string(train_fraction) +
                          " outside (0,1)");
    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(perm);

    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<std::size_t> val_idx(perm.begin() + n_train, perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto take = [&](const std::vector<std::size_t>& idx) {
        LabeledDataset out;
        out.class_names = ds.class_names;
        out.source = ds.source;
        out.samples.reserve(idx.size());
        for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

// ---------------------------------------------------------------------------
// Dataset container file (magic ADAT): JSON metadata (source, class names,
// dims, count) then per-sample records id:i64, label:i32, float32 pixels.
// ---------------------------------------------------------------------------

inline constexpr char kDatasetMagic[4] = {'A', 'D', 'A', 'T'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    const int h = ds.samples.empty() ? 0 : ds.samples.front().height;
    const int w = ds.samples.empty() ? 0 : ds.samples.front().width;
    json meta = {{"source", to_string(ds.source)},
                 {"class_names", ds.class_names},
                 {"count", ds.size()},
                 {"channels", 3},
                 {"height", h},
                 {"width", w}};
    BlobWriter blob;
    for (const auto& s : ds.samples) {
        if (s.height != h || s.width != w)
            throw ShapeError("save_dataset: mixed image dimensions");
        blob.put_i64(s.id);
        blob.put_i32(s.label);
        blob.put_f32(s.pixels);
    }
    write_container(path, kDatasetMagic, kDatasetVersion, meta, blob.bytes());
}

inline LabeledDataset load_dataset(const std::filesystem::path& path) {
    const Container c = read_container(path, kDatasetMagic, kDatasetVersion);
    LabeledDataset ds;
    ds.source = data_source_from_string(c.meta.at("source").get<std::string>());
    ds.class_names = c.meta.at("class_names").get<std::vector<std::string>>();
    const auto count = c.meta.at("count").get<std::size_t>();
    const int h = c.meta.at("height").get<int>();
    const int w = c.meta.at("width").get<int>();

    BlobReader r(c.blob);
    ds.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ImageSample s;
        s.id = r.get_i64();
        s.label = r.get_i32();
        s.channels = 3;
        s.height = h;
        s.width = w;
        s.pixels.resize(static_cast<std::size_t>(3 * h * w));
        r.get_f32(s.pixels);
        ds.samples.push_back(std::move(s));
    }
    r.expect_end();
    ds.validate();
    return ds;
}

}  // namespace armorbench
