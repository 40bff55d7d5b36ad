#include "eeo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "eeo/errors.hpp"
#include "eeo/rng.hpp"
#include "eeo/serial.hpp"

namespace eeo {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x, y;
};

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Point-in-shape tests in the shape's local frame.
bool inside_ellipse(Vec2 p, double a, double b) {
    return (p.x / a) * (p.x / a) + (p.y / b) * (p.y / b) <= 1.0;
}

bool inside_polygon(Vec2 p, const std::vector<Vec2>& vs) {
    // Convex, counter-clockwise.
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const Vec2& u = vs[i];
        const Vec2& v = vs[(i + 1) % vs.size()];
        const double cross = (v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x);
        if (cross < 0.0) return false;
    }
    return true;
}

std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir, bool dirs) {
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (dirs == e.is_directory()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::string split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "unknown";
}

int shapes_v1_class_count() { return 3; }

int shapes_v1_max_class_count() { return 6; }

std::vector<std::string> shapes_v1_class_names(int class_count) {
    std::vector<std::string> all{"bar", "ellipse", "triangle", "cross", "ring", "diamond"};
    if (class_count < 2 || class_count > static_cast<int>(all.size())) {
        throw ValueError("shapes-v1 supports 2..6 classes, got " + std::to_string(class_count));
    }
    all.resize(static_cast<std::size_t>(class_count));
    return all;
}

namespace {

// One shape instance: class geometry plus pose, resolved at construction.
struct ShapeInstance {
    int class_id;
    double cx, cy, cos_r, sin_r;
    double ell_a = 0, ell_b = 0, bar_hx = 0, bar_hy = 0, ring_inner = 0;
    std::vector<Vec2> tri;

    ShapeInstance(int cls, double center_x, double center_y, double rot, double rho, Rng& rng)
        : class_id(cls), cx(center_x), cy(center_y), cos_r(std::cos(rot)), sin_r(std::sin(rot)) {
        switch (cls) {
            case 0:  // bar: elongated rectangle
                bar_hx = rho * 1.15;
                bar_hy = rho * 0.32 * rng.uniform(0.85, 1.15);
                break;
            case 1:  // ellipse: roundish
                ell_a = rho;
                ell_b = rho * rng.uniform(0.75, 1.0);
                break;
            case 2:  // triangle with jittered vertices
                for (int v = 0; v < 3; ++v) {
                    const double ang = 2.0 * kPi * v / 3.0;
                    const double r = rho * 1.2 * rng.uniform(0.9, 1.1);
                    tri.push_back({r * std::cos(ang), r * std::sin(ang)});
                }
                break;
            case 3:  // cross: two perpendicular bars
                bar_hx = rho * 1.1;
                bar_hy = rho * 0.30 * rng.uniform(0.85, 1.15);
                break;
            case 4:  // ring: annulus whose hole closes under heavy blur
                ell_a = rho;
                ring_inner = rho * rng.uniform(0.50, 0.60);
                break;
            case 5:  // diamond: unit-aspect square (vs the elongated bar)
                bar_hx = rho * rng.uniform(0.85, 1.0);
                bar_hy = bar_hx;
                break;
            default:
                throw ValueError("shapes-v1 class id out of range");
        }
    }

    bool contains(double px, double py) const {
        const double dx = px - cx, dy = py - cy;
        const Vec2 local{cos_r * dx + sin_r * dy, -sin_r * dx + cos_r * dy};
        switch (class_id) {
            case 0:
            case 5:
                return std::abs(local.x) <= bar_hx && std::abs(local.y) <= bar_hy;
            case 1:
                return inside_ellipse(local, ell_a, ell_b);
            case 3:
                return (std::abs(local.x) <= bar_hx && std::abs(local.y) <= bar_hy) ||
                       (std::abs(local.y) <= bar_hx && std::abs(local.x) <= bar_hy);
            case 4: {
                const double r2 = local.x * local.x + local.y * local.y;
                return r2 <= ell_a * ell_a && r2 >= ring_inner * ring_inner;
            }
            default:
                return inside_polygon(local, tri);
        }
    }
};

} // namespace

ImageU8 render_shape_image(int class_id, std::uint64_t seed, std::uint64_t index, int size) {
    if (class_id < 0 || class_id >= shapes_v1_max_class_count()) {
        throw ValueError("shapes-v1 class id out of range: " + std::to_string(class_id));
    }
    Rng rng(Rng::derive(seed, index * 8 + static_cast<std::uint64_t>(class_id)));
    const double S = static_cast<double>(size);

    // Background: linear gradient between two random colors.
    double bg0[3], bg1[3];
    for (int c = 0; c < 3; ++c) {
        bg0[c] = rng.uniform(30.0, 220.0);
        bg1[c] = rng.uniform(30.0, 220.0);
    }
    const double bg_theta = rng.uniform(0.0, 2.0 * kPi);
    const double gx = std::cos(bg_theta), gy = std::sin(bg_theta);
    const double bg_luma = 0.5 * (luma(bg0[0], bg0[1], bg0[2]) + luma(bg1[0], bg1[1], bg1[2]));

    // Foreground color, pushed away from the background luminance.
    double fg[3];
    for (int c = 0; c < 3; ++c) fg[c] = rng.uniform(0.0, 255.0);
    double fg_luma = luma(fg[0], fg[1], fg[2]);
    if (std::abs(fg_luma - bg_luma) < 70.0) {
        const double dir = fg_luma >= bg_luma ? 1.0 : -1.0;
        double target = bg_luma + dir * 70.0;
        if (target > 235.0) target = bg_luma - 70.0;
        if (target < 20.0) target = bg_luma + 70.0;
        const double shift = target - fg_luma;
        for (int c = 0; c < 3; ++c) fg[c] = std::min(255.0, std::max(0.0, fg[c] + shift));
        fg_luma = luma(fg[0], fg[1], fg[2]);
    }

    // Striped texture on the main shape, with the stripe orientation tied to
    // the class (plus jitter). Classes therefore carry two cues: a fine,
    // fragile texture cue and a coarse, robust silhouette cue - the same
    // two-cue structure photographs have, where distortion strips the texture.
    const double stripe_amp = rng.uniform(12.0, 18.0);
    const double stripe_wavelen = rng.uniform(7.0, 10.0);
    const double stripe_phase = rng.uniform(0.0, 2.0 * kPi);
    const double stripe_theta = class_id * (kPi / 6.0) + rng.uniform(-0.15, 0.15);
    const double sx = std::cos(stripe_theta), sy = std::sin(stripe_theta);

    // Class-neutral fine texture over the whole frame (like sensor grain or
    // fabric in photos). Because it appears in every class, training maps
    // noise-like patterns to uncommitted features instead of letting heavy
    // test-time noise land on an arbitrary confident direction.
    const double grain_amp = rng.uniform() < 0.4 ? 0.0 : rng.uniform(2.0, 10.0);

    // Main shape: jittered pose, bounded rotation (the backbone trains from
    // scratch on a small set; full rotation invariance is out of reach).
    const double cx = S * (0.5 + rng.uniform(-0.13, 0.13));
    const double cy = S * (0.5 + rng.uniform(-0.13, 0.13));
    const double rot = rng.uniform(-0.45, 0.45);
    const double rho = S * rng.uniform(0.24, 0.32);
    const ShapeInstance main_shape(class_id, cx, cy, rot, rho, rng);

    // Two smaller distractor shapes of other classes. Pristine images keep a
    // clear salience gap; blur and noise shrink it, so corrupted images become
    // genuinely ambiguous between the classes present - which is what lets
    // branch confidence degrade gracefully instead of collapsing onto one class.
    std::vector<ShapeInstance> distractors;
    std::vector<std::array<double, 3>> distractor_colors;
    for (int d = 0; d < 2; ++d) {
        int cls = static_cast<int>(rng.uniform_below(
            static_cast<std::uint64_t>(shapes_v1_max_class_count() - 1)));
        if (cls >= class_id) ++cls;
        const double dx = S * rng.uniform(0.18, 0.82);
        const double dy = S * rng.uniform(0.18, 0.82);
        const double drot = rng.uniform(0.0, 2.0 * kPi);
        const double drho = rho * rng.uniform(0.48, 0.64);
        distractors.emplace_back(cls, dx, dy, drot, drho, rng);
        std::array<double, 3> col{};
        for (int c = 0; c < 3; ++c) col[static_cast<std::size_t>(c)] = rng.uniform(0.0, 255.0);
        // Keep distractors visible against the background too.
        const double dl = luma(col[0], col[1], col[2]);
        if (std::abs(dl - bg_luma) < 45.0) {
            const double dir = dl >= bg_luma ? 1.0 : -1.0;
            double target = bg_luma + dir * 45.0;
            if (target > 240.0) target = bg_luma - 45.0;
            if (target < 15.0) target = bg_luma + 45.0;
            const double shift = target - dl;
            for (int c = 0; c < 3; ++c) {
                col[static_cast<std::size_t>(c)] =
                    std::min(255.0, std::max(0.0, col[static_cast<std::size_t>(c)] + shift));
            }
        }
        distractor_colors.push_back(col);
    }

    ImageU8 img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            // 2x2 supersampling; the main shape is drawn on top.
            int hits_main = 0;
            std::array<int, 2> hits_d{0, 0};
            int hits_bg = 0;
            for (int suby = 0; suby < 2; ++suby) {
                for (int subx = 0; subx < 2; ++subx) {
                    const double px = x + 0.25 + 0.5 * subx;
                    const double py = y + 0.25 + 0.5 * suby;
                    if (main_shape.contains(px, py)) {
                        ++hits_main;
                    } else if (distractors[0].contains(px, py)) {
                        ++hits_d[0];
                    } else if (distractors[1].contains(px, py)) {
                        ++hits_d[1];
                    } else {
                        ++hits_bg;
                    }
                }
            }

            const double t = ((x - S / 2) * gx + (y - S / 2) * gy) / S + 0.5;
            const double tc = std::min(1.0, std::max(0.0, t));
            const double stripe =
                stripe_amp * std::sin(2.0 * kPi * (x * sx + y * sy) / stripe_wavelen + stripe_phase);
            for (int c = 0; c < 3; ++c) {
                const double bg = bg0[c] + (bg1[c] - bg0[c]) * tc;
                const double fgc = std::min(255.0, std::max(0.0, fg[c] + stripe));
                double v = (bg * hits_bg + fgc * hits_main +
                            distractor_colors[0][static_cast<std::size_t>(c)] * hits_d[0] +
                            distractor_colors[1][static_cast<std::size_t>(c)] * hits_d[1]) /
                           4.0;
                if (grain_amp > 0.0) v += rng.normal(0.0, grain_amp);
                img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
            }
        }
    }
    return img;
}

DatasetSplits load_dataset(const std::string& source, std::uint64_t seed) {
    std::vector<LabeledImage> all;
    int class_count = 0;
    std::vector<std::string> class_names;

    if (source.rfind("shapes-v1", 0) == 0) {
        // "shapes-v1" (3x600), "shapes-v1:<per-class>" or "shapes-v1:<classes>x<per-class>".
        int per_class = 600;
        class_count = shapes_v1_class_count();
        if (source.size() > 9) {
            if (source[9] != ':') throw ConfigError("bad builtin dataset name '" + source + "'");
            const std::string rest = source.substr(10);
            const auto x = rest.find('x');
            try {
                if (x == std::string::npos) {
                    per_class = std::stoi(rest);
                } else {
                    class_count = std::stoi(rest.substr(0, x));
                    per_class = std::stoi(rest.substr(x + 1));
                }
            } catch (const std::exception&) {
                throw ConfigError("bad builtin dataset name '" + source + "'");
            }
            if (per_class < 10) throw ConfigError("shapes-v1 needs at least 10 images per class");
        }
        class_names = shapes_v1_class_names(class_count);
        for (int cls = 0; cls < class_count; ++cls) {
            for (int i = 0; i < per_class; ++i) {
                all.push_back({render_shape_image(cls, seed, static_cast<std::uint64_t>(i)), cls});
            }
        }
    } else {
        const std::filesystem::path root(source);
        if (!std::filesystem::is_directory(root)) {
            throw ConfigError("dataset root is not a directory: " + source);
        }
        const auto class_dirs = sorted_entries(root, true);
        if (class_dirs.empty()) {
            throw ConfigError("dataset root contains no class folders: " + source);
        }
        class_count = static_cast<int>(class_dirs.size());
        for (int cls = 0; cls < class_count; ++cls) {
            const auto& dir = class_dirs[static_cast<std::size_t>(cls)];
            class_names.push_back(dir.filename().string());
            const auto files = sorted_entries(dir, false);
            if (files.empty()) {
                throw ConfigError("empty class folder: " + dir.string());
            }
            for (const auto& f : files) {
                all.push_back({load_image(f), cls});
            }
        }
    }

    Rng rng(seed);
    rng.shuffle(all);

    const std::size_t n = all.size();
    const std::size_t n_train = n * 8 / 10;
    const std::size_t n_val = n / 10;

    DatasetSplits splits;
    auto fill = [&](LabeledDataset& ds, std::size_t begin, std::size_t end, Split tag) {
        ds.items.assign(all.begin() + static_cast<std::ptrdiff_t>(begin),
                        all.begin() + static_cast<std::ptrdiff_t>(end));
        ds.class_count = class_count;
        ds.class_names = class_names;
        ds.split = tag;
    };
    fill(splits.train, 0, n_train, Split::Train);
    fill(splits.validation, n_train, n_train + n_val, Split::Validation);
    fill(splits.test, n_train + n_val, n, Split::Test);
    return splits;
}

std::string distorted_cache_name(Split split, DistortionKind kind, float level) {
    const int lvl = static_cast<int>(std::lround(level));
    return split_name(split) + "_" + distortion_kind_name(kind) + "_" + std::to_string(lvl) + ".bin";
}

void save_dataset_cache(const LabeledDataset& dataset, const std::filesystem::path& path) {
    BinaryWriter w;
    w.magic("EEXD");
    w.u32(1);  // format version
    w.u32(static_cast<std::uint32_t>(dataset.split));
    w.u32(static_cast<std::uint32_t>(dataset.class_count));
    w.u32(static_cast<std::uint32_t>(dataset.class_names.size()));
    for (const auto& name : dataset.class_names) w.str(name);
    w.u32(static_cast<std::uint32_t>(dataset.items.size()));
    for (const auto& item : dataset.items) {
        w.u32(static_cast<std::uint32_t>(item.label));
        w.u32(static_cast<std::uint32_t>(item.image.height));
        w.u32(static_cast<std::uint32_t>(item.image.width));
        w.u32(static_cast<std::uint32_t>(item.image.channels));
        w.bytes(item.image.pixels.data(), item.image.pixels.size());
    }
    w.to_file(path);
}

LabeledDataset load_dataset_cache(const std::filesystem::path& path) {
    BinaryReader r = BinaryReader::from_file(path);
    r.expect_magic("EEXD");
    const std::uint32_t version = r.u32();
    if (version != 1) {
        throw FormatError(FormatError::Code::VersionMismatch,
                          "dataset cache version " + std::to_string(version) + ", expected 1");
    }
    LabeledDataset ds;
    ds.split = static_cast<Split>(r.u32());
    ds.class_count = static_cast<int>(r.u32());
    const std::uint32_t name_count = r.u32();
    for (std::uint32_t i = 0; i < name_count; ++i) ds.class_names.push_back(r.str());
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        LabeledImage item;
        item.label = static_cast<int>(r.u32());
        const int h = static_cast<int>(r.u32());
        const int w = static_cast<int>(r.u32());
        const int c = static_cast<int>(r.u32());
        item.image = ImageU8(h, w, c);
        r.bytes(item.image.pixels.data(), item.image.pixels.size());
        ds.items.push_back(std::move(item));
    }
    r.expect_end();
    return ds;
}

LabeledDataset distort_dataset(const LabeledDataset& dataset, DistortionKind kind, float level,
                               std::uint64_t seed) {
    LabeledDataset out = dataset;
    if (kind == DistortionKind::Pristine) return out;
    for (std::size_t i = 0; i < out.items.size(); ++i) {
        DistortionSpec spec{kind, level, Rng::derive(seed, i)};
        out.items[i].image = apply_distortion(dataset.items[i].image, spec);
    }
    return out;
}

LabeledDataset distort_dataset_uniform_levels(const LabeledDataset& dataset, DistortionKind kind,
                                              std::uint64_t seed) {
    LabeledDataset out = dataset;
    if (kind == DistortionKind::Pristine) return out;
    const std::span<const float> grid =
        kind == DistortionKind::Blur ? blur_levels() : noise_levels();
    Rng rng(seed);
    for (std::size_t i = 0; i < out.items.size(); ++i) {
        const float level = grid[static_cast<std::size_t>(rng.uniform_below(grid.size()))];
        DistortionSpec spec{kind, level, rng.next_u64()};
        out.items[i].image = apply_distortion(dataset.items[i].image, spec);
    }
    return out;
}

} // namespace eeo
