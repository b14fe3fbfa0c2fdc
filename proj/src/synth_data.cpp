#include "lesen/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lesen/array_io.hpp"
#include "lesen/rng.hpp"

namespace fs = std::filesystem;

namespace lesen {

void DatasetSpec::validate() const {
    if (image_height < 16) throw std::invalid_argument("DatasetSpec.image_height must be >= 16");
    if (image_width < 16) throw std::invalid_argument("DatasetSpec.image_width must be >= 16");
    if (n_samples < 0) throw std::invalid_argument("DatasetSpec.n_samples must be >= 0");
    if (tube_width_min < 1.0)
        throw std::invalid_argument("DatasetSpec.tube_width_min must be >= 1");
    if (tube_width_max < tube_width_min)
        throw std::invalid_argument("DatasetSpec.tube_width_max must be >= tube_width_min");
    if (contrast_a <= 0.0 || contrast_a > 1.0)
        throw std::invalid_argument("DatasetSpec.contrast_a must be in (0,1]");
    if (contrast_b <= 0.0 || contrast_b > 1.0)
        throw std::invalid_argument("DatasetSpec.contrast_b must be in (0,1]");
    if (noise_sigma_a < 0.0) throw std::invalid_argument("DatasetSpec.noise_sigma_a must be >= 0");
    if (noise_sigma_b < 0.0) throw std::invalid_argument("DatasetSpec.noise_sigma_b must be >= 0");
}

void MultiModalSample::validate() const {
    if (!modality_a.same_shape(modality_b))
        throw std::invalid_argument("sample " + sample_id + ": modality shape mismatch");
    if (mask) {
        if (mask->shape != modality_a.shape)
            throw std::invalid_argument("sample " + sample_id + ": mask shape mismatch");
        for (double v : mask->data)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("sample " + sample_id + ": non-binary mask value");
    }
}

std::string sample_id_for_index(int index) {
    std::ostringstream os;
    os << "s" << std::setw(4) << std::setfill('0') << index;
    return os.str();
}

TubeGeometry sample_tube(const DatasetSpec& spec, int sample_index) {
    auto rng = make_rng(derive_seed(spec.seed, "tube", static_cast<std::uint64_t>(sample_index)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double h = spec.image_height, w = spec.image_width;

    TubeGeometry t{};
    // Endpoints pinned near opposite borders so the curve spans the image;
    // the two interior control points wander freely.
    bool horizontal = unit(rng) < 0.5;
    if (horizontal) {
        t.px[0] = 0.08 * w + 0.08 * w * unit(rng);
        t.py[0] = h * (0.15 + 0.7 * unit(rng));
        t.px[3] = 0.92 * w - 0.08 * w * unit(rng);
        t.py[3] = h * (0.15 + 0.7 * unit(rng));
    } else {
        t.py[0] = 0.08 * h + 0.08 * h * unit(rng);
        t.px[0] = w * (0.15 + 0.7 * unit(rng));
        t.py[3] = 0.92 * h - 0.08 * h * unit(rng);
        t.px[3] = w * (0.15 + 0.7 * unit(rng));
    }
    for (int k = 1; k <= 2; ++k) {
        t.px[k] = w * (0.1 + 0.8 * unit(rng));
        t.py[k] = h * (0.1 + 0.8 * unit(rng));
    }
    std::uniform_real_distribution<double> width_dist(spec.tube_width_min, spec.tube_width_max);
    t.width = width_dist(rng);
    return t;
}

namespace {

constexpr int kCurveSamples = 256;

struct CurvePoint {
    double x, y, t;
};

std::vector<CurvePoint> sample_curve(const TubeGeometry& g) {
    std::vector<CurvePoint> pts(kCurveSamples + 1);
    for (int i = 0; i <= kCurveSamples; ++i) {
        double t = static_cast<double>(i) / kCurveSamples;
        double u = 1.0 - t;
        double b0 = u * u * u, b1 = 3 * u * u * t, b2 = 3 * u * t * t, b3 = t * t * t;
        pts[i] = {b0 * g.px[0] + b1 * g.px[1] + b2 * g.px[2] + b3 * g.px[3],
                  b0 * g.py[0] + b1 * g.py[1] + b2 * g.py[2] + b3 * g.py[3], t};
    }
    return pts;
}

// Distance from a pixel center to the sampled polyline, plus the curve
// parameter of the closest point (used for the along-tube intensity ramp).
void nearest_on_curve(const std::vector<CurvePoint>& pts, double x, double y, double* dist,
                      double* tparam) {
    double best = 1e30, best_t = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double ax = pts[i].x, ay = pts[i].y;
        double bx = pts[i + 1].x, by = pts[i + 1].y;
        double dx = bx - ax, dy = by - ay;
        double len2 = dx * dx + dy * dy;
        double s = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        double cx = ax + s * dx, cy = ay + s * dy;
        double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d2 < best) {
            best = d2;
            best_t = pts[i].t + s * (pts[i + 1].t - pts[i].t);
        }
    }
    *dist = std::sqrt(best);
    *tparam = best_t;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Tensor rasterize_tube(const TubeGeometry& tube, int height, int width) {
    auto pts = sample_curve(tube);
    Tensor mask({height, width});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double d, t;
            nearest_on_curve(pts, x + 0.5, y + 0.5, &d, &t);
            mask.at(y, x) = d <= tube.width * 0.5 ? 1.0 : 0.0;
        }
    return mask;
}

std::vector<std::string> generate_dataset(const DatasetSpec& spec, const std::string& root) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(fs::path(root) / "samples", ec);
    if (ec) throw std::runtime_error("cannot create dataset directory: " + root);

    std::vector<std::string> ids;
    for (int i = 0; i < spec.n_samples; ++i) {
        std::string id = sample_id_for_index(i);
        TubeGeometry tube = sample_tube(spec, i);
        auto pts = sample_curve(tube);

        const int hh = spec.image_height, ww = spec.image_width;
        Tensor mask({hh, ww}), a({hh, ww}), b({hh, ww});

        auto tex_rng = make_rng(derive_seed(spec.seed, "texture", static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double fx = 1.0 + 2.0 * unit(tex_rng);
        double fy = 1.0 + 2.0 * unit(tex_rng);
        double phase = 6.283185307179586 * unit(tex_rng);
        // Per-sample appearance jitter: tube visibility and background level
        // vary from case to case, so a handful of annotated samples cannot
        // cover the intensity distribution on their own.
        double vis_a = 0.4 + 0.6 * unit(tex_rng);
        double vis_b = 0.4 + 0.6 * unit(tex_rng);
        double bg_a = 0.10 + 0.30 * unit(tex_rng);

        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < ww; ++x) {
                double d, t;
                nearest_on_curve(pts, x + 0.5, y + 0.5, &d, &t);
                bool inside = d <= tube.width * 0.5;
                mask.at(y, x) = inside ? 1.0 : 0.0;
                // Complementary visibility: modality A sees the low-t end of
                // the tube, modality B the high-t end; only fusion sees all.
                double ramp_a = clamp01(1.5 * (1.0 - t));
                double ramp_b = clamp01(1.5 * t);
                double bg_b = 0.25 + 0.12 * std::sin(6.283185307179586 *
                                                         (fx * x / ww + fy * y / hh) +
                                                     phase);
                a.at(y, x) = bg_a + (inside ? spec.contrast_a * vis_a * ramp_a : 0.0);
                b.at(y, x) = bg_b + (inside ? spec.contrast_b * vis_b * ramp_b : 0.0);
            }

        auto na = make_rng(derive_seed(spec.seed, "noise_a", static_cast<std::uint64_t>(i)));
        auto nb = make_rng(derive_seed(spec.seed, "noise_b", static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> ga(0.0, 1.0), gb(0.0, 1.0);
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = clamp01(a[k] + spec.noise_sigma_a * ga(na));
            b[k] = clamp01(b[k] + spec.noise_sigma_b * gb(nb));
        }

        fs::path dir = fs::path(root) / "samples" / id;
        fs::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create sample directory: " + dir.string());
        write_image((dir / "a.img").string(), a);
        write_image((dir / "b.img").string(), b);
        write_image((dir / "mask.img").string(), mask);
        ids.push_back(id);
    }

    std::ofstream manifest(fs::path(root) / "manifest.tsv", std::ios::trunc);
    if (!manifest) throw std::runtime_error("cannot write manifest.tsv under " + root);
    for (const auto& id : ids) manifest << id << "\t1\n";
    return ids;
}

MultiModalSample load_sample(const std::string& dataset_dir, const std::string& sample_id) {
    fs::path dir = fs::path(dataset_dir) / "samples" / sample_id;
    if (!fs::exists(dir)) throw std::runtime_error("missing sample: " + sample_id);
    MultiModalSample s;
    s.sample_id = sample_id;
    s.modality_a = read_image((dir / "a.img").string());
    s.modality_b = read_image((dir / "b.img").string());
    if (fs::exists(dir / "mask.img")) s.mask = read_image((dir / "mask.img").string());
    s.validate();
    return s;
}

std::vector<std::string> list_dataset_ids(const std::string& dataset_dir) {
    std::ifstream in(fs::path(dataset_dir) / "manifest.tsv");
    if (!in) throw std::runtime_error("missing manifest.tsv in " + dataset_dir);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        ids.push_back(tab == std::string::npos ? line : line.substr(0, tab));
    }
    return ids;
}

SplitManifest make_splits(const std::string& dataset_dir, int n_labeled, int n_unlabeled,
                          int n_test, std::uint64_t seed) {
    auto ids = list_dataset_ids(dataset_dir);
    if (n_labeled < 0 || n_unlabeled < 0 || n_test < 0)
        throw std::invalid_argument("split counts must be nonnegative");
    long total = static_cast<long>(n_labeled) + n_unlabeled + n_test;
    if (total > static_cast<long>(ids.size()))
        throw std::invalid_argument("split counts exceed dataset size (" +
                                    std::to_string(total) + " > " +
                                    std::to_string(ids.size()) + ")");
    auto rng = make_rng(derive_seed(seed, "split"));
    std::shuffle(ids.begin(), ids.end(), rng);
    SplitManifest m;
    m.labeled_ids.assign(ids.begin(), ids.begin() + n_labeled);
    m.unlabeled_ids.assign(ids.begin() + n_labeled, ids.begin() + n_labeled + n_unlabeled);
    m.test_ids.assign(ids.begin() + n_labeled + n_unlabeled,
                      ids.begin() + n_labeled + n_unlabeled + n_test);
    return m;
}

void write_split_manifest(const SplitManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write split manifest: " + path);
    out << "[labeled]\n";
    for (const auto& id : m.labeled_ids) out << id << "\n";
    out << "[unlabeled]\n";
    for (const auto& id : m.unlabeled_ids) out << id << "\n";
    out << "[test]\n";
    for (const auto& id : m.test_ids) out << id << "\n";
}

SplitManifest read_split_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing split manifest: " + path);
    SplitManifest m;
    std::vector<std::string>* section = nullptr;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "[labeled]")
            section = &m.labeled_ids;
        else if (line == "[unlabeled]")
            section = &m.unlabeled_ids;
        else if (line == "[test]")
            section = &m.test_ids;
        else if (section)
            section->push_back(line);
        else
            throw std::runtime_error("split manifest has id before section header: " + path);
    }
    return m;
}

}  // namespace lesen
