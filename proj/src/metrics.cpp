#include "lesen/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lesen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_binary_pair(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || !a.same_shape(b))
        throw std::invalid_argument("masks must be same-shape rank-2 tensors");
    for (double v : a.data)
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask must be binary");
    for (double v : b.data)
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask must be binary");
}

// Foreground pixels with at least one background 4-neighbor; pixels outside
// the image count as background.
std::vector<std::pair<int, int>> boundary_pixels(const Tensor& mask) {
    const int H = mask.shape[0], W = mask.shape[1];
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (mask.at(y, x) != 1.0) continue;
            const bool edge = y == 0 || y == H - 1 || x == 0 || x == W - 1;
            if (edge || mask.at(y - 1, x) == 0.0 || mask.at(y + 1, x) == 0.0 ||
                mask.at(y, x - 1) == 0.0 || mask.at(y, x + 1) == 0.0)
                out.emplace_back(y, x);
        }
    return out;
}

// Felzenszwalb-Huttenlocher 1D squared distance transform on a regular grid
// with sample spacing `step`.
void dt_1d(const double* f, double* d, int n, double step) {
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    auto pos = [step](int i) { return i * step; };
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (f[v[0]] == kInf) {
            v[0] = q;
            z[1] = kInf;
            continue;
        }
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2 * pos(q) - 2 * pos(p));
            if (s <= z[k] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        if (f[v[0]] == kInf) {
            d[q] = kInf;
            continue;
        }
        while (z[j + 1] < pos(q)) ++j;
        const double dx = pos(q) - pos(v[j]);
        d[q] = dx * dx + f[v[j]];
    }
}

// Exact squared Euclidean distance to the given seed set, anisotropic spacing.
Tensor distance2_transform(int H, int W, const std::vector<std::pair<int, int>>& seeds,
                           double sy, double sx) {
    Tensor d({H, W}, kInf);
    for (const auto& [y, x] : seeds) d.at(y, x) = 0.0;
    std::vector<double> col(H), out(std::max(H, W));
    for (int x = 0; x < W; ++x) {  // columns first
        for (int y = 0; y < H; ++y) col[y] = d.at(y, x);
        dt_1d(col.data(), out.data(), H, sy);
        for (int y = 0; y < H; ++y) d.at(y, x) = out[y];
    }
    std::vector<double> row(W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) row[x] = d.at(y, x);
        dt_1d(row.data(), out.data(), W, sx);
        for (int x = 0; x < W; ++x) d.at(y, x) = out[x];
    }
    return d;
}

}  // namespace

double dsc(const Tensor& pred, const Tensor& gt) {
    check_binary_pair(pred, gt);
    double inter = 0.0, p = 0.0, g = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] * gt[i];
        p += pred[i];
        g += gt[i];
    }
    if (p + g == 0.0) return 1.0;  // both empty: perfect agreement
    return 2.0 * inter / (p + g);
}

double asd(const Tensor& pred, const Tensor& gt, double spacing_y, double spacing_x) {
    check_binary_pair(pred, gt);
    auto bp = boundary_pixels(pred);
    auto bg = boundary_pixels(gt);
    if (bp.empty() || bg.empty())
        throw std::runtime_error("asd undefined: empty mask");
    const int H = pred.shape[0], W = pred.shape[1];
    Tensor d2_to_gt = distance2_transform(H, W, bg, spacing_y, spacing_x);
    Tensor d2_to_pred = distance2_transform(H, W, bp, spacing_y, spacing_x);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& [y, x] : bp) s1 += std::sqrt(d2_to_gt.at(y, x));
    for (const auto& [y, x] : bg) s2 += std::sqrt(d2_to_pred.at(y, x));
    return 0.5 * (s1 / bp.size() + s2 / bg.size());
}

Tensor binarize(const Tensor& prob_map) {
    if (prob_map.shape.size() != 3 || prob_map.shape[0] < 2)
        throw std::invalid_argument("binarize: expects (K>=2,H,W)");
    const std::size_t n = static_cast<std::size_t>(prob_map.shape[1]) * prob_map.shape[2];
    Tensor mask({prob_map.shape[1], prob_map.shape[2]});
    for (std::size_t i = 0; i < n; ++i) mask[i] = prob_map.data[n + i] > 0.5 ? 1.0 : 0.0;
    return mask;
}

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

double std_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
}

std::vector<double> dsc_values(const EvalReport& r) {
    std::vector<double> v;
    for (const auto& row : r.rows) v.push_back(row.dsc);
    return v;
}

std::vector<double> asd_values(const EvalReport& r) {
    std::vector<double> v;
    for (const auto& row : r.rows)
        if (row.asd) v.push_back(*row.asd);
    return v;
}

}  // namespace

double EvalReport::mean_dsc() const { return mean_of(dsc_values(*this)); }
double EvalReport::std_dsc() const { return std_of(dsc_values(*this)); }
double EvalReport::mean_asd() const { return mean_of(asd_values(*this)); }
double EvalReport::std_asd() const { return std_of(asd_values(*this)); }

void write_eval_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write eval report: " + path);
    out.precision(9);
    out << "sample_id\tdsc\tasd\n";
    for (const auto& row : report.rows) {
        out << row.sample_id << "\t" << row.dsc << "\t";
        if (row.asd)
            out << *row.asd;
        else
            out << "undefined";
        out << "\n";
    }
    out << "mean\t" << report.mean_dsc() << "\t" << report.mean_asd() << "\n";
    out << "std\t" << report.std_dsc() << "\t" << report.std_asd() << "\n";
    if (report.asd_undefined_count > 0)
        out << "# asd undefined for " << report.asd_undefined_count << " sample(s), excluded\n";
}

}  // namespace lesen
