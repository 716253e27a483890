#include "svct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "svct/error.hpp"

namespace svct {

std::size_t Mask3D::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

namespace {

constexpr int kBins = 256;

struct Histogram {
    double lo = 0.0;
    double width = 1.0;
    std::vector<double> counts;

    int bin(double v) const { return std::clamp(static_cast<int>((v - lo) / width), 0, kBins - 1); }
};

Histogram histogram_of(const Volume3D& v) {
    const auto [mn, mx] = std::minmax_element(v.values().begin(), v.values().end());
    if (!(*mx > *mn)) throw Error("make_mask: ground truth is constant");
    Histogram h;
    h.lo = *mn;
    h.width = (double(*mx) - double(*mn)) / kBins;
    h.counts.assign(kBins, 0.0);
    for (float x : v.values()) h.counts[h.bin(x)] += 1.0;
    return h;
}

// Last bin of the lower class.
int otsu_split(const Histogram& h) {
    double total = 0.0, total_mean = 0.0;
    for (int i = 0; i < kBins; ++i) {
        total += h.counts[i];
        total_mean += i * h.counts[i];
    }
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int split = 0;
    for (int k = 0; k < kBins - 1; ++k) {
        w0 += h.counts[k];
        sum0 += k * h.counts[k];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0;
        const double m1 = (total_mean - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            split = k;
        }
    }
    return split;
}

void require_same_dims(const Volume3D& a, const Volume3D& b, const Mask3D& m, const char* what) {
    if (!(a.dims() == b.dims()) || !(a.dims() == m.dims) || m.data.size() != a.size()) {
        throw ShapeError(std::string(what) + ": volume and mask dims must match");
    }
}

// Same-size correlation with zero padding; kernel is size x size, row-major.
std::vector<double> filter_slice(const std::vector<double>& img, int nx, int ny, const std::vector<double>& k, int size) {
    const int r = size / 2;
    std::vector<double> out(img.size(), 0.0);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) {
                const int yy = y + j;
                if (yy < 0 || yy >= ny) continue;
                const double* krow = k.data() + static_cast<std::size_t>(j + r) * size + r;
                const double* irow = img.data() + static_cast<std::size_t>(yy) * nx;
                const int i_begin = std::max(-r, -x);
                const int i_end = std::min(r, nx - 1 - x);
                for (int i = i_begin; i <= i_end; ++i) acc += krow[i] * irow[x + i];
            }
            out[static_cast<std::size_t>(y) * nx + x] = acc;
        }
    }
    return out;
}

}  // namespace

double otsu_threshold(const Volume3D& volume) {
    const auto h = histogram_of(volume);
    return h.lo + (otsu_split(h) + 1) * h.width;
}

Mask3D make_mask(const Volume3D& gt, int dilation_radius) {
    if (dilation_radius < 0) throw Error("make_mask: dilation radius must be >= 0");
    const auto h = histogram_of(gt);
    const int split = otsu_split(h);
    const Dims3 d = gt.dims();
    const std::size_t n = d.count();

    std::vector<std::uint8_t> seg(n, 0);
    for (std::size_t i = 0; i < n; ++i) seg[i] = h.bin(gt.values()[i]) > split ? 1 : 0;

    // Background reachable from the border; the rest is inside the object.
    std::vector<std::uint8_t> outside(n, 0);
    std::vector<std::size_t> stack;
    auto idx = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(d.nx) * (y + static_cast<std::size_t>(d.ny) * z);
    };
    auto push = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) return;
        const auto i = idx(x, y, z);
        if (seg[i] || outside[i]) return;
        outside[i] = 1;
        stack.push_back(i);
    };
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) push(x, y, z);
            }
        }
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(i % d.nx);
        const int y = static_cast<int>((i / d.nx) % d.ny);
        const int z = static_cast<int>(i / (static_cast<std::size_t>(d.nx) * d.ny));
        push(x - 1, y, z);
        push(x + 1, y, z);
        push(x, y - 1, z);
        push(x, y + 1, z);
        push(x, y, z - 1);
        push(x, y, z + 1);
    }

    Mask3D mask{d, std::vector<std::uint8_t>(n, 0)};
    const int r = dilation_radius;
    std::vector<std::array<int, 3>> ball;
    for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
                if (dx * dx + dy * dy + dz * dz <= r * r) ball.push_back({dx, dy, dz});

    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (outside[idx(x, y, z)]) continue;
                for (const auto& o : ball) {
                    const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
                    if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx || yy >= d.ny || zz >= d.nz) continue;
                    mask.data[idx(xx, yy, zz)] = 1;
                }
            }
        }
    }
    if (mask.count() == 0) throw Error("make_mask: empty mask");
    return mask;
}

double nmae(const Volume3D& gt, const Volume3D& x, const Mask3D& mask) {
    require_same_dims(gt, x, mask, "nmae");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!mask.data[i]) continue;
        num += std::abs(double(gt.values()[i]) - double(x.values()[i]));
        den += std::abs(double(gt.values()[i]));
    }
    if (!(den > 0.0)) throw Error("nmae: masked ground truth has zero L1 norm");
    return num / den;
}

std::vector<double> log_kernel(int size, double sigma) {
    if (size < 3 || size % 2 == 0) throw Error("log_kernel: size must be odd and >= 3");
    if (!(sigma > 0)) throw Error("log_kernel: sigma must be > 0");
    const int r = size / 2;
    const double s2 = sigma * sigma;
    std::vector<double> k(static_cast<std::size_t>(size) * size);
    double sum = 0.0;
    for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
            const double q = (i * i + j * j) / (2.0 * s2);
            // sigma^2 * LoG(i, j)
            const double v = -(1.0 / (std::numbers::pi * s2)) * (1.0 - q) * std::exp(-q);
            k[static_cast<std::size_t>(j + r) * size + (i + r)] = v;
            sum += v;
        }
    }
    const double mean = sum / static_cast<double>(k.size());
    for (double& v : k) v -= mean;
    return k;
}

NhfenReport nhfen_report(const Volume3D& gt, const Volume3D& x, const Mask3D& mask) {
    require_same_dims(gt, x, mask, "nhfen");
    const Dims3 d = gt.dims();
    const auto kernel = log_kernel(kLogSize, kLogSigma);
    double gt_max = 0.0;
    for (float v : gt.values()) gt_max = std::max(gt_max, std::abs(double(v)));
    const double eps = 1e-9 * gt_max;

    NhfenReport report;
    report.per_slice.assign(d.nz, -1.0);
    const std::size_t plane = static_cast<std::size_t>(d.nx) * d.ny;
    std::vector<double> a(plane), b(plane);
    double total = 0.0;
    for (int z = 0; z < d.nz; ++z) {
        const std::size_t off = plane * z;
        for (std::size_t i = 0; i < plane; ++i) {
            const bool in = mask.data[off + i] != 0;
            a[i] = in ? gt.values()[off + i] : 0.0;
            b[i] = in ? x.values()[off + i] : 0.0;
        }
        const auto ha = filter_slice(a, d.nx, d.ny, kernel, kLogSize);
        const auto hb = filter_slice(b, d.nx, d.ny, kernel, kLogSize);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            num += (ha[i] - hb[i]) * (ha[i] - hb[i]);
            den += ha[i] * ha[i];
        }
        num = std::sqrt(num);
        den = std::sqrt(den);
        if (den < eps || den == 0.0) continue;
        report.per_slice[z] = num / den;
        total += num / den;
        ++report.slices_used;
    }
    if (report.slices_used == 0) throw Error("nhfen: every slice has an empty high-pass ground truth");
    report.value = total / report.slices_used;
    return report;
}

double nhfen(const Volume3D& gt, const Volume3D& x, const Mask3D& mask) { return nhfen_report(gt, x, mask).value; }

}  // namespace svct
