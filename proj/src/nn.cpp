#include "svct/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "svct/error.hpp"
#include "svct/text_config.hpp"

namespace svct::nn {

namespace {

// out[y][x] += sum_{ky,kx} k[ky][kx] * in[y+ky-1][x+kx-1], zero outside the plane.
template <typename T>
void corr3x3(const T* in, T* out, int ny, int nx, const T* k) {
    for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const T k0 = k[3 * ky], k1 = k[3 * ky + 1], k2 = k[3 * ky + 2];
        const int y_begin = std::max(0, -dy);
        const int y_end = std::min(ny, ny - dy);
        for (int y = y_begin; y < y_end; ++y) {
            const T* irow = in + static_cast<std::size_t>(y + dy) * nx;
            T* orow = out + static_cast<std::size_t>(y) * nx;
            if (nx == 1) {
                orow[0] += k1 * irow[0];
                continue;
            }
            orow[0] += k1 * irow[0] + k2 * irow[1];
#pragma omp simd
            for (int x = 1; x < nx - 1; ++x) orow[x] += k0 * irow[x - 1] + k1 * irow[x] + k2 * irow[x + 1];
            orow[nx - 1] += k0 * irow[nx - 2] + k1 * irow[nx - 1];
        }
    }
}

// Adjoint of corr3x3 in its input: gin[y+ky-1][x+kx-1] += k[ky][kx] * gout[y][x].
template <typename T>
void corr3x3_input_grad(const T* gout, T* gin, int ny, int nx, const T* k) {
    for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const T k0 = k[3 * ky], k1 = k[3 * ky + 1], k2 = k[3 * ky + 2];
        const int y_begin = std::max(0, -dy);
        const int y_end = std::min(ny, ny - dy);
        for (int y = y_begin; y < y_end; ++y) {
            const T* grow = gout + static_cast<std::size_t>(y) * nx;
            T* irow = gin + static_cast<std::size_t>(y + dy) * nx;
            if (nx == 1) {
                irow[0] += k1 * grow[0];
                continue;
            }
            // irow[i] receives k0 * grow[i+1] + k1 * grow[i] + k2 * grow[i-1].
            irow[0] += k0 * grow[1] + k1 * grow[0];
#pragma omp simd
            for (int x = 1; x < nx - 1; ++x) irow[x] += k0 * grow[x + 1] + k1 * grow[x] + k2 * grow[x - 1];
            irow[nx - 1] += k1 * grow[nx - 1] + k2 * grow[nx - 2];
        }
    }
}

// gk[ky][kx] += sum_{y,x} gout[y][x] * in[y+ky-1][x+kx-1].
template <typename T>
void corr3x3_weight_grad(const T* gout, const T* in, int ny, int nx, T* gk) {
    for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y_begin = std::max(0, -dy);
        const int y_end = std::min(ny, ny - dy);
        for (int kx = 0; kx < 3; ++kx) {
            const int dx = kx - 1;
            const int x_begin = std::max(0, -dx);
            const int x_end = std::min(nx, nx - dx);
            T acc = 0;
            for (int y = y_begin; y < y_end; ++y) {
                const T* grow = gout + static_cast<std::size_t>(y) * nx;
                const T* irow = in + static_cast<std::size_t>(y + dy) * nx + dx;
                T row_acc = 0;
#pragma omp simd reduction(+ : row_acc)
                for (int x = x_begin; x < x_end; ++x) row_acc += grow[x] * irow[x];
                acc += row_acc;
            }
            gk[3 * ky + kx] += acc;
        }
    }
}

template <typename T>
T plane_sum(const T* v, std::size_t n) {
    T acc = 0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
}

template <typename T>
void relu_inplace(T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > T(0) ? v[i] : T(0);
}

// g *= (activation > 0)
template <typename T>
void relu_mask(T* g, const T* act, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] = act[i] > T(0) ? g[i] : T(0);
}

struct PoolBin {
    int begin;
    int end;
};

// PyTorch-style adaptive bins: [floor(i*n/k), ceil((i+1)*n/k)).
std::array<PoolBin, kDiscPool> pool_bins(int n) {
    std::array<PoolBin, kDiscPool> bins{};
    for (int i = 0; i < kDiscPool; ++i) {
        bins[i].begin = (i * n) / kDiscPool;
        bins[i].end = ((i + 1) * n + kDiscPool - 1) / kDiscPool;
    }
    return bins;
}

double sigmoid(double z) {
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, 1e-15, 1.0 - 1e-15);
}

}  // namespace

template <typename T>
std::vector<T> generator_forward(const GeneratorParams<T>& p, std::span<const T> input, int nx, int ny,
                                 GeneratorCache<T>* cache) {
    if (nx < 3 || ny < 3) throw ShapeError("generator: in-plane size must be >= 3x3");
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    if (input.size() != plane * kGenDepth) {
        throw ShapeError("generator: expected a depth-" + std::to_string(kGenDepth) + " subvolume of " +
                         std::to_string(nx) + "x" + std::to_string(ny));
    }
    GeneratorCache<T> local;
    GeneratorCache<T>& c = cache ? *cache : local;
    c.valid = false;
    c.nx = nx;
    c.ny = ny;
    c.input.assign(input.begin(), input.end());

    // conv3d_1: 1 -> 8 channels, depth 8 -> 6.
    c.h1.assign(kGenChannels3d * kGenDepth1 * plane, T(0));
    {
        const auto w = p.conv3d_1_weight();
        const auto b = p.conv3d_1_bias();
        for (int co = 0; co < kGenChannels3d; ++co) {
            for (int z = 0; z < kGenDepth1; ++z) {
                T* out = c.h1.data() + (static_cast<std::size_t>(co) * kGenDepth1 + z) * plane;
                std::fill(out, out + plane, b[co]);
                for (int kz = 0; kz < 3; ++kz) {
                    corr3x3(c.input.data() + (z + kz) * plane, out, ny, nx, w.data() + (co * 3 + kz) * 9);
                }
                relu_inplace(out, plane);
            }
        }
    }
    // conv3d_2: 8 -> 8 channels, depth 6 -> 4.
    c.h2.assign(kGenChannels3d * kGenDepth2 * plane, T(0));
    {
        const auto w = p.conv3d_2_weight();
        const auto b = p.conv3d_2_bias();
        for (int co = 0; co < kGenChannels3d; ++co) {
            for (int z = 0; z < kGenDepth2; ++z) {
                T* out = c.h2.data() + (static_cast<std::size_t>(co) * kGenDepth2 + z) * plane;
                std::fill(out, out + plane, b[co]);
                for (int ci = 0; ci < kGenChannels3d; ++ci) {
                    for (int kz = 0; kz < 3; ++kz) {
                        const T* in = c.h1.data() + (static_cast<std::size_t>(ci) * kGenDepth1 + z + kz) * plane;
                        corr3x3(in, out, ny, nx, w.data() + ((co * kGenChannels3d + ci) * 3 + kz) * 9);
                    }
                }
                relu_inplace(out, plane);
            }
        }
    }
    // conv2d_1 on the 32 folded planes (channel-major, then depth).
    c.h3.assign(kGenChannels2d * plane, T(0));
    {
        const auto w = p.conv2d_1_weight();
        const auto b = p.conv2d_1_bias();
        for (int co = 0; co < kGenChannels2d; ++co) {
            T* out = c.h3.data() + static_cast<std::size_t>(co) * plane;
            std::fill(out, out + plane, b[co]);
            for (int ci = 0; ci < kGenFlat; ++ci) {
                corr3x3(c.h2.data() + static_cast<std::size_t>(ci) * plane, out, ny, nx, w.data() + (co * kGenFlat + ci) * 9);
            }
            relu_inplace(out, plane);
        }
    }
    // conv2d_2: 16 -> 1, linear.
    std::vector<T> out(plane, p.conv2d_2_bias()[0]);
    {
        const auto w = p.conv2d_2_weight();
        for (int ci = 0; ci < kGenChannels2d; ++ci) {
            corr3x3(c.h3.data() + static_cast<std::size_t>(ci) * plane, out.data(), ny, nx, w.data() + ci * 9);
        }
    }
    c.valid = true;
    return out;
}

template <typename T>
void generator_backward(const GeneratorParams<T>& p, const GeneratorCache<T>& c, std::span<const T> upstream,
                        GeneratorParams<T>& grad) {
    if (!c.valid) throw Error("generator_backward: no cached activations (run generator_forward with a cache)");
    const int nx = c.nx;
    const int ny = c.ny;
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    if (upstream.size() != plane) throw ShapeError("generator_backward: upstream gradient shape mismatch");

    // conv2d_2
    std::vector<T> g3(kGenChannels2d * plane, T(0));
    {
        const auto w = p.conv2d_2_weight();
        auto gw = grad.conv2d_2_weight();
        grad.conv2d_2_bias()[0] += plane_sum(upstream.data(), plane);
        for (int ci = 0; ci < kGenChannels2d; ++ci) {
            const T* act = c.h3.data() + static_cast<std::size_t>(ci) * plane;
            corr3x3_weight_grad(upstream.data(), act, ny, nx, gw.data() + ci * 9);
            corr3x3_input_grad(upstream.data(), g3.data() + static_cast<std::size_t>(ci) * plane, ny, nx, w.data() + ci * 9);
        }
        relu_mask(g3.data(), c.h3.data(), g3.size());
    }
    // conv2d_1
    std::vector<T> g2(kGenFlat * plane, T(0));
    {
        const auto w = p.conv2d_1_weight();
        auto gw = grad.conv2d_1_weight();
        auto gb = grad.conv2d_1_bias();
        for (int co = 0; co < kGenChannels2d; ++co) {
            const T* go = g3.data() + static_cast<std::size_t>(co) * plane;
            gb[co] += plane_sum(go, plane);
            for (int ci = 0; ci < kGenFlat; ++ci) {
                const T* act = c.h2.data() + static_cast<std::size_t>(ci) * plane;
                corr3x3_weight_grad(go, act, ny, nx, gw.data() + (co * kGenFlat + ci) * 9);
                corr3x3_input_grad(go, g2.data() + static_cast<std::size_t>(ci) * plane, ny, nx,
                                   w.data() + (co * kGenFlat + ci) * 9);
            }
        }
        relu_mask(g2.data(), c.h2.data(), g2.size());
    }
    // conv3d_2
    std::vector<T> g1(kGenChannels3d * kGenDepth1 * plane, T(0));
    {
        const auto w = p.conv3d_2_weight();
        auto gw = grad.conv3d_2_weight();
        auto gb = grad.conv3d_2_bias();
        for (int co = 0; co < kGenChannels3d; ++co) {
            for (int z = 0; z < kGenDepth2; ++z) {
                const T* go = g2.data() + (static_cast<std::size_t>(co) * kGenDepth2 + z) * plane;
                gb[co] += plane_sum(go, plane);
                for (int ci = 0; ci < kGenChannels3d; ++ci) {
                    for (int kz = 0; kz < 3; ++kz) {
                        const std::size_t in_off = (static_cast<std::size_t>(ci) * kGenDepth1 + z + kz) * plane;
                        const int k_off = ((co * kGenChannels3d + ci) * 3 + kz) * 9;
                        corr3x3_weight_grad(go, c.h1.data() + in_off, ny, nx, gw.data() + k_off);
                        corr3x3_input_grad(go, g1.data() + in_off, ny, nx, w.data() + k_off);
                    }
                }
            }
        }
        relu_mask(g1.data(), c.h1.data(), g1.size());
    }
    // conv3d_1
    {
        auto gw = grad.conv3d_1_weight();
        auto gb = grad.conv3d_1_bias();
        for (int co = 0; co < kGenChannels3d; ++co) {
            for (int z = 0; z < kGenDepth1; ++z) {
                const T* go = g1.data() + (static_cast<std::size_t>(co) * kGenDepth1 + z) * plane;
                gb[co] += plane_sum(go, plane);
                for (int kz = 0; kz < 3; ++kz) {
                    corr3x3_weight_grad(go, c.input.data() + (z + kz) * plane, ny, nx, gw.data() + (co * 3 + kz) * 9);
                }
            }
        }
    }
}

template <typename T>
GeneratorParams<T> generator_backward(const GeneratorParams<T>& p, const GeneratorCache<T>& cache,
                                      std::span<const T> upstream) {
    GeneratorParams<T> grad;
    generator_backward(p, cache, upstream, grad);
    return grad;
}

template <typename T>
double discriminator_forward(const DiscriminatorParams<T>& p, std::span<const T> slice, int nx, int ny,
                             DiscriminatorCache<T>* cache) {
    if (nx < 3 || ny < 3) throw ShapeError("discriminator: slice must be >= 3x3");
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    if (slice.size() != plane) throw ShapeError("discriminator: slice size mismatch");
    DiscriminatorCache<T> local;
    DiscriminatorCache<T>& c = cache ? *cache : local;
    c.valid = false;
    c.nx = nx;
    c.ny = ny;
    c.input.assign(slice.begin(), slice.end());

    c.a1.assign(kDiscChannels * plane, T(0));
    for (int co = 0; co < kDiscChannels; ++co) {
        T* out = c.a1.data() + co * plane;
        std::fill(out, out + plane, p.conv_1_bias()[co]);
        corr3x3(c.input.data(), out, ny, nx, p.conv_1_weight().data() + co * 9);
        relu_inplace(out, plane);
    }
    c.a2.assign(kDiscChannels * plane, T(0));
    for (int co = 0; co < kDiscChannels; ++co) {
        T* out = c.a2.data() + co * plane;
        std::fill(out, out + plane, p.conv_2_bias()[co]);
        for (int ci = 0; ci < kDiscChannels; ++ci) {
            corr3x3(c.a1.data() + ci * plane, out, ny, nx, p.conv_2_weight().data() + (co * kDiscChannels + ci) * 9);
        }
        relu_inplace(out, plane);
    }

    const auto rows = pool_bins(ny);
    const auto cols = pool_bins(nx);
    c.pooled.assign(kDiscFeatures, T(0));
    for (int ch = 0; ch < kDiscChannels; ++ch) {
        const T* a = c.a2.data() + ch * plane;
        for (int i = 0; i < kDiscPool; ++i) {
            for (int j = 0; j < kDiscPool; ++j) {
                T acc = 0;
                for (int y = rows[i].begin; y < rows[i].end; ++y) {
                    for (int x = cols[j].begin; x < cols[j].end; ++x) acc += a[static_cast<std::size_t>(y) * nx + x];
                }
                const int count = (rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin);
                c.pooled[(ch * kDiscPool + i) * kDiscPool + j] = acc / T(count);
            }
        }
    }

    c.f1.assign(kDiscHidden, T(0));
    for (int o = 0; o < kDiscHidden; ++o) {
        const T* w = p.fc_1_weight().data() + static_cast<std::size_t>(o) * kDiscFeatures;
        T acc = p.fc_1_bias()[o];
        for (int i = 0; i < kDiscFeatures; ++i) acc += w[i] * c.pooled[i];
        c.f1[o] = acc > T(0) ? acc : T(0);
    }
    c.f2.assign(kDiscHidden, T(0));
    for (int o = 0; o < kDiscHidden; ++o) {
        T acc = p.fc_2_bias()[o];
        for (int i = 0; i < kDiscHidden; ++i) acc += p.fc_2_weight()[o * kDiscHidden + i] * c.f1[i];
        c.f2[o] = acc > T(0) ? acc : T(0);
    }
    double logit = p.fc_3_bias()[0];
    for (int i = 0; i < kDiscHidden; ++i) logit += static_cast<double>(p.fc_3_weight()[i]) * c.f2[i];
    c.output = sigmoid(logit);
    c.valid = true;
    return c.output;
}

template <typename T>
void discriminator_backward(const DiscriminatorParams<T>& p, const DiscriminatorCache<T>& c, double upstream,
                            DiscriminatorParams<T>* grad, std::vector<T>* input_grad) {
    if (!c.valid) throw Error("discriminator_backward: no cached activations (run discriminator_forward with a cache)");
    const int nx = c.nx;
    const int ny = c.ny;
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;

    const T glogit = static_cast<T>(upstream * c.output * (1.0 - c.output));
    std::array<T, kDiscHidden> gf2{}, gf1{};
    for (int i = 0; i < kDiscHidden; ++i) gf2[i] = c.f2[i] > T(0) ? glogit * p.fc_3_weight()[i] : T(0);
    for (int i = 0; i < kDiscHidden; ++i) {
        T acc = 0;
        for (int o = 0; o < kDiscHidden; ++o) acc += p.fc_2_weight()[o * kDiscHidden + i] * gf2[o];
        gf1[i] = c.f1[i] > T(0) ? acc : T(0);
    }
    if (grad) {
        for (int i = 0; i < kDiscHidden; ++i) grad->fc_3_weight()[i] += glogit * c.f2[i];
        grad->fc_3_bias()[0] += glogit;
        for (int o = 0; o < kDiscHidden; ++o) {
            for (int i = 0; i < kDiscHidden; ++i) grad->fc_2_weight()[o * kDiscHidden + i] += gf2[o] * c.f1[i];
            grad->fc_2_bias()[o] += gf2[o];
        }
        for (int o = 0; o < kDiscHidden; ++o) {
            T* gw = grad->fc_1_weight().data() + static_cast<std::size_t>(o) * kDiscFeatures;
            for (int i = 0; i < kDiscFeatures; ++i) gw[i] += gf1[o] * c.pooled[i];
            grad->fc_1_bias()[o] += gf1[o];
        }
    }
    std::vector<T> gpooled(kDiscFeatures, T(0));
    for (int o = 0; o < kDiscHidden; ++o) {
        const T* w = p.fc_1_weight().data() + static_cast<std::size_t>(o) * kDiscFeatures;
        for (int i = 0; i < kDiscFeatures; ++i) gpooled[i] += gf1[o] * w[i];
    }

    const auto rows = pool_bins(ny);
    const auto cols = pool_bins(nx);
    std::vector<T> ga2(kDiscChannels * plane, T(0));
    for (int ch = 0; ch < kDiscChannels; ++ch) {
        T* g = ga2.data() + ch * plane;
        for (int i = 0; i < kDiscPool; ++i) {
            for (int j = 0; j < kDiscPool; ++j) {
                const int count = (rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin);
                const T share = gpooled[(ch * kDiscPool + i) * kDiscPool + j] / T(count);
                for (int y = rows[i].begin; y < rows[i].end; ++y) {
                    for (int x = cols[j].begin; x < cols[j].end; ++x) g[static_cast<std::size_t>(y) * nx + x] += share;
                }
            }
        }
    }
    relu_mask(ga2.data(), c.a2.data(), ga2.size());

    std::vector<T> ga1(kDiscChannels * plane, T(0));
    for (int co = 0; co < kDiscChannels; ++co) {
        const T* go = ga2.data() + co * plane;
        if (grad) grad->conv_2_bias()[co] += plane_sum(go, plane);
        for (int ci = 0; ci < kDiscChannels; ++ci) {
            const int k_off = (co * kDiscChannels + ci) * 9;
            if (grad) corr3x3_weight_grad(go, c.a1.data() + ci * plane, ny, nx, grad->conv_2_weight().data() + k_off);
            corr3x3_input_grad(go, ga1.data() + ci * plane, ny, nx, p.conv_2_weight().data() + k_off);
        }
    }
    relu_mask(ga1.data(), c.a1.data(), ga1.size());

    if (input_grad) input_grad->assign(plane, T(0));
    for (int co = 0; co < kDiscChannels; ++co) {
        const T* go = ga1.data() + co * plane;
        if (grad) {
            grad->conv_1_bias()[co] += plane_sum(go, plane);
            corr3x3_weight_grad(go, c.input.data(), ny, nx, grad->conv_1_weight().data() + co * 9);
        }
        if (input_grad) corr3x3_input_grad(go, input_grad->data(), ny, nx, p.conv_1_weight().data() + co * 9);
    }
}

namespace {

template <typename Block>
void he_normal(Block& block, std::mt19937_64& rng) {
    const auto& tensors = Block::tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& t = tensors[i];
        auto view = block.tensor(i);
        if (t.name.ends_with(".bias")) {
            std::fill(view.begin(), view.end(), 0);
            continue;
        }
        std::size_t fan_in = 1;
        for (int d = 1; d < t.rank; ++d) fan_in *= static_cast<std::size_t>(t.shape[d]);
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        for (auto& v : view) v = normal(rng);
    }
}

}  // namespace

template <typename T>
std::pair<GeneratorParams<T>, DiscriminatorParams<T>> init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GeneratorParams<double> g;
    DiscriminatorParams<double> d;
    he_normal(g, rng);
    he_normal(d, rng);
    return {g.template cast<T>(), d.template cast<T>()};
}

namespace {

constexpr char kMagic[8] = {'S', 'V', 'N', 'N', 'P', 'A', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("parameter blob truncated reading ") + field);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::string shape_text(const TensorInfo& t) {
    std::string s;
    for (int d = 0; d < t.rank; ++d) {
        if (d) s += 'x';
        s += std::to_string(t.shape[d]);
    }
    return s;
}

template <typename Block>
void write_block(std::ostream& out, const Block& block, const char* kind) {
    std::string header = std::string("kind=") + kind + "\ncount=" + std::to_string(Block::kSize) + "\n";
    for (const auto& t : Block::tensors()) header += "tensor=" + std::string(t.name) + ":" + shape_text(t) + "\n";
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (float v : block.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    if (!out) throw FormatError("failed writing parameter blob");
}

template <typename Block>
Block read_block(std::istream& in, const char* kind) {
    char magic[8];
    if (!in.read(magic, 8)) throw FormatError("parameter blob truncated reading magic");
    if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("parameter blob: bad magic");
    const auto version = get_u32(in, "version");
    if (version != kVersion) throw FormatError("parameter blob: unknown version " + std::to_string(version));
    const auto header_len = get_u32(in, "header length");
    if (header_len > (1u << 20)) throw FormatError("parameter blob: header length implausible");
    std::string header(header_len, '\0');
    if (!in.read(header.data(), header_len)) throw FormatError("parameter blob truncated reading header");
    const auto kv = parse_key_values(header);
    if (require_value(kv, "kind") != kind) throw FormatError(std::string("parameter blob: kind is not ") + kind);
    if (parse_int64("count", require_value(kv, "count")) != static_cast<long long>(Block::kSize)) {
        throw FormatError("parameter blob: count does not match architecture");
    }
    std::size_t ti = 0;
    for (const auto& [k, v] : kv) {
        if (k != "tensor") continue;
        if (ti >= Block::tensors().size()) throw FormatError("parameter blob: too many tensors");
        const auto& t = Block::tensors()[ti++];
        if (v != std::string(t.name) + ":" + shape_text(t)) throw FormatError("parameter blob: tensor mismatch at '" + v + "'");
    }
    if (ti != Block::tensors().size()) throw FormatError("parameter blob: missing tensor declarations");
    Block block;
    for (auto& v : block.values()) v = std::bit_cast<float>(get_u32(in, "payload"));
    return block;
}

}  // namespace

void write_params(std::ostream& out, const GeneratorParams<float>& p) { write_block(out, p, "generator"); }
void write_params(std::ostream& out, const DiscriminatorParams<float>& p) { write_block(out, p, "discriminator"); }
GeneratorParams<float> read_generator_params(std::istream& in) {
    return read_block<GeneratorParams<float>>(in, "generator");
}
DiscriminatorParams<float> read_discriminator_params(std::istream& in) {
    return read_block<DiscriminatorParams<float>>(in, "discriminator");
}

#define SVCT_NN_INSTANTIATE(T)                                                                                    \
    template std::vector<T> generator_forward(const GeneratorParams<T>&, std::span<const T>, int, int,          \
                                              GeneratorCache<T>*);                                              \
    template void generator_backward(const GeneratorParams<T>&, const GeneratorCache<T>&, std::span<const T>,   \
                                     GeneratorParams<T>&);                                                      \
    template GeneratorParams<T> generator_backward(const GeneratorParams<T>&, const GeneratorCache<T>&,         \
                                                   std::span<const T>);                                         \
    template double discriminator_forward(const DiscriminatorParams<T>&, std::span<const T>, int, int,          \
                                          DiscriminatorCache<T>*);                                              \
    template void discriminator_backward(const DiscriminatorParams<T>&, const DiscriminatorCache<T>&, double,   \
                                         DiscriminatorParams<T>*, std::vector<T>*);                             \
    template std::pair<GeneratorParams<T>, DiscriminatorParams<T>> init_params<T>(std::uint64_t);

SVCT_NN_INSTANTIATE(float)
SVCT_NN_INSTANTIATE(double)

#undef SVCT_NN_INSTANTIATE

}  // namespace svct::nn
