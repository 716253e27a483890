#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace svct::nn {

/// Named slice of a flat parameter vector.
struct TensorInfo {
    std::string_view name;
    std::array<int, 5> shape;  // unused trailing dims are 1
    int rank;

    constexpr std::size_t count() const {
        std::size_t n = 1;
        for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(shape[i]);
        return n;
    }
};

// Generator: two 3x3x3 convolutions (same in-plane, valid in z, depth 8->6->4),
// the 8 channels x 4 remaining slices fold into 32 planes, then two 3x3
// convolutions down to one output slice.
inline constexpr int kGenDepth = 8;
inline constexpr int kGenChannels3d = 8;
inline constexpr int kGenDepth1 = kGenDepth - 2;
inline constexpr int kGenDepth2 = kGenDepth1 - 2;
inline constexpr int kGenFlat = kGenChannels3d * kGenDepth2;
inline constexpr int kGenChannels2d = 16;

inline constexpr std::array<TensorInfo, 8> kGeneratorTensors{{
    {"conv3d_1.weight", {kGenChannels3d, 1, 3, 3, 3}, 5},
    {"conv3d_1.bias", {kGenChannels3d, 1, 1, 1, 1}, 1},
    {"conv3d_2.weight", {kGenChannels3d, kGenChannels3d, 3, 3, 3}, 5},
    {"conv3d_2.bias", {kGenChannels3d, 1, 1, 1, 1}, 1},
    {"conv2d_1.weight", {kGenChannels2d, kGenFlat, 3, 3, 1}, 4},
    {"conv2d_1.bias", {kGenChannels2d, 1, 1, 1, 1}, 1},
    {"conv2d_2.weight", {1, kGenChannels2d, 3, 3, 1}, 4},
    {"conv2d_2.bias", {1, 1, 1, 1, 1}, 1},
}};

// Discriminator: two 3x3 convolutions with 8 filters, adaptive average
// pooling to 12x12 (8*12*12 = 1152 features), dense 1152->8->8->1, sigmoid.
inline constexpr int kDiscChannels = 8;
inline constexpr int kDiscPool = 12;
inline constexpr int kDiscFeatures = kDiscChannels * kDiscPool * kDiscPool;
inline constexpr int kDiscHidden = 8;

inline constexpr std::array<TensorInfo, 10> kDiscriminatorTensors{{
    {"conv_1.weight", {kDiscChannels, 1, 3, 3, 1}, 4},
    {"conv_1.bias", {kDiscChannels, 1, 1, 1, 1}, 1},
    {"conv_2.weight", {kDiscChannels, kDiscChannels, 3, 3, 1}, 4},
    {"conv_2.bias", {kDiscChannels, 1, 1, 1, 1}, 1},
    {"fc_1.weight", {kDiscHidden, kDiscFeatures, 1, 1, 1}, 2},
    {"fc_1.bias", {kDiscHidden, 1, 1, 1, 1}, 1},
    {"fc_2.weight", {kDiscHidden, kDiscHidden, 1, 1, 1}, 2},
    {"fc_2.bias", {kDiscHidden, 1, 1, 1, 1}, 1},
    {"fc_3.weight", {1, kDiscHidden, 1, 1, 1}, 2},
    {"fc_3.bias", {1, 1, 1, 1, 1}, 1},
}};

template <std::size_t N>
constexpr std::size_t total_count(const std::array<TensorInfo, N>& tensors) {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.count();
    return n;
}

template <std::size_t N>
constexpr std::size_t offset_of(const std::array<TensorInfo, N>& tensors, std::size_t index) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < index; ++i) n += tensors[i].count();
    return n;
}

/// Flat parameter storage with named views. Gradients share the type.
template <typename T, std::size_t N, const std::array<TensorInfo, N>& Tensors>
class ParamBlock {
public:
    static constexpr std::size_t kSize = total_count(Tensors);
    static constexpr const std::array<TensorInfo, N>& tensors() { return Tensors; }

    ParamBlock() : values_(kSize, T(0)) {}

    std::span<T> tensor(std::size_t i) { return std::span<T>(values_).subspan(offset_of(Tensors, i), Tensors[i].count()); }
    std::span<const T> tensor(std::size_t i) const {
        return std::span<const T>(values_).subspan(offset_of(Tensors, i), Tensors[i].count());
    }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    template <typename U>
    ParamBlock<U, N, Tensors> cast() const {
        ParamBlock<U, N, Tensors> out;
        for (std::size_t i = 0; i < kSize; ++i) out.values()[i] = static_cast<U>(values_[i]);
        return out;
    }

    void zero() { std::fill(values_.begin(), values_.end(), T(0)); }
    void add(const ParamBlock& other) {
        for (std::size_t i = 0; i < kSize; ++i) values_[i] += other.values_[i];
    }
    void scale(T s) {
        for (auto& v : values_) v *= s;
    }
    bool operator==(const ParamBlock&) const = default;

private:
    std::vector<T> values_;
};

template <typename T>
class GeneratorParams : public ParamBlock<T, kGeneratorTensors.size(), kGeneratorTensors> {
public:
    using Base = ParamBlock<T, kGeneratorTensors.size(), kGeneratorTensors>;
    GeneratorParams() = default;
    GeneratorParams(Base b) : Base(std::move(b)) {}

    std::span<T> conv3d_1_weight() { return this->tensor(0); }
    std::span<T> conv3d_1_bias() { return this->tensor(1); }
    std::span<T> conv3d_2_weight() { return this->tensor(2); }
    std::span<T> conv3d_2_bias() { return this->tensor(3); }
    std::span<T> conv2d_1_weight() { return this->tensor(4); }
    std::span<T> conv2d_1_bias() { return this->tensor(5); }
    std::span<T> conv2d_2_weight() { return this->tensor(6); }
    std::span<T> conv2d_2_bias() { return this->tensor(7); }
    std::span<const T> conv3d_1_weight() const { return this->tensor(0); }
    std::span<const T> conv3d_1_bias() const { return this->tensor(1); }
    std::span<const T> conv3d_2_weight() const { return this->tensor(2); }
    std::span<const T> conv3d_2_bias() const { return this->tensor(3); }
    std::span<const T> conv2d_1_weight() const { return this->tensor(4); }
    std::span<const T> conv2d_1_bias() const { return this->tensor(5); }
    std::span<const T> conv2d_2_weight() const { return this->tensor(6); }
    std::span<const T> conv2d_2_bias() const { return this->tensor(7); }

    template <typename U>
    GeneratorParams<U> cast() const { return GeneratorParams<U>(Base::template cast<U>()); }
};

template <typename T>
class DiscriminatorParams : public ParamBlock<T, kDiscriminatorTensors.size(), kDiscriminatorTensors> {
public:
    using Base = ParamBlock<T, kDiscriminatorTensors.size(), kDiscriminatorTensors>;
    DiscriminatorParams() = default;
    DiscriminatorParams(Base b) : Base(std::move(b)) {}

    std::span<T> conv_1_weight() { return this->tensor(0); }
    std::span<T> conv_1_bias() { return this->tensor(1); }
    std::span<T> conv_2_weight() { return this->tensor(2); }
    std::span<T> conv_2_bias() { return this->tensor(3); }
    std::span<T> fc_1_weight() { return this->tensor(4); }
    std::span<T> fc_1_bias() { return this->tensor(5); }
    std::span<T> fc_2_weight() { return this->tensor(6); }
    std::span<T> fc_2_bias() { return this->tensor(7); }
    std::span<T> fc_3_weight() { return this->tensor(8); }
    std::span<T> fc_3_bias() { return this->tensor(9); }
    std::span<const T> conv_1_weight() const { return this->tensor(0); }
    std::span<const T> conv_1_bias() const { return this->tensor(1); }
    std::span<const T> conv_2_weight() const { return this->tensor(2); }
    std::span<const T> conv_2_bias() const { return this->tensor(3); }
    std::span<const T> fc_1_weight() const { return this->tensor(4); }
    std::span<const T> fc_1_bias() const { return this->tensor(5); }
    std::span<const T> fc_2_weight() const { return this->tensor(6); }
    std::span<const T> fc_2_bias() const { return this->tensor(7); }
    std::span<const T> fc_3_weight() const { return this->tensor(8); }
    std::span<const T> fc_3_bias() const { return this->tensor(9); }

    template <typename U>
    DiscriminatorParams<U> cast() const { return DiscriminatorParams<U>(Base::template cast<U>()); }
};

/// Activations kept by a forward pass for the matching backward pass.
template <typename T>
struct GeneratorCache {
    int nx = 0;
    int ny = 0;
    std::vector<T> input;  // [8][ny][nx]
    std::vector<T> h1;     // [8 ch][6][ny][nx], post-ReLU
    std::vector<T> h2;     // [8 ch][4][ny][nx] == [32][ny][nx], post-ReLU
    std::vector<T> h3;     // [16][ny][nx], post-ReLU
    bool valid = false;
};

template <typename T>
struct DiscriminatorCache {
    int nx = 0;
    int ny = 0;
    std::vector<T> input;
    std::vector<T> a1;      // [8][ny][nx]
    std::vector<T> a2;      // [8][ny][nx]
    std::vector<T> pooled;  // [1152]
    std::vector<T> f1;      // [8]
    std::vector<T> f2;      // [8]
    double output = 0.0;
    bool valid = false;
};

/// Maps an 8-slice subvolume ([8][ny][nx], x fastest) to one [ny][nx] slice.
template <typename T>
std::vector<T> generator_forward(const GeneratorParams<T>& p, std::span<const T> input, int nx, int ny,
                                 GeneratorCache<T>* cache = nullptr);

/// Adds d<upstream, G(input)>/d(params) into `grad`.
template <typename T>
void generator_backward(const GeneratorParams<T>& p, const GeneratorCache<T>& cache, std::span<const T> upstream,
                        GeneratorParams<T>& grad);

template <typename T>
GeneratorParams<T> generator_backward(const GeneratorParams<T>& p, const GeneratorCache<T>& cache,
                                      std::span<const T> upstream);

/// Probability in (0, 1) that `slice` ([ny][nx]) is a clean slice.
template <typename T>
double discriminator_forward(const DiscriminatorParams<T>& p, std::span<const T> slice, int nx, int ny,
                             DiscriminatorCache<T>* cache = nullptr);

/// Adds upstream * dD/d(params) into `grad` (when non-null) and writes
/// upstream * dD/d(slice) into `input_grad` (when non-null).
template <typename T>
void discriminator_backward(const DiscriminatorParams<T>& p, const DiscriminatorCache<T>& cache, double upstream,
                            DiscriminatorParams<T>* grad, std::vector<T>* input_grad);

/// He-normal weights (std sqrt(2 / fan_in)), zero biases. The generator is
/// drawn first, then the discriminator, from one seeded stream.
template <typename T>
std::pair<GeneratorParams<T>, DiscriminatorParams<T>> init_params(std::uint64_t seed);

// Serialization: "SVNNPARM", u32 version, u32 header length, a text header
// (kind, count, one "tensor=name:AxBxC" line per field), then the parameters as
// little-endian float32 in declared field order.
void write_params(std::ostream& out, const GeneratorParams<float>& p);
void write_params(std::ostream& out, const DiscriminatorParams<float>& p);
GeneratorParams<float> read_generator_params(std::istream& in);
DiscriminatorParams<float> read_discriminator_params(std::istream& in);

}  // namespace svct::nn
