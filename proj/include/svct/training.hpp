#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "svct/metrics.hpp"
#include "svct/nn.hpp"
#include "svct/patching.hpp"
#include "svct/volume.hpp"

namespace svct {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 6;
    int disc_every = 10;
    double lr_g = 1e-3;
    double lr_d = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// Region of interest on one training slice (1 = counted).
struct RoiMask2D {
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> data;

    std::size_t count() const;
};

/// Mean of (pred - gt)^2 over mask-true pixels. Throws on an empty mask.
double masked_mse(std::span<const float> pred, std::span<const float> gt, const RoiMask2D& mask);
double masked_mse(std::span<const double> pred, std::span<const double> gt, const RoiMask2D& mask);

inline constexpr double kLambdaFloor = 1e-8;

/// 10^floor(log10 r). r below kLambdaFloor (including 0) gives kLambdaFloor;
/// negative or non-finite r throws.
double lambda_schedule(double r);

/// One training pair: an 8-slice input slab, its clean central slice and the
/// slice ROI.
template <typename T>
struct TrainingExample {
    int nx = 0;
    int ny = 0;
    std::vector<T> input;   // [depth][ny][nx]
    std::vector<T> target;  // [ny][nx]
    RoiMask2D roi;
};

template <typename T>
struct GeneratorLoss {
    double loss = 0.0;
    double mse = 0.0;      // r, the batch mean of masked_mse
    double lambda = 0.0;
    double mean_d = 0.0;   // batch mean of D(G(input))
    nn::GeneratorParams<T> grad;
};

template <typename T>
struct DiscriminatorLoss {
    double loss = 0.0;
    nn::DiscriminatorParams<T> grad;
};

/// L_G = -lambda * mean D(G(x)) + mean masked_mse(G(x), gt), lambda from the
/// batch's MSE term and held constant for differentiation.
template <typename T>
GeneratorLoss<T> generator_loss(const nn::GeneratorParams<T>& gen, const nn::DiscriminatorParams<T>& disc,
                                std::span<const TrainingExample<T>> batch);

/// L_D = mean D(G(x))^2 + mean (D(gt) - 1)^2 with the generator held fixed.
template <typename T>
DiscriminatorLoss<T> discriminator_loss(const nn::DiscriminatorParams<T>& disc, const nn::GeneratorParams<T>& gen,
                                        std::span<const TrainingExample<T>> batch);

/// Adam with bias correction over a flat float parameter vector.
class Adam {
public:
    Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(std::span<float> params, std::span<const float> grad);
    long long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<double> m_, v_;
};

struct TrainHistory {
    std::vector<double> gen_loss;   // one entry per generator update
    std::vector<double> mse;
    std::vector<double> lambda;
    std::vector<double> disc_loss;  // one entry per discriminator update
};

struct TrainedStage {
    nn::GeneratorParams<float> gen;
    nn::DiscriminatorParams<float> disc;
    TrainHistory history;
};

/// Training pairs for every valid centre. Input and target are multiplied
/// by `intensity_scale`; the ROI is the matching slice of `roi`.
std::vector<TrainingExample<float>> make_training_examples(const Volume3D& stage_input, const Volume3D& gt,
                                                           const Mask3D& roi, double intensity_scale);

/// Greedy stage training: one generator Adam step per shuffled batch, one
/// discriminator step after every disc_every-th generator step (counted
/// across epochs). Starts from `initial` when given, else from
/// init_params(cfg.seed); cfg.seed also drives the shuffling.
TrainedStage train_stage(std::span<const TrainingExample<float>> examples, const TrainConfig& cfg,
                         const TrainedStage* initial = nullptr);

/// Batch mean of masked_mse(G(input), target).
double mean_masked_mse(const nn::GeneratorParams<float>& gen, std::span<const TrainingExample<float>> examples);

}  // namespace svct
