#include "svct/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "svct/error.hpp"

namespace svct {

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("train: epochs must be >= 1");
    if (batch_size < 1) throw Error("train: batch size must be >= 1");
    if (disc_every < 1) throw Error("train: disc_every must be >= 1");
    if (!(lr_g > 0) || !std::isfinite(lr_g)) throw Error("train: lr_g must be > 0");
    if (!(lr_d > 0) || !std::isfinite(lr_d)) throw Error("train: lr_d must be > 0");
}

std::size_t RoiMask2D::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

namespace {

template <typename T>
double masked_mse_impl(std::span<const T> pred, std::span<const T> gt, const RoiMask2D& mask) {
    if (pred.size() != gt.size() || pred.size() != mask.data.size()) throw ShapeError("masked_mse: shape mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask.data[i]) continue;
        const double d = double(pred[i]) - double(gt[i]);
        acc += d * d;
        ++n;
    }
    if (n == 0) throw Error("masked_mse: empty mask");
    return acc / static_cast<double>(n);
}

template <typename T>
void check_example(const TrainingExample<T>& ex) {
    const std::size_t plane = static_cast<std::size_t>(ex.nx) * ex.ny;
    if (ex.input.size() != plane * nn::kGenDepth || ex.target.size() != plane || ex.roi.data.size() != plane ||
        ex.roi.nx != ex.nx || ex.roi.ny != ex.ny) {
        throw ShapeError("training example: inconsistent shapes");
    }
    if (ex.roi.count() == 0) throw Error("training example: empty ROI");
}

// Forward and backward for the generator loss. Fills `preds` with G(input)
// when non-null.
template <typename T>
GeneratorLoss<T> generator_pass(const nn::GeneratorParams<T>& gen, const nn::DiscriminatorParams<T>& disc,
                                std::span<const TrainingExample<T>> batch, std::vector<std::vector<T>>* preds) {
    const int b = static_cast<int>(batch.size());
    if (b == 0) throw Error("generator_loss: empty batch");
    for (const auto& ex : batch) check_example(ex);

    std::vector<nn::GeneratorCache<T>> gcache(b);
    std::vector<nn::DiscriminatorCache<T>> dcache(b);
    std::vector<std::vector<T>> out(b);
    std::vector<double> mse(b), d_out(b);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < b; ++i) {
        const auto& ex = batch[i];
        out[i] = nn::generator_forward<T>(gen, ex.input, ex.nx, ex.ny, &gcache[i]);
        mse[i] = masked_mse_impl<T>(out[i], ex.target, ex.roi);
        d_out[i] = nn::discriminator_forward<T>(disc, out[i], ex.nx, ex.ny, &dcache[i]);
    }

    GeneratorLoss<T> result;
    result.mse = std::accumulate(mse.begin(), mse.end(), 0.0) / b;
    result.mean_d = std::accumulate(d_out.begin(), d_out.end(), 0.0) / b;
    result.lambda = lambda_schedule(result.mse);
    result.loss = -result.lambda * result.mean_d + result.mse;

    std::vector<nn::GeneratorParams<T>> grads(b);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < b; ++i) {
        const auto& ex = batch[i];
        std::vector<T> upstream;
        nn::discriminator_backward<T>(disc, dcache[i], -result.lambda / b, nullptr, &upstream);
        const double scale = 2.0 / (static_cast<double>(b) * static_cast<double>(ex.roi.count()));
        for (std::size_t k = 0; k < upstream.size(); ++k) {
            if (ex.roi.data[k]) upstream[k] += static_cast<T>(scale * (double(out[i][k]) - double(ex.target[k])));
        }
        nn::generator_backward<T>(gen, gcache[i], upstream, grads[i]);
    }
    for (int i = 0; i < b; ++i) result.grad.add(grads[i]);
    if (preds) *preds = std::move(out);
    return result;
}

template <typename T>
DiscriminatorLoss<T> discriminator_pass(const nn::DiscriminatorParams<T>& disc,
                                        std::span<const TrainingExample<T>> batch,
                                        const std::vector<std::vector<T>>& fakes) {
    const int b = static_cast<int>(batch.size());
    std::vector<nn::DiscriminatorParams<T>> grads(b);
    std::vector<double> terms(b);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < b; ++i) {
        const auto& ex = batch[i];
        nn::DiscriminatorCache<T> cache;
        const double d_fake = nn::discriminator_forward<T>(disc, fakes[i], ex.nx, ex.ny, &cache);
        nn::discriminator_backward<T>(disc, cache, 2.0 * d_fake / b, &grads[i], nullptr);
        const double d_real = nn::discriminator_forward<T>(disc, ex.target, ex.nx, ex.ny, &cache);
        nn::discriminator_backward<T>(disc, cache, 2.0 * (d_real - 1.0) / b, &grads[i], nullptr);
        terms[i] = d_fake * d_fake + (d_real - 1.0) * (d_real - 1.0);
    }
    DiscriminatorLoss<T> result;
    result.loss = std::accumulate(terms.begin(), terms.end(), 0.0) / b;
    for (int i = 0; i < b; ++i) result.grad.add(grads[i]);
    return result;
}

}  // namespace

double masked_mse(std::span<const float> pred, std::span<const float> gt, const RoiMask2D& mask) {
    return masked_mse_impl(pred, gt, mask);
}

double masked_mse(std::span<const double> pred, std::span<const double> gt, const RoiMask2D& mask) {
    return masked_mse_impl(pred, gt, mask);
}

double lambda_schedule(double r) {
    if (!std::isfinite(r) || r < 0.0) throw NumericError("lambda_schedule: r must be finite and >= 0");
    if (r < kLambdaFloor) return kLambdaFloor;
    return std::pow(10.0, std::floor(std::log10(r)));
}

template <typename T>
GeneratorLoss<T> generator_loss(const nn::GeneratorParams<T>& gen, const nn::DiscriminatorParams<T>& disc,
                                std::span<const TrainingExample<T>> batch) {
    return generator_pass<T>(gen, disc, batch, nullptr);
}

template <typename T>
DiscriminatorLoss<T> discriminator_loss(const nn::DiscriminatorParams<T>& disc, const nn::GeneratorParams<T>& gen,
                                        std::span<const TrainingExample<T>> batch) {
    if (batch.empty()) throw Error("discriminator_loss: empty batch");
    for (const auto& ex : batch) check_example(ex);
    std::vector<std::vector<T>> fakes(batch.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
        fakes[i] = nn::generator_forward<T>(gen, batch[i].input, batch[i].nx, batch[i].ny);
    }
    return discriminator_pass<T>(disc, batch, fakes);
}

template GeneratorLoss<float> generator_loss(const nn::GeneratorParams<float>&, const nn::DiscriminatorParams<float>&,
                                             std::span<const TrainingExample<float>>);
template GeneratorLoss<double> generator_loss(const nn::GeneratorParams<double>&,
                                              const nn::DiscriminatorParams<double>&,
                                              std::span<const TrainingExample<double>>);
template DiscriminatorLoss<float> discriminator_loss(const nn::DiscriminatorParams<float>&,
                                                     const nn::GeneratorParams<float>&,
                                                     std::span<const TrainingExample<float>>);
template DiscriminatorLoss<double> discriminator_loss(const nn::DiscriminatorParams<double>&,
                                                      const nn::GeneratorParams<double>&,
                                                      std::span<const TrainingExample<double>>);

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        params[i] = static_cast<float>(params[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
}

std::vector<TrainingExample<float>> make_training_examples(const Volume3D& stage_input, const Volume3D& gt,
                                                           const Mask3D& roi, double intensity_scale) {
    if (!(stage_input.dims() == gt.dims()) || !(roi.dims == gt.dims())) {
        throw ShapeError("make_training_examples: stage input, ground truth and ROI dims differ");
    }
    if (!(intensity_scale > 0) || !std::isfinite(intensity_scale)) {
        throw Error("make_training_examples: intensity scale must be > 0");
    }
    const Dims3 d = gt.dims();
    const auto inputs = extract_subvolumes(stage_input, nn::kGenDepth, std::min(d.nx, d.ny));
    const float s = static_cast<float>(intensity_scale);
    const std::size_t plane = static_cast<std::size_t>(d.nx) * d.ny;

    std::vector<TrainingExample<float>> out;
    out.reserve(inputs.size());
    for (const auto& sub : inputs) {
        if (sub.nx != d.nx || sub.ny != d.ny) throw ShapeError("make_training_examples: training grid must be square");
        TrainingExample<float> ex;
        ex.nx = sub.nx;
        ex.ny = sub.ny;
        ex.input = sub.data;
        for (float& v : ex.input) v *= s;
        const float* t = gt.slice_data(sub.z_center);
        ex.target.assign(t, t + plane);
        for (float& v : ex.target) v *= s;
        ex.roi.nx = d.nx;
        ex.roi.ny = d.ny;
        const auto* m = roi.data.data() + plane * sub.z_center;
        ex.roi.data.assign(m, m + plane);
        if (ex.roi.count() == 0) continue;
        out.push_back(std::move(ex));
    }
    if (out.empty()) throw Error("make_training_examples: no valid centre has a nonempty ROI");
    return out;
}

TrainedStage train_stage(std::span<const TrainingExample<float>> examples, const TrainConfig& cfg,
                         const TrainedStage* initial) {
    cfg.validate();
    if (examples.empty()) throw Error("train_stage: no training examples");
    for (const auto& ex : examples) check_example(ex);

    auto [gen, disc] = nn::init_params<float>(cfg.seed);
    if (initial) {
        gen = initial->gen;
        disc = initial->disc;
    }
    Adam adam_g(gen.size(), cfg.lr_g);
    Adam adam_d(disc.size(), cfg.lr_d);
    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);

    const std::size_t n = examples.size();
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainedStage out;
    long long gen_steps = 0;
    std::vector<TrainingExample<float>> batch;
    std::vector<std::vector<float>> fakes;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t stop = std::min(n, start + bs);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(examples[order[k]]);

            auto gl = generator_pass<float>(gen, disc, batch, &fakes);
            if (!std::isfinite(gl.loss)) {
                throw NumericError("train_stage: non-finite generator loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(start / bs));
            }
            adam_g.step(gen.values(), gl.grad.values());
            ++gen_steps;
            out.history.gen_loss.push_back(gl.loss);
            out.history.mse.push_back(gl.mse);
            out.history.lambda.push_back(gl.lambda);

            if (gen_steps % cfg.disc_every == 0) {
                auto dl = discriminator_pass<float>(disc, batch, fakes);
                if (!std::isfinite(dl.loss)) {
                    throw NumericError("train_stage: non-finite discriminator loss at epoch " +
                                       std::to_string(epoch) + " batch " + std::to_string(start / bs));
                }
                adam_d.step(disc.values(), dl.grad.values());
                out.history.disc_loss.push_back(dl.loss);
            }
        }
    }
    out.gen = std::move(gen);
    out.disc = std::move(disc);
    return out;
}

double mean_masked_mse(const nn::GeneratorParams<float>& gen, std::span<const TrainingExample<float>> examples) {
    if (examples.empty()) throw Error("mean_masked_mse: no examples");
    std::vector<double> mse(examples.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(examples.size()); ++i) {
        const auto& ex = examples[i];
        const auto pred = nn::generator_forward<float>(gen, ex.input, ex.nx, ex.ny);
        mse[i] = masked_mse_impl<float>(pred, ex.target, ex.roi);
    }
    return std::accumulate(mse.begin(), mse.end(), 0.0) / static_cast<double>(mse.size());
}

}  // namespace svct
