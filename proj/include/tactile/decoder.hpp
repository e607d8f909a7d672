#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tactile/afferents.hpp"
#include "tactile/experiments.hpp"

namespace tactile {

struct ConvStage {
    int kernel = 3;
    int channels = 8;
    int stride = 1;
    bool operator==(const ConvStage&) const = default;
};

enum class Activation { relu, tanh, linear };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DecoderConfig {
    std::vector<ConvStage> conv = {{5, 8, 1}, {3, 16, 2}};
    int hidden = 64;  // 0 drops the hidden dense layer
    Activation activation = Activation::relu;
    double learning_rate = 0.003;
    double momentum = 0.9;
    int batch_size = 32;
    int epochs = 150;
    int patience = 10;
    // Network output is multiplied by this to give degrees, so weights and
    // the learning rate work on unit-order targets.
    double label_scale = 90.0;
    std::uint64_t init_seed = 1;

    // Tiny network used by the gradient check.
    static DecoderConfig tiny();
    void validate() const;
    bool operator==(const DecoderConfig&) const = default;
};

struct Normalization {
    double mean = 0.0;
    double scale = 1.0;
    bool operator==(const Normalization&) const = default;
};

struct DecoderModel {
    AfferentKind kind = AfferentKind::SA1;
    DecoderConfig config;
    Normalization norm;
    std::vector<double> params;
    std::uint64_t training_seed = 0;
};

struct TrainReport {
    std::vector<double> train_loss;  // deg^2 per epoch
    std::vector<double> val_loss;    // deg^2 per epoch
    double val_mae = 0.0;            // deg, best model
    int epochs_run = 0;
    int best_epoch = 0;
    double first_batch_loss = 0.0;   // deg^2 of the initial network on the first batch
};

// Shape bookkeeping for a config: total parameter count.
std::size_t parameter_count(const DecoderConfig& config);

Normalization compute_normalization(const std::vector<const Image32*>& images);

DecoderModel initialize_model(const DecoderConfig& config, AfferentKind kind, const Normalization& norm,
                              std::uint64_t seed);

double predict(const DecoderModel& model, const TactileImage& image);
double predict(const DecoderModel& model, const Image32& image);

// Mean squared error in deg^2 over images and labels.
double evaluate_loss(const DecoderModel& model, const std::vector<const Image32*>& images,
                     const std::vector<double>& labels);

// Order in which training samples are visited during one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

struct TrainResult {
    DecoderModel model;
    TrainReport report;
};

TrainResult train(const Dataset& dataset, AfferentKind kind, const DecoderConfig& config, std::uint64_t seed);
// Same, on explicit image / label lists.
TrainResult train(const std::vector<const Image32*>& train_images, const std::vector<double>& train_labels,
                  const std::vector<const Image32*>& val_images, const std::vector<double>& val_labels,
                  AfferentKind kind, const DecoderConfig& config, std::uint64_t seed);

// Analytic vs central-difference gradients on a small random batch;
// relative error |a - n| / max(|a|, |n|, 1e-7).
double gradient_check(const DecoderConfig& config, std::uint64_t seed);

void save_model(const DecoderModel& model, const std::string& path);
DecoderModel load_model(const std::string& path);

void write_train_report_csv(const std::string& path, const TrainReport& report);

}  // namespace tactile
