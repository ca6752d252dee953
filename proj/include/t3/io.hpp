#pragma once

#include <string>
#include <vector>

#include "t3/errors.hpp"
#include "t3/synthdata.hpp"
#include "t3/tensor3.hpp"
#include "t3/trainer.hpp"

namespace t3 {

/// T3B binary tensor format: magic "T3B1", three unsigned 32-bit little-endian
/// dims, then n1*n2*n3 little-endian doubles in slice-major row-major order.
void write_t3b(const std::string& path, const Tensor3& t);
Tensor3 read_t3b(const std::string& path);

/// Everything a training run needs: hyperparameters plus the parametric
/// description of the synthetic domains.
struct RunConfig {
    TrainConfig train;

    int num_classes = 5;
    int input_dim = 16;
    int samples_per_domain = 2000;
    double cluster_std = 0.25;
    double center_radius = 1.0;
    double translation_scale = 0.1;
    /// Classes 0 and 1 are pulled together to this fraction of their natural
    /// distance; 1 leaves them untouched. A genuinely confusable pair keeps
    /// the similarity kernel informative.
    double confusable_gap = 1.0;
    std::vector<double> source_angles = {0.0, 0.35, 0.7};
    double target_angle = 1.05;
    std::vector<double> label_noise = {0.25, 0.0, 0.0};  // per source
    std::string output_dir = "out";

    /// Materializes the domain specs (sources first, target last); the class
    /// geometry and per-domain translations derive from the training seed.
    std::vector<DomainSpec> make_specs() const;
    DomainDataset make_dataset() const;
    void validate() const;
};

/// Parses a flat `key = value` file with '#' comments. Unknown keys are
/// rejected; all invariants are re-validated.
RunConfig load_run_config(const std::string& path);

/// The defaults above as a commented config file.
std::string default_config_text();

/// Model checkpoint: one T3B file per parameter tensor inside `dir`.
void save_model(const std::string& dir, const ModelParams& params);
ModelParams load_model(const std::string& dir);

/// Prototype bank as two tensors: protos (C x feat x M+1) and validity flags
/// (C x 1 x M+1).
void save_bank(const std::string& dir, const PrototypeBank& bank);

/// CSV with header x0,...,x{d-1},label.
void write_domain_csv(const std::string& path, const DomainData& data);

std::string metrics_json_line(const MetricsRow& row);

}  // namespace t3
