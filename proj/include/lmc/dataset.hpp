#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmc/errors.hpp"

namespace lmc {

// Immutable slice of examples with a content hash. Inputs are flat row-major
// doubles; classification slices carry integer labels, regression slices
// carry target vectors.
class DatasetSlice {
public:
    static DatasetSlice classification(std::vector<double> inputs, size_t input_dim,
                                       std::vector<int> labels, int num_classes);
    static DatasetSlice regression(std::vector<double> inputs, size_t input_dim,
                                   std::vector<double> targets, size_t target_dim);

    size_t size() const { return n_; }
    size_t input_dim() const { return input_dim_; }
    const double* input(size_t i) const { return inputs_.data() + i * input_dim_; }

    bool is_classification() const { return !labels_.empty(); }
    int label(size_t i) const { return labels_[i]; }
    int num_classes() const { return num_classes_; }

    size_t target_dim() const { return target_dim_; }
    const double* target(size_t i) const { return targets_.data() + i * target_dim_; }

    // dimension of what the network must output for this slice
    size_t output_dim() const {
        return is_classification() ? static_cast<size_t>(num_classes_) : target_dim_;
    }

    uint64_t id() const { return id_; }

private:
    DatasetSlice() = default;
    void compute_id();

    size_t n_ = 0;
    size_t input_dim_ = 0;
    std::vector<double> inputs_;
    std::vector<int> labels_;
    int num_classes_ = 0;
    std::vector<double> targets_;
    size_t target_dim_ = 0;
    uint64_t id_ = 0;
};

// Seeded synthetic generators.
DatasetSlice make_two_gaussians(size_t n, uint64_t seed, double separation = 3.0);
DatasetSlice make_spiral(size_t n, int classes, uint64_t seed, double noise = 0.2);

// IDX (MNIST-style) binary files. Pixels are scaled to [0,1].
DatasetSlice load_idx(const std::string& images_path, const std::string& labels_path);

// Seeded, class-stratified subset; subset_size must be divisible by the class
// count and each class must hold enough examples.
DatasetSlice stratified_subset(const DatasetSlice& source, size_t subset_size,
                               uint64_t seed);

// Descriptor string dispatch used by configs:
//   "two_gaussians:n=..,seed=.."
//   "spiral:n=..,classes=..,seed=..,noise=.."
//   "idx:images=..,labels=.."
// optional ",subset=..,subset_seed=.." on any of them.
DatasetSlice load_dataset(const std::string& descriptor);

}  // namespace lmc
