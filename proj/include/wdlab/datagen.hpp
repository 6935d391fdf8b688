#pragma once

#include <cstdint>
#include <string>

#include "wdlab/merging.hpp"
#include "wdlab/model.hpp"

namespace wdlab::datagen {

using merging::TaskPair;
using model::Dataset;
using linalg::Vector;

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskSpec {
    std::size_t d = 0;                    // ambient dimension
    std::size_t n = 0;                    // sample count
    std::vector<std::size_t> subspace;    // coordinate indices carrying the data
    double label_freq = 1.0;              // c in f*(x) = sin(c W^T x)
    std::uint64_t seed = 0;
};

// Inputs drawn Gaussian on each task's coordinate subspace, normalized to the
// unit sphere; labels sign(sin(c <W, x>)) with a task-specific W ~ N(0, I_d)
// and sign(0) mapped to +1.
TaskPair gen_task_pair(const TaskSpec& spec_a, const TaskSpec& spec_b);
Dataset gen_task(const TaskSpec& spec);

// Zero-pad orthogonalization: doubles the dimension; task a inputs are
// zero-appended, task b zero-prepended, so cross epsilon is exactly 0.
TaskPair pad_orthogonalize(const Dataset& a, const Dataset& b,
                           bool invert_b_labels = false);

struct IdxTensor {
    std::vector<std::size_t> dims;
    std::vector<double> values;  // images scaled to [0, 1], labels as raw values
    bool is_labels = false;
};

IdxTensor load_idx(const std::string& path);

// 10-class labels collapsed to binary: classes 0-4 -> -1, 5-9 -> +1.
std::vector<int> binarize_labels(const IdxTensor& labels);

// Flattens IDX images into a Dataset with the supplied binary labels.
Dataset idx_to_dataset(const IdxTensor& images, const std::vector<int>& labels);

void export_csv(const Dataset& data, const std::string& path);

}  // namespace wdlab::datagen
