#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "wdlab/linalg.hpp"

namespace wdlab::inspect {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

struct Tensor {
    DType dtype = DType::f64;
    std::vector<std::uint64_t> shape;
    std::vector<double> values;  // widened to double in memory

    bool is_matrix() const { return shape.size() == 2; }
};

struct CheckpointMeta {
    int K = 0;
    int H = 1;
    std::vector<std::size_t> widths;
    std::string activation;
    double lambda = 0.0;
    double eta = 0.0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
};

struct Checkpoint {
    std::vector<std::pair<std::string, Tensor>> tensors;  // insertion order
    std::optional<CheckpointMeta> meta;
    std::vector<std::string> skipped;  // unsupported-dtype tensor names

    const Tensor* find(const std::string& name) const;
};

// Native "NWT1" container plus a path.meta.json sidecar when meta is present.
void write_native(const std::string& path, const Checkpoint& ckpt);

// Auto-detects the native container or a safetensors subset (F64/F32/F16/BF16,
// half types widened by IEEE rules; other dtypes collected in `skipped`).
Checkpoint read_checkpoint(const std::string& path);

struct LayerReportRow {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double fro_norm = 0.0;
    double spec_norm = 0.0;
    double stable_rank = 0.0;
    std::string group;
};

struct LayerGroup {
    std::string name;
    std::vector<std::string> members;  // exact tensor names, concatenated along rows
};

struct LayerReport {
    std::vector<LayerReportRow> rows;
    std::vector<std::string> skipped_1d;

    std::string to_csv() const;  // header "name,rows,cols,fro_norm,spec_norm,stable_rank,group"
    std::string to_json() const;
};

LayerReport layer_report(const Checkpoint& ckpt,
                         const std::vector<LayerGroup>& groups = {});

}  // namespace wdlab::inspect
