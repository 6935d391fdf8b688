#include "wdlab/datagen.hpp"

#include <cmath>
#include <fstream>

#include "wdlab/rng.hpp"

namespace wdlab::datagen {

using model::InvalidInput;

Dataset gen_task(const TaskSpec& spec) {
    if (spec.subspace.empty()) throw InvalidInput("gen_task: empty subspace");
    if (spec.n < 1) throw InvalidInput("gen_task: n must be >= 1");
    if (spec.label_freq <= 0.0) throw InvalidInput("gen_task: label_freq must be > 0");
    for (auto idx : spec.subspace)
        if (idx >= spec.d) throw InvalidInput("gen_task: subspace index out of range");

    Rng rng(spec.seed);
    Rng w_stream = rng.split(0);
    Rng x_stream = rng.split(1);

    Vector W(spec.d);
    for (auto& v : W.data) v = w_stream.normal();

    Dataset data;
    for (std::size_t i = 0; i < spec.n; ++i) {
        Vector x(spec.d);
        double n2 = 0.0;
        while (n2 == 0.0) {
            for (auto idx : spec.subspace) {
                x[idx] = x_stream.normal();
                n2 += x[idx] * x[idx];
            }
        }
        linalg::scale(x, 1.0 / std::sqrt(n2));
        double fstar = std::sin(spec.label_freq * linalg::dot(W, x));
        data.labels.push_back(fstar >= 0.0 ? 1 : -1);  // sigmoid(f*) >= 1/2 iff f* >= 0
        data.inputs.push_back(std::move(x));
    }
    return data;
}

TaskPair gen_task_pair(const TaskSpec& spec_a, const TaskSpec& spec_b) {
    if (spec_a.d != spec_b.d) throw InvalidInput("gen_task_pair: ambient dims differ");
    TaskPair pair;
    pair.data_a = gen_task(spec_a);
    pair.data_b = gen_task(spec_b);
    pair.epsilon = merging::cross_task_epsilon(pair.data_a.inputs, pair.data_b.inputs);
    return pair;
}

TaskPair pad_orthogonalize(const Dataset& a, const Dataset& b, bool invert_b_labels) {
    if (a.size() == 0 || b.size() == 0) throw InvalidInput("pad_orthogonalize: empty dataset");
    std::size_t d = a.inputs[0].dim();
    for (const auto& x : a.inputs)
        if (x.dim() != d) throw InvalidInput("pad_orthogonalize: ragged inputs");
    for (const auto& x : b.inputs)
        if (x.dim() != d) throw InvalidInput("pad_orthogonalize: input dim mismatch");

    TaskPair pair;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Vector x(2 * d);
        for (std::size_t j = 0; j < d; ++j) x[j] = a.inputs[i][j];  // zeros appended
        pair.data_a.inputs.push_back(std::move(x));
        pair.data_a.labels.push_back(a.labels[i]);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        Vector x(2 * d);
        for (std::size_t j = 0; j < d; ++j) x[d + j] = b.inputs[i][j];  // zeros prepended
        pair.data_b.inputs.push_back(std::move(x));
        pair.data_b.labels.push_back(invert_b_labels ? -b.labels[i] : b.labels[i]);
    }
    pair.epsilon = 0.0;
    return pair;
}

namespace {

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t off) {
    if (off + 4 > buf.size())
        throw FormatError("load_idx: truncated file at byte offset " + std::to_string(off));
    return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
           (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

}  // namespace

IdxTensor load_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_idx: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    std::uint32_t magic = be32(buf, 0);
    IdxTensor out;
    std::size_t ndim;
    if (magic == 0x00000803u) {
        ndim = 3;
    } else if (magic == 0x00000801u) {
        ndim = 1;
        out.is_labels = true;
    } else {
        throw FormatError("load_idx: wrong magic at byte offset 0");
    }
    std::size_t off = 4;
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        std::uint32_t dim = be32(buf, off);
        off += 4;
        out.dims.push_back(dim);
        total *= dim;
    }
    if (off + total > buf.size())
        throw FormatError("load_idx: truncated data at byte offset " + std::to_string(off));
    out.values.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        double raw = static_cast<double>(buf[off + i]);
        out.values.push_back(out.is_labels ? raw : raw / 255.0);
    }
    return out;
}

std::vector<int> binarize_labels(const IdxTensor& labels) {
    if (!labels.is_labels) throw InvalidInput("binarize_labels: not a label tensor");
    std::vector<int> out;
    for (double v : labels.values) out.push_back(v < 5.0 ? -1 : 1);
    return out;
}

Dataset idx_to_dataset(const IdxTensor& images, const std::vector<int>& labels) {
    if (images.is_labels || images.dims.size() != 3)
        throw InvalidInput("idx_to_dataset: not an image tensor");
    std::size_t n = images.dims[0];
    std::size_t pix = images.dims[1] * images.dims[2];
    if (labels.size() != n) throw InvalidInput("idx_to_dataset: label count mismatch");
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        Vector x(pix);
        for (std::size_t j = 0; j < pix; ++j) x[j] = images.values[i * pix + j];
        data.inputs.push_back(std::move(x));
        data.labels.push_back(labels[i]);
    }
    return data;
}

void export_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("export_csv: cannot write " + path);
    out.precision(17);
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.labels[i];
        for (double v : data.inputs[i].data) out << ',' << v;
        out << '\n';
    }
}

}  // namespace wdlab::datagen
