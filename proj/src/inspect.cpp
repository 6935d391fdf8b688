#include "wdlab/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wdlab::inspect {

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t off = 0;

    void need(std::size_t n, const char* what) const {
        if (n > buf.size() || off > buf.size() - n)
            throw FormatError(std::string("checkpoint: truncated ") + what +
                              " at byte offset " + std::to_string(off));
    }
    std::uint16_t u16() {
        need(2, "u16");
        std::uint16_t v = buf[off] | (std::uint16_t(buf[off + 1]) << 8);
        off += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[off + i]) << (8 * i);
        off += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8, "u64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[off + i]) << (8 * i);
        off += 8;
        return v;
    }
};

double half_to_double(std::uint16_t h) {
    std::uint32_t sign = (h >> 15) & 1;
    std::uint32_t exp = (h >> 10) & 0x1f;
    std::uint32_t frac = h & 0x3ff;
    double v;
    if (exp == 0) {
        v = std::ldexp(static_cast<double>(frac), -24);
    } else if (exp == 31) {
        v = frac == 0 ? std::numeric_limits<double>::infinity()
                      : std::numeric_limits<double>::quiet_NaN();
    } else {
        v = std::ldexp(1.0 + frac / 1024.0, static_cast<int>(exp) - 15);
    }
    return sign ? -v : v;
}

double bf16_to_double(std::uint16_t h) {
    std::uint32_t bits = std::uint32_t(h) << 16;
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

double f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= std::uint32_t(p[i]) << (8 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

double f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checkpoint read_native(const std::vector<unsigned char>& buf) {
    Reader r{buf, 4};
    Checkpoint ckpt;
    std::uint32_t count = r.u32();
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint16_t name_len = r.u16();
        r.need(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(&buf[r.off]), name_len);
        r.off += name_len;
        r.need(2, "dtype/ndim");
        std::uint8_t dtype = buf[r.off++];
        std::uint8_t ndim = buf[r.off++];
        if (dtype > 1) throw FormatError("checkpoint: unknown native dtype for " + name);
        Tensor tensor;
        tensor.dtype = static_cast<DType>(dtype);
        std::uint64_t total = 1;
        for (std::uint8_t i = 0; i < ndim; ++i) {
            std::uint64_t dim = r.u64();
            tensor.shape.push_back(dim);
            total *= dim;
        }
        std::size_t elem = dtype == 0 ? 8 : 4;
        if (total > buf.size() / elem)
            throw FormatError("checkpoint: tensor size overflows buffer for " + name);
        r.need(total * elem, "tensor data");
        tensor.values.reserve(total);
        for (std::uint64_t i = 0; i < total; ++i) {
            const unsigned char* p = &buf[r.off + i * elem];
            tensor.values.push_back(dtype == 0 ? f64_le(p) : f32_le(p));
        }
        r.off += total * elem;
        for (const auto& [existing, _] : ckpt.tensors)
            if (existing == name)
                throw FormatError("checkpoint: duplicate tensor name " + name);
        ckpt.tensors.emplace_back(std::move(name), std::move(tensor));
    }
    return ckpt;
}

Checkpoint read_safetensors(const std::vector<unsigned char>& buf) {
    Reader r{buf, 0};
    std::uint64_t header_len = r.u64();
    if (header_len > buf.size() - 8)
        throw FormatError("checkpoint: safetensors header length " +
                          std::to_string(header_len) + " exceeds file size");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin() + 8, buf.begin() + 8 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed safetensors header JSON: ") +
                          e.what());
    }
    if (!header.is_object())
        throw FormatError("checkpoint: safetensors header is not a JSON object");

    const std::size_t buffer_size = buf.size() - 8 - header_len;
    struct Entry {
        std::string name;
        std::string dtype;
        std::vector<std::uint64_t> shape;
        std::uint64_t begin = 0, end = 0;
    };
    std::vector<Entry> entries;
    for (auto it = header.begin(); it != header.end(); ++it) {
        if (it.key() == "__metadata__") continue;
        const auto& v = it.value();
        if (!v.is_object() || !v.contains("dtype") || !v.contains("shape") ||
            !v.contains("data_offsets"))
            throw FormatError("checkpoint: malformed entry for tensor " + it.key());
        Entry e;
        e.name = it.key();
        e.dtype = v["dtype"].get<std::string>();
        if (!v["shape"].is_array())
            throw FormatError("checkpoint: shape is not an array for " + e.name);
        std::uint64_t total = 1;
        for (const auto& d : v["shape"]) {
            if (!d.is_number_unsigned())
                throw FormatError("checkpoint: bad shape entry for " + e.name);
            e.shape.push_back(d.get<std::uint64_t>());
            total *= e.shape.back();
        }
        const auto& offs = v["data_offsets"];
        if (!offs.is_array() || offs.size() != 2)
            throw FormatError("checkpoint: bad data_offsets for " + e.name);
        e.begin = offs[0].get<std::uint64_t>();
        e.end = offs[1].get<std::uint64_t>();
        if (e.end < e.begin || e.end > buffer_size)
            throw FormatError("checkpoint: data_offsets out of range for " + e.name);
        std::size_t elem = 0;
        if (e.dtype == "F64") elem = 8;
        else if (e.dtype == "F32") elem = 4;
        else if (e.dtype == "F16" || e.dtype == "BF16") elem = 2;
        if (elem != 0 && e.end - e.begin != total * elem)
            throw FormatError("checkpoint: data_offsets size mismatch for " + e.name);
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.begin < b.begin; });
    for (std::size_t i = 0; i + 1 < entries.size(); ++i)
        if (entries[i].end > entries[i + 1].begin)
            throw FormatError("checkpoint: overlapping data_offsets for " +
                              entries[i + 1].name);

    Checkpoint ckpt;
    const unsigned char* base = buf.data() + 8 + header_len;
    for (const auto& e : entries) {
        if (e.dtype != "F64" && e.dtype != "F32" && e.dtype != "F16" && e.dtype != "BF16") {
            ckpt.skipped.push_back(e.name + " (" + e.dtype + ")");
            continue;
        }
        Tensor tensor;
        tensor.dtype = e.dtype == "F64" ? DType::f64 : DType::f32;
        tensor.shape = e.shape;
        std::uint64_t total = 1;
        for (auto d : e.shape) total *= d;
        tensor.values.reserve(total);
        const unsigned char* p = base + e.begin;
        for (std::uint64_t i = 0; i < total; ++i) {
            if (e.dtype == "F64") tensor.values.push_back(f64_le(p + i * 8));
            else if (e.dtype == "F32") tensor.values.push_back(f32_le(p + i * 4));
            else if (e.dtype == "F16")
                tensor.values.push_back(half_to_double(p[i * 2] | (std::uint16_t(p[i * 2 + 1]) << 8)));
            else
                tensor.values.push_back(bf16_to_double(p[i * 2] | (std::uint16_t(p[i * 2 + 1]) << 8)));
        }
        ckpt.tensors.emplace_back(e.name, std::move(tensor));
    }
    return ckpt;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_native(const std::string& path, const Checkpoint& ckpt) {
    if (ckpt.tensors.empty()) throw std::invalid_argument("write_native: empty tensor map");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_native: cannot write " + path);
    out.write("NWT1", 4);
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        out.put(static_cast<char>(t.dtype));
        out.put(static_cast<char>(t.shape.size()));
        for (auto d : t.shape) put_u64(out, d);
        if (t.dtype == DType::f64) {
            for (double v : t.values) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        } else {
            for (double v : t.values) {
                float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            }
        }
    }
    if (!out) throw std::runtime_error("write_native: write failure on " + path);
    if (ckpt.meta) {
        nlohmann::json j;
        j["K"] = ckpt.meta->K;
        j["H"] = ckpt.meta->H;
        j["widths"] = ckpt.meta->widths;
        j["activation"] = ckpt.meta->activation;
        j["lambda"] = ckpt.meta->lambda;
        j["eta"] = ckpt.meta->eta;
        j["step"] = ckpt.meta->step;
        j["seed"] = ckpt.meta->seed;
        std::ofstream meta_out(path + ".meta.json");
        if (!meta_out) throw std::runtime_error("write_native: cannot write meta sidecar");
        meta_out << j.dump(2) << '\n';
    }
}

Checkpoint read_checkpoint(const std::string& path) {
    std::vector<unsigned char> buf = slurp(path);
    if (buf.size() < 8) throw FormatError("checkpoint: file too short");
    Checkpoint ckpt;
    if (std::memcmp(buf.data(), "NWT1", 4) == 0) {
        ckpt = read_native(buf);
        std::ifstream meta_in(path + ".meta.json");
        if (meta_in) {
            try {
                nlohmann::json j = nlohmann::json::parse(meta_in);
                CheckpointMeta m;
                m.K = j.value("K", 0);
                m.H = j.value("H", 1);
                m.widths = j.value("widths", std::vector<std::size_t>{});
                m.activation = j.value("activation", std::string{});
                m.lambda = j.value("lambda", 0.0);
                m.eta = j.value("eta", 0.0);
                m.step = j.value("step", std::uint64_t{0});
                m.seed = j.value("seed", std::uint64_t{0});
                ckpt.meta = m;
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(std::string("checkpoint: malformed meta sidecar: ") + e.what());
            }
        }
    } else {
        ckpt = read_safetensors(buf);
    }
    return ckpt;
}

namespace {

LayerReportRow measure(const std::string& name, const linalg::Matrix& m,
                       const std::string& group) {
    LayerReportRow row;
    row.name = name;
    row.rows = m.rows;
    row.cols = m.cols;
    row.group = group;
    row.fro_norm = linalg::frobenius_norm(m);
    if (row.fro_norm > 0.0) {
        row.spec_norm = linalg::spectral_norm(m);
        row.stable_rank = row.fro_norm / row.spec_norm;
    }
    return row;
}

}  // namespace

LayerReport layer_report(const Checkpoint& ckpt, const std::vector<LayerGroup>& groups) {
    std::map<std::string, std::string> member_to_group;
    for (const auto& g : groups)
        for (const auto& m : g.members) {
            if (!ckpt.find(m))
                throw ConfigError("layer_report: group " + g.name +
                                  " references missing tensor " + m);
            member_to_group[m] = g.name;
        }

    LayerReport report;
    std::vector<std::string> emitted_groups;
    bool any_matrix = false;
    for (const auto& [name, t] : ckpt.tensors) {
        if (!t.is_matrix()) {
            report.skipped_1d.push_back(name);
            continue;
        }
        any_matrix = true;
        auto git = member_to_group.find(name);
        if (git == member_to_group.end()) {
            linalg::Matrix m(t.shape[0], t.shape[1]);
            m.data = t.values;
            report.rows.push_back(measure(name, m, ""));
            continue;
        }
        // Emit the group row at the position of its first member.
        const std::string& gname = git->second;
        if (std::find(emitted_groups.begin(), emitted_groups.end(), gname) !=
            emitted_groups.end())
            continue;
        emitted_groups.push_back(gname);
        const LayerGroup* group = nullptr;
        for (const auto& g : groups)
            if (g.name == gname) group = &g;
        std::size_t cols = 0, total_rows = 0;
        for (const auto& mname : group->members) {
            const Tensor* mt = ckpt.find(mname);
            if (!mt->is_matrix())
                throw ConfigError("layer_report: group member " + mname + " is not 2-D");
            if (cols == 0) cols = mt->shape[1];
            else if (mt->shape[1] != cols)
                throw ConfigError("layer_report: group " + gname + " column mismatch");
            total_rows += mt->shape[0];
        }
        linalg::Matrix m(total_rows, cols);
        std::size_t row_off = 0;
        for (const auto& mname : group->members) {
            const Tensor* mt = ckpt.find(mname);
            std::copy(mt->values.begin(), mt->values.end(),
                      m.data.begin() + static_cast<std::ptrdiff_t>(row_off * cols));
            row_off += mt->shape[0];
        }
        report.rows.push_back(measure(gname, m, gname));
    }
    if (!any_matrix) throw ConfigError("layer_report: no 2-D tensors in checkpoint");
    return report;
}

std::string LayerReport::to_csv() const {
    std::ostringstream os;
    os << "name,rows,cols,fro_norm,spec_norm,stable_rank,group\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.name << ',' << r.rows << ',' << r.cols << ',' << r.fro_norm << ','
           << r.spec_norm << ',' << r.stable_rank << ',' << r.group << '\n';
    return os.str();
}

std::string LayerReport::to_json() const {
    nlohmann::json j;
    auto arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"name", r.name},
                       {"rows", r.rows},
                       {"cols", r.cols},
                       {"fro_norm", r.fro_norm},
                       {"spec_norm", r.spec_norm},
                       {"stable_rank", r.stable_rank},
                       {"group", r.group}});
    j["layers"] = arr;
    j["skipped_1d"] = skipped_1d;
    return j.dump(2);
}

}  // namespace wdlab::inspect
