#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "genmeter/errors.hpp"
#include "genmeter/format.hpp"
#include "genmeter/rng.hpp"
#include "genmeter/tensor.hpp"

namespace genmeter {

// One labelled pool: inputs is n x d, labels are class ids in [0, K).
struct LabeledBatch {
    Tensor inputs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return inputs.cols(); }
};

inline void validate_batch(const LabeledBatch& b, int num_classes) {
    if (b.size() == 0) throw Error("empty batch");
    if (b.inputs.rows() != b.labels.size()) throw ShapeError("batch rows != label count");
    for (int y : b.labels)
        if (y < 0 || y >= num_classes) throw Error("label out of range");
}

enum class DataKind { kBlobs, kMoons, kSpiral };
enum class ShiftKind { kRotate, kTranslate, kFeatureNoise, kScale };

inline DataKind parse_data_kind(const std::string& s) {
    if (s == "blobs") return DataKind::kBlobs;
    if (s == "moons") return DataKind::kMoons;
    if (s == "spiral") return DataKind::kSpiral;
    throw ConfigError("unknown dataset kind: " + s);
}

inline ShiftKind parse_shift_kind(const std::string& s) {
    if (s == "rotate") return ShiftKind::kRotate;
    if (s == "translate") return ShiftKind::kTranslate;
    if (s == "feature_noise") return ShiftKind::kFeatureNoise;
    if (s == "scale") return ShiftKind::kScale;
    throw ConfigError("unknown shift kind: " + s);
}

inline const char* to_string(DataKind k) {
    switch (k) {
        case DataKind::kBlobs: return "blobs";
        case DataKind::kMoons: return "moons";
        case DataKind::kSpiral: return "spiral";
    }
    return "?";
}

inline const char* to_string(ShiftKind k) {
    switch (k) {
        case ShiftKind::kRotate: return "rotate";
        case ShiftKind::kTranslate: return "translate";
        case ShiftKind::kFeatureNoise: return "feature_noise";
        case ShiftKind::kScale: return "scale";
    }
    return "?";
}

// Per-shift severity schedule. The returned magnitude parameter is strictly
// increasing in severity and is the exact parameter fed to the transform:
//   rotate        angle in radians, severity * pi/12
//   translate     offset length along the all-ones direction, severity * 0.25
//   feature_noise per-feature noise stddev, severity * 0.1
//   scale         multiplicative factor minus one, severity * 0.1
inline double shift_magnitude(ShiftKind kind, int severity) {
    switch (kind) {
        case ShiftKind::kRotate: return severity * (3.14159265358979323846 / 12.0);
        case ShiftKind::kTranslate: return severity * 0.25;
        case ShiftKind::kFeatureNoise: return severity * 0.1;
        case ShiftKind::kScale: return severity * 0.1;
    }
    return 0.0;
}

// Applies a parameterized distribution shift. Severity 0 is the identity;
// labels are never modified.
inline LabeledBatch apply_shift(const LabeledBatch& batch, ShiftKind kind, int severity,
                                std::uint64_t seed) {
    if (severity < 0 || severity > 5) throw Error("shift severity must be in 0..5");
    LabeledBatch out = batch;
    if (severity == 0) return out;
    const double mag = shift_magnitude(kind, severity);
    const std::size_t n = batch.size(), d = batch.input_dim();
    switch (kind) {
        case ShiftKind::kRotate: {
            if (d < 2) throw ShapeError("rotate shift needs input_dim >= 2");
            const double c = std::cos(mag), s = std::sin(mag);
            for (std::size_t i = 0; i < n; ++i) {
                double x0 = out.inputs.at(i, 0), x1 = out.inputs.at(i, 1);
                out.inputs.at(i, 0) = c * x0 - s * x1;
                out.inputs.at(i, 1) = s * x0 + c * x1;
            }
            break;
        }
        case ShiftKind::kTranslate: {
            const double step = mag / std::sqrt(static_cast<double>(d));
            for (double& x : out.inputs.v) x += step;
            break;
        }
        case ShiftKind::kFeatureNoise: {
            Rng rng(derive_seed(seed, "shift_noise", static_cast<std::uint64_t>(severity)));
            for (double& x : out.inputs.v) x += rng.normal(0.0, mag);
            break;
        }
        case ShiftKind::kScale: {
            for (double& x : out.inputs.v) x *= 1.0 + mag;
            break;
        }
    }
    return out;
}

struct DatasetSpec {
    DataKind kind = DataKind::kBlobs;
    std::size_t n_per_split = 256;
    int num_classes = 2;
    std::size_t input_dim = 2;
    double noise = 0.2;
    ShiftKind shift = ShiftKind::kRotate;
    std::uint64_t generator_seed = 0;
};

// Train pool, IID test pool, and shifted test pools keyed by severity 1..5.
// Severity 0 is the identity and equals test_iid. Regeneration from the same
// spec is bit-identical.
struct DatasetBundle {
    LabeledBatch train;
    LabeledBatch test_iid;
    std::map<int, LabeledBatch> test_shifted;
    std::uint64_t generator_seed = 0;
};

namespace detail {

// Labels are assigned round-robin, so per-class counts differ by at most one.
inline LabeledBatch generate_pool(const DatasetSpec& spec, std::uint64_t seed) {
    const std::size_t n = spec.n_per_split, d = spec.input_dim;
    const int k = spec.num_classes;
    LabeledBatch out;
    out.inputs = Tensor::matrix(n, d);
    out.labels.resize(n);
    std::vector<std::size_t> class_count(static_cast<std::size_t>(k), 0);
    std::vector<std::size_t> class_total(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) ++class_total[i % static_cast<std::size_t>(k)];
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % static_cast<std::size_t>(k));
        const std::size_t idx = class_count[static_cast<std::size_t>(y)]++;
        const std::size_t total = class_total[static_cast<std::size_t>(y)];
        out.labels[i] = y;
        double* row = &out.inputs.at(i, 0);
        switch (spec.kind) {
            case DataKind::kBlobs: {
                // Class centers on a radius-2 circle in the first two dims
                // (evenly spaced scalars when input_dim == 1).
                if (d == 1) {
                    row[0] = 2.0 * (2.0 * y - (k - 1));
                } else {
                    const double a = 6.283185307179586 * y / k;
                    row[0] = 2.0 * std::cos(a);
                    row[1] = 2.0 * std::sin(a);
                }
                break;
            }
            case DataKind::kMoons: {
                // Two interleaving half circles; points evenly spaced per arc.
                const double t = total > 1
                                     ? 3.14159265358979323846 * idx / (total - 1)
                                     : 0.0;
                if (y == 0) {
                    row[0] = std::cos(t);
                    row[1] = std::sin(t);
                } else {
                    row[0] = 1.0 - std::cos(t);
                    row[1] = 0.5 - std::sin(t);
                }
                break;
            }
            case DataKind::kSpiral: {
                const double t = total > 1 ? static_cast<double>(idx) / (total - 1) : 0.0;
                const double r = 0.5 + 1.5 * t;
                const double a = 3.0 * t + 6.283185307179586 * y / k;
                row[0] = r * std::cos(a);
                row[1] = r * std::sin(a);
                break;
            }
        }
        for (std::size_t j = 0; j < d; ++j) row[j] += spec.noise * rng.normal();
    }
    return out;
}

}  // namespace detail

// Builds the full bundle: train + IID test pools plus shifted variants of the
// IID test pool at severities 1..5. Deterministic per generator_seed.
inline DatasetBundle make_dataset(const DatasetSpec& spec) {
    if (spec.num_classes < 2) throw Error("make_dataset: need at least 2 classes");
    if (spec.n_per_split == 0 || spec.input_dim == 0)
        throw Error("make_dataset: non-positive sizes");
    if (spec.n_per_split < 10 * static_cast<std::size_t>(spec.num_classes))
        throw Error("make_dataset: n_per_split must be >= 10 * num_classes");
    if (spec.kind == DataKind::kMoons && spec.num_classes != 2)
        throw Error("make_dataset: moons is a 2-class family");
    if ((spec.kind == DataKind::kMoons || spec.kind == DataKind::kSpiral) && spec.input_dim != 2)
        throw Error("make_dataset: moons/spiral need input_dim == 2");

    DatasetBundle bundle;
    bundle.generator_seed = spec.generator_seed;
    bundle.train = detail::generate_pool(spec, derive_seed(spec.generator_seed, "train"));
    bundle.test_iid = detail::generate_pool(spec, derive_seed(spec.generator_seed, "test"));
    for (int s = 1; s <= 5; ++s)
        bundle.test_shifted[s] =
            apply_shift(bundle.test_iid, spec.shift, s, derive_seed(spec.generator_seed, "shift"));
    return bundle;
}

// CSV interchange: header "f0,...,f{d-1},label", one sample per row, reals at
// full round-trip precision.
inline void write_batch_csv(std::ostream& os, const LabeledBatch& batch) {
    const std::size_t d = batch.input_dim();
    for (std::size_t j = 0; j < d; ++j) os << 'f' << j << ',';
    os << "label\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) os << format_double(batch.inputs.at(i, j)) << ',';
        os << batch.labels[i] << '\n';
    }
}

inline void write_batch_csv(const std::string& path, const LabeledBatch& batch) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    write_batch_csv(f, batch);
}

inline LabeledBatch read_batch_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error("dataset csv: empty file");
    std::size_t d = 0;
    {
        std::stringstream hs(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(hs, col, ',')) cols.push_back(col);
        if (cols.empty() || cols.back() != "label")
            throw Error("dataset csv: last header column must be 'label'");
        d = cols.size() - 1;
        for (std::size_t j = 0; j < d; ++j)
            if (cols[j] != "f" + std::to_string(j))
                throw Error("dataset csv: expected header column f" + std::to_string(j));
    }
    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != d + 1) throw Error("dataset csv: wrong column count in row");
        for (std::size_t j = 0; j < d; ++j) values.push_back(std::stod(cells[j]));
        labels.push_back(std::stoi(cells[d]));
    }
    if (labels.empty()) throw Error("dataset csv: no data rows");
    LabeledBatch out;
    out.inputs = Tensor({labels.size(), d}, std::move(values));
    out.labels = std::move(labels);
    return out;
}

inline LabeledBatch read_batch_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open for reading: " + path);
    return read_batch_csv(f);
}

}  // namespace genmeter
