// dataset.hpp - flow-feature ingestion, min-max/one-hot encoding, synthetic
// planted-feature generation, and deterministic splits
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flowguard/errors.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"
#include "flowguard/textio.hpp"

namespace flowguard {

enum class ColumnKind { Continuous, Categorical, Label };

inline const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Label: return "label";
    }
    return "?";
}

inline ColumnKind column_kind_from(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "label") return ColumnKind::Label;
    throw BadConfig("unknown column kind '" + s + "'");
}

/// Ordered column layout of a raw traffic CSV plus the rule that collapses
/// raw label strings to binary (values listed in normal_labels map to 0,
/// anything else is an attack and maps to 1).
struct FeatureSchema {
    std::string dataset_id;
    std::vector<std::pair<std::string, ColumnKind>> columns;
    std::vector<std::string> normal_labels;

    void validate() const {
        if (dataset_id.empty()) throw BadConfig("schema: empty dataset_id");
        std::size_t labels = 0, features = 0;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            for (std::size_t j = i + 1; j < columns.size(); ++j)
                if (columns[i].first == columns[j].first)
                    throw BadConfig("schema: duplicate column '" + columns[i].first + "'");
            if (columns[i].second == ColumnKind::Label)
                ++labels;
            else
                ++features;
        }
        if (labels != 1) throw BadConfig("schema: need exactly one label column");
        if (features == 0) throw BadConfig("schema: need at least one feature column");
    }

    std::size_t label_index() const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].second == ColumnKind::Label) return i;
        throw BadConfig("schema: no label column");
    }

    std::size_t feature_count() const { return columns.size() - 1; }

    bool is_normal_label(const std::string& raw) const {
        return std::find(normal_labels.begin(), normal_labels.end(), raw) !=
               normal_labels.end();
    }
};

inline void save_schema(std::ostream& out, const FeatureSchema& s) {
    out << "# flowguard-schema v1\n";
    out << "dataset_id=" << s.dataset_id << "\n";
    std::string nl;
    for (std::size_t i = 0; i < s.normal_labels.size(); ++i) {
        if (i) nl.push_back(',');
        nl += s.normal_labels[i];
    }
    out << "normal_labels=" << nl << "\n";
    for (const auto& [name, kind] : s.columns)
        out << "column." << name << "=" << to_string(kind) << "\n";
}

inline FeatureSchema load_schema(std::istream& in, const std::string& path) {
    expect_magic(in, "# flowguard-schema v1", path);
    FeatureSchema s;
    std::string line;
    KvLine kv;
    while (std::getline(in, line)) {
        if (!parse_kv(line, kv)) continue;
        if (kv.key == "dataset_id") {
            s.dataset_id = kv.value;
        } else if (kv.key == "normal_labels") {
            for (auto& tok : split_string(kv.value, ','))
                if (!tok.empty()) s.normal_labels.push_back(tok);
        } else if (kv.key.rfind("column.", 0) == 0) {
            s.columns.emplace_back(kv.key.substr(7), column_kind_from(kv.value));
        } else {
            throw BadConfig("schema: unknown key '" + kv.key + "'");
        }
    }
    s.validate();
    return s;
}

inline FeatureSchema load_schema_file(const std::string& path) {
    auto in = open_input(path);
    return load_schema(in, path);
}

/// Raw CSV rows validated against a schema; cells stay as strings until
/// encode() so categorical and label columns need no special casing here.
struct RawTable {
    FeatureSchema schema;
    std::vector<std::vector<std::string>> rows;

    std::size_t size() const { return rows.size(); }
};

inline RawTable load_csv(const std::string& path, const FeatureSchema& schema,
                         bool has_header = true) {
    schema.validate();
    auto in = open_input(path);
    RawTable table;
    table.schema = schema;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        auto cells = split_string(line, ',');
        if (has_header && !saw_header) {
            saw_header = true;
            if (cells.size() != schema.columns.size())
                throw MissingColumn(path + ": header has " + std::to_string(cells.size()) +
                                    " columns, schema expects " +
                                    std::to_string(schema.columns.size()));
            for (std::size_t i = 0; i < cells.size(); ++i)
                if (cells[i] != schema.columns[i].first)
                    throw MissingColumn(path + ": header column " + std::to_string(i) +
                                        " is '" + cells[i] + "', expected '" +
                                        schema.columns[i].first + "'");
            continue;
        }
        if (cells.size() != schema.columns.size())
            throw MissingColumn(path + " row " + std::to_string(table.rows.size() + 1) +
                                ": has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(schema.columns.size()));
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (schema.columns[i].second == ColumnKind::Continuous)
                parse_double(cells[i], schema.columns[i].first.c_str());
        table.rows.push_back(std::move(cells));
    }
    if (table.rows.empty()) throw EmptyFile(path);
    return table;
}

/// Per-feature scaling state, derived from the training split only.
/// Continuous columns carry their training min/max box; categorical columns
/// carry the sorted distinct training vocabulary.
struct NormalizationParams {
    struct Range {
        double min = 0.0, max = 1.0;
    };
    std::vector<Range> cont;                     // one per continuous column, schema order
    std::vector<std::vector<std::string>> vocab; // one per categorical column, schema order
};

inline NormalizationParams fit_normalizer(const RawTable& train) {
    if (train.rows.empty()) throw EmptyTable("fit_normalizer");
    NormalizationParams p;
    const auto& cols = train.schema.columns;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].second == ColumnKind::Continuous) {
            NormalizationParams::Range r;
            for (std::size_t i = 0; i < train.rows.size(); ++i) {
                double v = parse_double(train.rows[i][c], cols[c].first.c_str());
                if (i == 0) {
                    r.min = r.max = v;
                } else {
                    r.min = std::min(r.min, v);
                    r.max = std::max(r.max, v);
                }
            }
            p.cont.push_back(r);
        } else if (cols[c].second == ColumnKind::Categorical) {
            std::vector<std::string> vals;
            for (const auto& row : train.rows) vals.push_back(row[c]);
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            p.vocab.push_back(std::move(vals));
        }
    }
    return p;
}

/// The normalized feature matrix: continuous dims scaled into [0,1], each
/// categorical column expanded to a one-hot group over the training
/// vocabulary, labels collapsed to attack=1 / normal=0.
struct EncodedMatrix {
    Matrix values;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    bool row_order_is_temporal = false;

    std::size_t n_rows() const { return values.rows; }
    std::size_t n_dims() const { return values.cols; }
};

// clipping to the training box is the noise filter: out-of-range test values
// can never leave [0,1]
inline double scale_clip(double v, NormalizationParams::Range r) {
    if (r.max == r.min) return 0.0;
    double s = (v - r.min) / (r.max - r.min);
    return std::min(1.0, std::max(0.0, s));
}

// one name per encoded dim: continuous columns keep their name, categorical
// columns expand to "<column>=<value>" over the training vocabulary
inline std::vector<std::string> encoded_feature_names(const FeatureSchema& schema,
                                                      const NormalizationParams& params) {
    std::size_t n_cont = 0, n_cat = 0;
    for (const auto& [name, kind] : schema.columns) {
        if (kind == ColumnKind::Continuous) ++n_cont;
        if (kind == ColumnKind::Categorical) ++n_cat;
    }
    if (params.cont.size() != n_cont || params.vocab.size() != n_cat)
        throw SchemaMismatch("normalizer fitted for a different schema layout");
    std::vector<std::string> names;
    std::size_t cat = 0;
    for (const auto& [name, kind] : schema.columns) {
        if (kind == ColumnKind::Continuous) {
            names.push_back(name);
        } else if (kind == ColumnKind::Categorical) {
            for (const auto& val : params.vocab[cat]) names.push_back(name + "=" + val);
            ++cat;
        }
    }
    return names;
}

inline EncodedMatrix encode(const RawTable& table, const NormalizationParams& params,
                            bool pseudo_time = true) {
    const auto& schema = table.schema;
    EncodedMatrix out;
    out.row_order_is_temporal = pseudo_time;
    out.feature_names = encoded_feature_names(schema, params);
    const std::size_t width = out.feature_names.size();

    out.values = Matrix(table.rows.size(), width);
    out.labels.resize(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        double* dst = out.values.row(r);
        std::size_t d = 0, cont = 0, cat = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            switch (schema.columns[c].second) {
                case ColumnKind::Continuous: {
                    double v = parse_double(row[c], schema.columns[c].first.c_str());
                    dst[d++] = scale_clip(v, params.cont[cont++]);
                    break;
                }
                case ColumnKind::Categorical: {
                    const auto& vocab = params.vocab[cat++];
                    auto it = std::lower_bound(vocab.begin(), vocab.end(), row[c]);
                    // unseen category leaves the whole group at zero
                    std::size_t hot = (it != vocab.end() && *it == row[c])
                                          ? static_cast<std::size_t>(it - vocab.begin())
                                          : vocab.size();
                    for (std::size_t k = 0; k < vocab.size(); ++k)
                        dst[d++] = (k == hot) ? 1.0 : 0.0;
                    break;
                }
                case ColumnKind::Label:
                    out.labels[r] = schema.is_normal_label(row[c]) ? 0 : 1;
                    break;
            }
        }
    }
    return out;
}

struct SynthData {
    EncodedMatrix matrix;
    std::vector<std::size_t> informative; // dims carrying the class signal
};

/// Two Gaussian clusters separated by `separation` standard deviations on
/// exactly d_inf dims placed at seeded-random positions; the remaining
/// d_noise dims are class-independent. Values are min-max rescaled to [0,1].
inline SynthData synth_dataset(std::size_t n, std::size_t d_inf, std::size_t d_noise,
                               double separation, std::uint64_t seed) {
    if (n < 4 || d_inf < 1 || separation < 0.0)
        throw InvalidDimensions("synth_dataset: need n >= 4, d_inf >= 1, separation >= 0");
    const std::size_t d = d_inf + d_noise;

    std::vector<int> labels(n, 0);
    for (std::size_t i = n / 2; i < n; ++i) labels[i] = 1;
    auto label_rng = derive_stream(seed, "synth.labels");
    shuffle(labels, label_rng);

    std::vector<std::size_t> position(d);
    for (std::size_t i = 0; i < d; ++i) position[i] = i;
    auto pos_rng = derive_stream(seed, "synth.positions");
    shuffle(position, pos_rng);
    // position[k] is where the k-th generated dim lands; first d_inf are informative
    std::vector<std::size_t> informative(position.begin(), position.begin() + d_inf);
    std::sort(informative.begin(), informative.end());

    Matrix values(n, d);
    auto val_rng = derive_stream(seed, "synth.values");
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < d; ++k) {
            double v = val_rng.normal();
            if (k < d_inf && labels[r] == 1) v += separation;
            values.at(r, position[k]) = v;
        }
    }
    for (std::size_t c = 0; c < d; ++c) {
        double lo = values.at(0, c), hi = lo;
        for (std::size_t r = 1; r < n; ++r) {
            lo = std::min(lo, values.at(r, c));
            hi = std::max(hi, values.at(r, c));
        }
        NormalizationParams::Range range{lo, hi};
        for (std::size_t r = 0; r < n; ++r)
            values.at(r, c) = scale_clip(values.at(r, c), range);
    }

    SynthData out;
    out.matrix.values = std::move(values);
    out.matrix.labels = std::move(labels);
    out.matrix.row_order_is_temporal = false;
    char buf[32];
    for (std::size_t c = 0; c < d; ++c) {
        std::snprintf(buf, sizeof(buf), "f%02zu", c);
        out.matrix.feature_names.push_back(buf);
    }
    out.informative = std::move(informative);
    return out;
}

struct SplitSpec {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    std::uint64_t seed = 1;
    bool stratified = true;

    void validate() const {
        for (double f : {train_fraction, val_fraction, test_fraction})
            if (!(f > 0.0 && f < 1.0)) throw BadConfig("split fractions must lie in (0,1)");
        if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
            throw BadConfig("split fractions must sum to 1");
    }
};

struct SplitResult {
    EncodedMatrix train, val, test;
};

inline EncodedMatrix subset_rows(const EncodedMatrix& m, const std::vector<std::size_t>& idx) {
    EncodedMatrix out;
    out.values = take_rows(m.values, idx);
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(m.labels[i]);
    out.feature_names = m.feature_names;
    out.row_order_is_temporal = m.row_order_is_temporal;
    return out;
}

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

/// Index-level split shared by split() and the preprocessing stage (which
/// must pick training rows before any encoding exists).
inline SplitIndices split_indices(const std::vector<int>& labels, bool temporal,
                                  const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n < 3) throw TooFewRows("split: need at least 3 rows");

    auto cut = [&](std::size_t count) {
        std::size_t b1 = static_cast<std::size_t>(
            std::llround(count * spec.train_fraction));
        std::size_t b2 = static_cast<std::size_t>(
            std::llround(count * (spec.train_fraction + spec.val_fraction)));
        b1 = std::min(b1, count);
        b2 = std::min(std::max(b2, b1), count);
        return std::pair<std::size_t, std::size_t>{b1, b2};
    };

    SplitIndices out;
    auto& tr = out.train;
    auto& va = out.val;
    auto& te = out.test;
    if (temporal) {
        // contiguous blocks keep temporal adjacency: train precedes val precedes test
        auto [b1, b2] = cut(n);
        for (std::size_t i = 0; i < n; ++i)
            (i < b1 ? tr : i < b2 ? va : te).push_back(i);
    } else if (spec.stratified) {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) by_class[labels[i] ? 1 : 0].push_back(i);
        if (by_class[0].empty() || by_class[1].empty())
            throw ClassMissing("stratified split needs both classes");
        if (by_class[0].size() < 3 || by_class[1].size() < 3)
            throw TooFewRows("stratified split needs >= 3 rows per class");
        for (int c = 0; c < 2; ++c) {
            auto rng = derive_stream(spec.seed, "split.class", static_cast<std::uint64_t>(c));
            shuffle(by_class[c], rng);
            auto [b1, b2] = cut(by_class[c].size());
            for (std::size_t i = 0; i < by_class[c].size(); ++i)
                (i < b1 ? tr : i < b2 ? va : te).push_back(by_class[c][i]);
        }
        std::sort(tr.begin(), tr.end());
        std::sort(va.begin(), va.end());
        std::sort(te.begin(), te.end());
    } else {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        auto rng = derive_stream(spec.seed, "split.rows");
        shuffle(idx, rng);
        auto [b1, b2] = cut(n);
        tr.assign(idx.begin(), idx.begin() + b1);
        va.assign(idx.begin() + b1, idx.begin() + b2);
        te.assign(idx.begin() + b2, idx.end());
        std::sort(tr.begin(), tr.end());
        std::sort(va.begin(), va.end());
        std::sort(te.begin(), te.end());
    }
    return out;
}

inline SplitResult split(const EncodedMatrix& m, const SplitSpec& spec) {
    SplitIndices idx = split_indices(m.labels, m.row_order_is_temporal, spec);
    return {subset_rows(m, idx.train), subset_rows(m, idx.val), subset_rows(m, idx.test)};
}

// ---- matrix artifact (CSV with embedded header and version) ----

inline void save_matrix(std::ostream& out, const EncodedMatrix& m) {
    out << "# flowguard-matrix v1\n";
    out << "# temporal=" << (m.row_order_is_temporal ? 1 : 0) << "\n";
    for (const auto& name : m.feature_names) out << name << ",";
    out << "label\n";
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        const double* row = m.values.row(r);
        for (std::size_t c = 0; c < m.n_dims(); ++c) out << fmt_double(row[c]) << ",";
        out << m.labels[r] << "\n";
    }
}

inline void save_matrix_file(const std::string& path, const EncodedMatrix& m) {
    auto out = open_output(path);
    save_matrix(out, m);
}

inline EncodedMatrix load_matrix(std::istream& in, const std::string& path) {
    expect_magic(in, "# flowguard-matrix v1", path);
    std::string line;
    if (!std::getline(in, line)) throw EmptyFile(path);
    line = strip_cr(line);
    EncodedMatrix m;
    if (line == "# temporal=1")
        m.row_order_is_temporal = true;
    else if (line == "# temporal=0")
        m.row_order_is_temporal = false;
    else
        throw VersionMismatch(path + ": missing temporal flag line");
    if (!std::getline(in, line)) throw EmptyFile(path);
    auto names = split_string(strip_cr(line), ',');
    if (names.empty() || names.back() != "label")
        throw SchemaMismatch(path + ": last header column must be 'label'");
    names.pop_back();
    m.feature_names = names;

    std::vector<double> flat;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        auto cells = split_string(line, ',');
        if (cells.size() != names.size() + 1)
            throw MissingColumn(path + ": row arity mismatch");
        for (std::size_t c = 0; c < names.size(); ++c)
            flat.push_back(parse_double(cells[c], "matrix cell"));
        int y = static_cast<int>(parse_double(cells.back(), "label"));
        if (y != 0 && y != 1) throw SchemaMismatch(path + ": label must be 0 or 1");
        m.labels.push_back(y);
    }
    if (m.labels.empty()) throw EmptyFile(path);
    m.values.rows = m.labels.size();
    m.values.cols = names.size();
    m.values.data = std::move(flat);
    return m;
}

inline EncodedMatrix load_matrix_file(const std::string& path) {
    auto in = open_input(path);
    return load_matrix(in, path);
}

// ---- normalizer artifact (schema + fitted params in one file) ----

inline void save_normalizer(std::ostream& out, const FeatureSchema& schema,
                            const NormalizationParams& p) {
    out << "# flowguard-normalizer v1\n";
    out << "dataset_id=" << schema.dataset_id << "\n";
    std::string nl;
    for (std::size_t i = 0; i < schema.normal_labels.size(); ++i) {
        if (i) nl.push_back(',');
        nl += schema.normal_labels[i];
    }
    out << "normal_labels=" << nl << "\n";
    std::size_t cont = 0, cat = 0;
    for (const auto& [name, kind] : schema.columns) {
        switch (kind) {
            case ColumnKind::Continuous:
                out << "range." << name << "=" << fmt_double(p.cont[cont].min) << ","
                    << fmt_double(p.cont[cont].max) << "\n";
                ++cont;
                break;
            case ColumnKind::Categorical: {
                out << "vocab." << name << "=";
                const auto& v = p.vocab[cat++];
                for (std::size_t i = 0; i < v.size(); ++i)
                    out << (i ? "," : "") << v[i];
                out << "\n";
                break;
            }
            case ColumnKind::Label:
                out << "labelcol." << name << "=\n";
                break;
        }
    }
}

struct NormalizerArtifact {
    FeatureSchema schema;
    NormalizationParams params;
};

inline NormalizerArtifact load_normalizer(std::istream& in, const std::string& path) {
    expect_magic(in, "# flowguard-normalizer v1", path);
    NormalizerArtifact a;
    std::string line;
    KvLine kv;
    while (std::getline(in, line)) {
        if (!parse_kv(line, kv)) continue;
        if (kv.key == "dataset_id") {
            a.schema.dataset_id = kv.value;
        } else if (kv.key == "normal_labels") {
            for (auto& tok : split_string(kv.value, ','))
                if (!tok.empty()) a.schema.normal_labels.push_back(tok);
        } else if (kv.key.rfind("range.", 0) == 0) {
            a.schema.columns.emplace_back(kv.key.substr(6), ColumnKind::Continuous);
            auto parts = split_string(kv.value, ',');
            if (parts.size() != 2) throw BadConfig(path + ": bad range line");
            a.params.cont.push_back({parse_double(parts[0], "range min"),
                                     parse_double(parts[1], "range max")});
        } else if (kv.key.rfind("vocab.", 0) == 0) {
            a.schema.columns.emplace_back(kv.key.substr(6), ColumnKind::Categorical);
            std::vector<std::string> v;
            for (auto& tok : split_string(kv.value, ','))
                if (!tok.empty()) v.push_back(tok);
            a.params.vocab.push_back(std::move(v));
        } else if (kv.key.rfind("labelcol.", 0) == 0) {
            a.schema.columns.emplace_back(kv.key.substr(9), ColumnKind::Label);
        } else {
            throw BadConfig(path + ": unknown key '" + kv.key + "'");
        }
    }
    a.schema.validate();
    return a;
}

inline NormalizerArtifact load_normalizer_file(const std::string& path) {
    auto in = open_input(path);
    return load_normalizer(in, path);
}

/// Identity normalizer for data that is already encoded (synthetic sets):
/// every dim is continuous with range [0,1], labels are literal "0"/"1".
inline NormalizerArtifact identity_normalizer(const std::string& dataset_id,
                                              const std::vector<std::string>& feature_names) {
    NormalizerArtifact a;
    a.schema.dataset_id = dataset_id;
    a.schema.normal_labels = {"0"};
    for (const auto& name : feature_names) {
        a.schema.columns.emplace_back(name, ColumnKind::Continuous);
        a.params.cont.push_back({0.0, 1.0});
    }
    a.schema.columns.emplace_back("label", ColumnKind::Label);
    return a;
}

} // namespace flowguard
