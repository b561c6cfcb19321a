#include "ital/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ital/random.hpp"

namespace ital {
namespace fs = std::filesystem;
using nlohmann::json;

IdList Dataset::train_ids() const {
    IdList out;
    for (Index i = 0; i < size(); ++i) {
        if (is_train[i]) {
            out.push_back(i);
        }
    }
    return out;
}

IdList Dataset::test_ids() const {
    IdList out;
    for (Index i = 0; i < size(); ++i) {
        if (!is_train[i]) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::string> Dataset::vocabulary() const {
    std::set<std::string> v;
    for (const auto& ls : labels) {
        v.insert(ls.begin(), ls.end());
    }
    return {v.begin(), v.end()};
}

bool Dataset::has_label(Index i, const std::string& label) const {
    const auto& ls = labels[i];
    return std::find(ls.begin(), ls.end(), label) != ls.end();
}

bool Dataset::wide_sense_only(Index i, const std::string& label) const {
    if (wide_sense_labels.empty() || has_label(i, label)) {
        return false;
    }
    const auto& ws = wide_sense_labels[i];
    return std::find(ws.begin(), ws.end(), label) != ws.end();
}

std::optional<Index> Dataset::find(const std::string& sample_id) const {
    for (Index i = 0; i < size(); ++i) {
        if (sample_ids[i] == sample_id) {
            return i;
        }
    }
    return std::nullopt;
}

void Dataset::validate() const {
    const Index n = size();
    if (!features || static_cast<Index>(features->rows()) != n) {
        throw IngestError("dataset: feature rows do not match sample count");
    }
    if (n == 0 || features->cols() == 0) {
        throw IngestError("dataset: no samples or no feature columns");
    }
    if (is_train.size() != n || labels.size() != n) {
        throw IngestError("dataset: split or label column has the wrong length");
    }
    if (!wide_sense_labels.empty() && wide_sense_labels.size() != n) {
        throw IngestError("dataset: wide-sense column has the wrong length");
    }
    if (!image_paths.empty() && image_paths.size() != n) {
        throw IngestError("dataset: image list has the wrong length");
    }
    std::size_t train = 0;
    for (Index i = 0; i < n; ++i) {
        if (labels[i].empty()) {
            throw IngestError("dataset: sample '" + sample_ids[i] + "' has no label");
        }
        train += is_train[i] ? 1 : 0;
    }
    if (train == 0 || train == n) {
        throw IngestError("dataset: train and test splits must both be nonempty");
    }
    std::set<std::string> ids(sample_ids.begin(), sample_ids.end());
    if (ids.size() != n) {
        throw IngestError("dataset: duplicate sample ids");
    }
}

IngestSummary summarize(const Dataset& ds) {
    IngestSummary s;
    s.samples = ds.size();
    s.dimensions = ds.dim();
    std::map<std::string, Index> counts;
    for (Index i = 0; i < ds.size(); ++i) {
        (ds.is_train[i] ? s.train : s.test) += 1;
        for (const auto& l : ds.labels[i]) {
            ++counts[l];
        }
    }
    s.label_counts.assign(counts.begin(), counts.end());
    return s;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_labels(const std::string& field) {
    std::vector<std::string> out;
    if (field.empty()) {
        return out;
    }
    for (auto& l : split_fields(field, ';')) {
        if (!l.empty()) {
            out.push_back(std::move(l));
        }
    }
    return out;
}

std::string row_context(const fs::path& path, std::size_t line) {
    std::ostringstream s;
    s << path.string() << ":" << line << ": ";
    return s.str();
}

std::string normalize_split(const std::string& s, const fs::path& path, std::size_t line) {
    std::string v = s;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "train" || v == "training") {
        return "train";
    }
    if (v == "test" || v == "testing") {
        return "test";
    }
    if (v.empty() || v == "-") {
        return "";
    }
    throw IngestError(row_context(path, line) + "split must be 'train' or 'test', got '" + s + "'");
}

}  // namespace

RawTable read_feature_csv(const fs::path& path, bool has_wide_sense) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open features file " + path.string());
    }
    RawTable t;
    std::vector<std::vector<double>> rows;
    const std::size_t meta = has_wide_sense ? 4 : 3;
    std::size_t d = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line, ',');
        if (rows.empty() && t.ids.empty() && !fields.empty() && fields[0] == "id") {
            continue;  // header
        }
        if (fields.size() <= meta) {
            throw IngestError(row_context(path, line_no) + "expected id, split, labels" +
                              (has_wide_sense ? ", wide_sense" : "") + " and at least one feature");
        }
        const std::size_t row_d = fields.size() - meta;
        if (d == 0) {
            d = row_d;
        } else if (row_d != d) {
            std::ostringstream msg;
            msg << row_context(path, line_no) << "expected " << d << " feature columns, found " << row_d;
            throw IngestError(msg.str());
        }
        if (fields[0].empty()) {
            throw IngestError(row_context(path, line_no) + "missing sample id");
        }
        t.ids.push_back(fields[0]);
        t.split.push_back(normalize_split(fields[1], path, line_no));
        t.labels.push_back(split_labels(fields[2]));
        if (has_wide_sense) {
            t.wide_sense.push_back(split_labels(fields[3]));
        }
        std::vector<double> r(d);
        for (std::size_t j = 0; j < d; ++j) {
            const auto& f = fields[meta + j];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
                std::ostringstream msg;
                msg << row_context(path, line_no) << "feature " << j << " is not a finite number: '" << f << "'";
                throw IngestError(msg.str());
            }
            r[j] = v;
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        throw IngestError("features file " + path.string() + " has no rows");
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return t;
}

namespace {

constexpr char kMagic[7] = {'I', 'T', 'A', 'L', 'D', 'S', '1'};

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

RawTable read_feature_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open features file " + path.string());
    }
    char magic[7];
    in.read(magic, 7);
    if (!in || std::memcmp(magic, kMagic, 7) != 0) {
        throw IngestError(path.string() + ": bad magic, expected ITALDS1");
    }
    const std::uint32_t n = read_u32(in);
    const std::uint32_t d = read_u32(in);
    if (!in || n == 0 || d == 0) {
        throw IngestError(path.string() + ": empty or truncated header");
    }
    RawTable t;
    t.ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        t.ids.push_back(std::to_string(read_u32(in)));
    }
    t.values.resize(n, d);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) {
            const std::uint32_t bits = read_u32(in);
            float f = 0.0F;
            static_assert(sizeof(float) == 4);
            std::memcpy(&f, &bits, 4);
            if (!std::isfinite(f)) {
                std::ostringstream msg;
                msg << path.string() << ": row " << i << " feature " << j << " is not finite";
                throw IngestError(msg.str());
            }
            t.values(i, j) = f;
        }
    }
    if (!in) {
        throw IngestError(path.string() + ": truncated feature block");
    }
    t.split.assign(n, "");
    t.labels.assign(n, {});
    return t;
}

void write_feature_binary(const fs::path& path, const std::vector<std::uint32_t>& ids, const Eigen::MatrixXd& values) {
    if (ids.size() != static_cast<std::size_t>(values.rows())) {
        throw ContractError("write_feature_binary: id count does not match rows");
    }
    std::ofstream out(path, std::ios::binary);
    out.write(kMagic, 7);
    write_u32(out, static_cast<std::uint32_t>(values.rows()));
    write_u32(out, static_cast<std::uint32_t>(values.cols()));
    for (const auto id : ids) {
        write_u32(out, id);
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const auto f = static_cast<float>(values(i, j));
            std::uint32_t bits = 0;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
    }
    if (!out) {
        throw IngestError("failed writing " + path.string());
    }
}

FeatureMatrix scale_features(const Eigen::MatrixXd& values, const std::vector<char>& is_train) {
    const auto n = values.rows();
    const auto d = values.cols();
    FeatureMatrix out(n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (is_train[static_cast<std::size_t>(i)]) {
                lo = std::min(lo, values(i, j));
                hi = std::max(hi, values(i, j));
            }
        }
        const double range = hi - lo;
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, j) = range > 0.0 ? std::clamp((values(i, j) - lo) / range, 0.0, 1.0) : 0.0;
        }
    }
    return out;
}

namespace {

struct Manifest {
    std::string name;
    fs::path features;
    std::string format;
    fs::path labels;
    bool wide_sense = false;
    std::optional<double> test_ratio;
    std::uint64_t split_seed = 0;
    fs::path image_dir;
    std::string image_pattern = "{id}.png";
};

Manifest parse_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open manifest " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw IngestError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    const fs::path base = path.parent_path();
    Manifest m;
    try {
        if (!j.contains("features_file")) {
            throw IngestError("manifest " + path.string() + " lacks 'features_file'");
        }
        m.name = j.value("name", path.stem().string());
        m.features = base / j.at("features_file").get<std::string>();
        m.format = j.value("format", "");
        if (j.contains("labels_file")) {
            m.labels = base / j.at("labels_file").get<std::string>();
        }
        m.wide_sense = j.value("wide_sense", false);
        if (j.contains("split") && j.at("split").is_object()) {
            m.test_ratio = j.at("split").at("test_ratio").get<double>();
            m.split_seed = j.at("split").value("seed", std::uint64_t{0});
            if (!(*m.test_ratio > 0.0 && *m.test_ratio < 1.0)) {
                throw IngestError("manifest: split.test_ratio must lie in (0, 1)");
            }
        }
        if (j.contains("image_dir")) {
            m.image_dir = base / j.at("image_dir").get<std::string>();
            m.image_pattern = j.value("image_pattern", m.image_pattern);
        }
    } catch (const json::exception& e) {
        throw IngestError("manifest " + path.string() + ": " + e.what());
    }
    if (m.format.empty()) {
        m.format = m.features.extension() == ".bin" ? "binary" : "csv";
    }
    return m;
}

/// Reads id,split,labels[,wide_sense] rows and merges them into a binary table.
void merge_labels(RawTable& t, const fs::path& path, bool wide_sense) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open labels file " + path.string());
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
        index[t.ids[i]] = i;
    }
    std::vector<char> seen(t.ids.size(), 0);
    t.wide_sense.assign(wide_sense ? t.ids.size() : 0, {});
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split_fields(line, ',');
        if (line_no == 1 && f[0] == "id") {
            continue;
        }
        if (f.size() < (wide_sense ? 4U : 3U)) {
            throw IngestError(row_context(path, line_no) + "expected id, split, labels");
        }
        const auto it = index.find(f[0]);
        if (it == index.end()) {
            throw IngestError(row_context(path, line_no) + "unknown sample id '" + f[0] + "'");
        }
        t.split[it->second] = normalize_split(f[1], path, line_no);
        t.labels[it->second] = split_labels(f[2]);
        if (wide_sense) {
            t.wide_sense[it->second] = split_labels(f[3]);
        }
        seen[it->second] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            throw IngestError(path.string() + ": no labels for sample id '" + t.ids[i] + "'");
        }
    }
}

std::vector<char> assign_split(const RawTable& t, std::optional<double> test_ratio, std::uint64_t seed) {
    const std::size_t n = t.ids.size();
    std::vector<char> train(n, 1);
    if (test_ratio) {
        // Seeded shuffle, then the first round(ratio * n) samples go to test.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        Rng rng(derive_seed(seed, {0x5b1f}));
        for (std::size_t i = n; i > 1; --i) {
            const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)));
            std::swap(order[i - 1], order[j]);
        }
        const auto n_test = static_cast<std::size_t>(std::llround(*test_ratio * static_cast<double>(n)));
        for (std::size_t t_i = 0; t_i < n_test; ++t_i) {
            train[order[t_i]] = 0;
        }
        return train;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (t.split[i].empty()) {
            throw IngestError("sample '" + t.ids[i] + "' has no split and the manifest declares no split ratio");
        }
        train[i] = t.split[i] == "train" ? 1 : 0;
    }
    return train;
}

Dataset finish(RawTable t, std::string name, std::optional<double> test_ratio, std::uint64_t seed) {
    Dataset ds;
    ds.name = std::move(name);
    ds.is_train = assign_split(t, test_ratio, seed);
    ds.features = std::make_shared<const FeatureMatrix>(scale_features(t.values, ds.is_train));
    ds.sample_ids = std::move(t.ids);
    ds.labels = std::move(t.labels);
    ds.wide_sense_labels = std::move(t.wide_sense);
    return ds;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
    if (!fs::exists(path)) {
        throw IngestError("dataset path does not exist: " + path.string());
    }
    const auto ext = path.extension().string();
    if (ext == ".csv") {
        Dataset ds = finish(read_feature_csv(path, false), path.stem().string(), std::nullopt, 0);
        ds.validate();
        return ds;
    }
    if (ext != ".json") {
        throw IngestError("dataset path must be a .json manifest or a .csv features file: " + path.string());
    }
    const Manifest m = parse_manifest(path);
    RawTable t;
    if (m.format == "binary") {
        if (m.labels.empty()) {
            throw IngestError("manifest " + path.string() + ": binary features need a labels_file");
        }
        t = read_feature_binary(m.features);
        merge_labels(t, m.labels, m.wide_sense);
    } else if (m.format == "csv") {
        t = read_feature_csv(m.features, m.wide_sense);
        if (!m.labels.empty()) {
            merge_labels(t, m.labels, m.wide_sense);
        }
    } else {
        throw IngestError("manifest " + path.string() + ": unknown format '" + m.format + "'");
    }
    Dataset ds = finish(std::move(t), m.name, m.test_ratio, m.split_seed);
    if (!m.image_dir.empty()) {
        ds.image_paths.reserve(ds.size());
        for (const auto& id : ds.sample_ids) {
            std::string file = m.image_pattern;
            const auto pos = file.find("{id}");
            if (pos != std::string::npos) {
                file.replace(pos, 4, id);
            }
            ds.image_paths.push_back((m.image_dir / file).string());
        }
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    const bool wide = !ds.wide_sense_labels.empty();
    const fs::path csv = dir / (ds.name + ".csv");
    {
        std::ofstream out(csv);
        out.precision(17);
        out << "id,split,labels" << (wide ? ",wide_sense" : "");
        for (Index j = 0; j < ds.dim(); ++j) {
            out << ",f" << j;
        }
        out << "\n";
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) {
                s += (i ? ";" : "") + v[i];
            }
            return s;
        };
        for (Index i = 0; i < ds.size(); ++i) {
            out << ds.sample_ids[i] << ',' << (ds.is_train[i] ? "train" : "test") << ',' << join(ds.labels[i]);
            if (wide) {
                out << ',' << join(ds.wide_sense_labels[i]);
            }
            for (Index j = 0; j < ds.dim(); ++j) {
                out << ',' << (*ds.features)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            out << "\n";
        }
        if (!out) {
            throw IngestError("failed writing " + csv.string());
        }
    }
    json m = {{"name", ds.name}, {"features_file", csv.filename().string()}, {"wide_sense", wide}};
    std::ofstream(dir / (ds.name + ".json")) << m.dump(2) << "\n";
}

Dataset make_blobs(const BlobOptions& o) {
    if (o.classes < 1 || o.per_class < 2 || o.dim < 1) {
        throw ConfigError("blobs: need at least one class, two samples per class and one dimension");
    }
    if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0) || !(o.spread > 0.0)) {
        throw ConfigError("blobs: test_fraction must lie in (0, 1) and spread must be positive");
    }
    Rng rng(derive_seed(o.seed, {0xb10b}));
    auto gauss = [&rng]() {
        const double u1 = 1.0 - uniform01(rng);
        const double u2 = uniform01(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };
    // Centers: best of several uniform draws by minimum pairwise distance.
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(o.classes), static_cast<Eigen::Index>(o.dim));
    double best_sep = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        Eigen::MatrixXd c(centers.rows(), centers.cols());
        for (Eigen::Index i = 0; i < c.rows(); ++i) {
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                c(i, j) = uniform01(rng);
            }
        }
        double sep = std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < c.rows(); ++a) {
            for (Eigen::Index b = a + 1; b < c.rows(); ++b) {
                sep = std::min(sep, (c.row(a) - c.row(b)).norm());
            }
        }
        if (sep > best_sep) {
            best_sep = sep;
            centers = c;
        }
    }
    const double sd = o.spread * (o.classes > 1 ? best_sep : 1.0);

    const std::size_t n = o.classes * o.per_class;
    RawTable t;
    t.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o.dim));
    const auto n_test = std::max<std::size_t>(
        1, std::min(o.per_class - 1, static_cast<std::size_t>(std::llround(o.test_fraction * o.per_class))));
    for (std::size_t c = 0; c < o.classes; ++c) {
        for (std::size_t s = 0; s < o.per_class; ++s) {
            const std::size_t i = c * o.per_class + s;
            t.ids.push_back(std::to_string(i));
            // Every per_class/n_test-th sample of a class goes to test.
            t.split.push_back(s * n_test / o.per_class != (s + 1) * n_test / o.per_class ? "test" : "train");
            t.labels.push_back({"c" + std::to_string(c)});
            for (std::size_t j = 0; j < o.dim; ++j) {
                t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + sd * gauss();
            }
        }
    }
    Dataset ds = finish(std::move(t), "blobs", std::nullopt, 0);
    ds.validate();
    return ds;
}

}  // namespace ital
