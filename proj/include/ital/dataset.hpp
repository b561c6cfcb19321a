#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ital/common.hpp"

namespace ital {

/// Samples with features scaled to [0, 1], a train/test split and one or more
/// class labels each. Optional "wide sense" labels mark samples the simulated
/// user considers too ambiguous to annotate for that class.
struct Dataset {
    std::string name;
    std::shared_ptr<const FeatureMatrix> features;
    std::vector<std::string> sample_ids;
    std::vector<char> is_train;
    std::vector<std::vector<std::string>> labels;
    std::vector<std::vector<std::string>> wide_sense_labels;  // empty or one entry per sample
    std::vector<std::string> image_paths;                     // empty or one entry per sample (absolute)

    Index size() const { return sample_ids.size(); }
    Index dim() const { return features ? static_cast<Index>(features->cols()) : 0; }
    IdList train_ids() const;
    IdList test_ids() const;
    /// Sorted label names.
    std::vector<std::string> vocabulary() const;
    bool has_label(Index i, const std::string& label) const;
    /// The label only appears among the wide-sense labels of sample i.
    bool wide_sense_only(Index i, const std::string& label) const;
    bool has_images() const { return !image_paths.empty(); }
    std::optional<Index> find(const std::string& sample_id) const;

    /// Throws IngestError unless sizes line up, every sample has a label and
    /// both splits are nonempty.
    void validate() const;
};

struct IngestSummary {
    Index samples = 0;
    Index dimensions = 0;
    Index train = 0;
    Index test = 0;
    std::vector<std::pair<std::string, Index>> label_counts;
};

IngestSummary summarize(const Dataset& ds);

/// Raw table before scaling; produced by the readers below.
struct RawTable {
    std::vector<std::string> ids;
    std::vector<std::string> split;  // "train" / "test" (or empty when assigned later)
    std::vector<std::vector<std::string>> labels;
    std::vector<std::vector<std::string>> wide_sense;
    Eigen::MatrixXd values;
};

/// Delimited text: id,split,labels[,wide_sense],f_1..f_d. Labels are separated
/// by ';'. A first row starting with "id" is taken as a header.
RawTable read_feature_csv(const std::filesystem::path& path, bool has_wide_sense);

/// Little-endian binary: "ITALDS1", u32 n, u32 d, n x u32 ids, n*d f32 row-major.
RawTable read_feature_binary(const std::filesystem::path& path);
void write_feature_binary(const std::filesystem::path& path, const std::vector<std::uint32_t>& ids,
                          const Eigen::MatrixXd& values);

/// Min-max scaling per column from train rows; test rows are clamped to [0, 1];
/// constant columns map to 0.
FeatureMatrix scale_features(const Eigen::MatrixXd& values, const std::vector<char>& is_train);

/// Loads a dataset from a JSON manifest, or directly from a .csv/.bin features
/// file whose split column is authoritative.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes features (as stored, i.e. scaled) plus a manifest next to it.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

struct BlobOptions {
    std::size_t classes = 3;
    std::size_t per_class = 60;
    std::size_t dim = 2;
    /// Cluster standard deviation relative to the center spacing; larger overlaps more.
    double spread = 0.15;
    double test_fraction = 0.3;
    std::uint64_t seed = 1;
};

/// Seeded isotropic Gaussian blobs; labels are "c0", "c1", ...
Dataset make_blobs(const BlobOptions& options);

}  // namespace ital
