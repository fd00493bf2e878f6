#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "c2bn/matrix.hpp"

namespace c2bn {

namespace nslkdd {
struct EncodingSchema;
}

// Feature matrix + per-row class index. `schema` is set when the rows came from
// an NSL-KDD encoding; `schema_fingerprint` is always set so generators can be
// matched against the data they were trained on.
struct EncodedDataset {
    Matrix features;
    Labels labels;
    std::size_t num_classes = 0;
    std::string schema_fingerprint;
    std::shared_ptr<const nslkdd::EncodingSchema> schema;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
};

// Throws ShapeError/LabelError when rows, labels and class count disagree.
void validate(const EncodedDataset& ds);

std::vector<std::size_t> class_counts(const EncodedDataset& ds);

EncodedDataset select_rows(const EncodedDataset& ds, std::span<const std::size_t> rows);

// Appends `extra` rows after `base`; both must share width, class count and fingerprint.
EncodedDataset concat_rows(const EncodedDataset& base, const EncodedDataset& extra);

// Per class, keep round(fraction * count) rows (at least one when the class is
// present), drawn without replacement; result is in original row order.
std::vector<std::size_t> stratified_subsample(const Labels& labels, std::size_t num_classes,
                                              double fraction, std::uint64_t seed);

// ".csv" selects the text format, anything else the binary one. The manifest
// line is stored verbatim in either format.
void save_dataset(const EncodedDataset& ds, const std::filesystem::path& path,
                  const std::string& manifest);
EncodedDataset load_dataset(const std::filesystem::path& path);

}  // namespace c2bn
