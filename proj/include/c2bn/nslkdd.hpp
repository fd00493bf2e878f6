#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "c2bn/dataset.hpp"
#include "c2bn/matrix.hpp"

namespace c2bn::nslkdd {

inline constexpr std::size_t kFieldCount = 43;  // 41 features + attack name + difficulty
inline constexpr std::size_t kFeatureCount = 41;
inline constexpr std::size_t kNumericCount = 38;

// Column names of the 41 features, in file order.
const std::array<std::string_view, kFeatureCount>& feature_names();

// Feature columns 1..3 (protocol_type, service, flag) are categorical.
bool is_categorical(std::size_t feature_column);

struct RawRecord {
    std::array<double, kNumericCount> numeric{};  // numeric features in file order
    std::string protocol_type;
    std::string service;
    std::string flag;
    std::string attack_name;
    int difficulty = 0;
};

// One record per nonempty line. DataError carries the 1-based line number.
std::vector<RawRecord> parse_records(std::istream& in);
std::vector<RawRecord> load_records(const std::filesystem::path& path);

// 43-field line; numerics in shortest round-trip form, so the line re-parses exactly.
std::string format_record(const RawRecord& rec);

// attack name -> category index over the fixed category list
// (Normal, DoS, Probe, R2L, U2R).
class ClassTaxonomy {
public:
    static const std::vector<std::string>& category_names();

    // Two-column CSV "attack_name,category"; '#' lines and a header are skipped.
    static ClassTaxonomy parse(std::istream& in);
    static ClassTaxonomy load(const std::filesystem::path& path);

    std::size_t num_classes() const { return category_names().size(); }
    // Throws DataError naming the attack when it is unknown.
    std::size_t map(std::string_view attack_name) const;
    const std::map<std::string, std::size_t, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, std::size_t, std::less<>> entries_;
};

std::size_t map_attack(std::string_view attack_name, const ClassTaxonomy& taxonomy);

struct CategoricalVocab {
    std::string name;
    std::size_t offset = 0;           // first encoded column of the one-hot block
    std::vector<std::string> values;  // sorted; position = column within the block

    // Throws DataError when the value was not seen during fitting.
    std::size_t index_of(std::string_view value) const;
};

struct NumericRange {
    std::string name;
    std::size_t column = 0;  // encoded column
    double min = 0.0;
    double max = 0.0;

    bool constant() const { return min == max; }
};

// Encoded row layout follows the file's column order: duration, then the
// protocol_type/service/flag one-hot blocks, then the remaining numerics,
// then optional zero padding up to `feature_dim`.
struct EncodingSchema {
    std::vector<CategoricalVocab> categorical;  // protocol_type, service, flag
    std::vector<NumericRange> numeric;          // 38 entries, file order
    std::size_t natural_dim = 0;                // 38 + sum of vocabulary sizes
    std::size_t feature_dim = 0;                // natural_dim or the padded width
    std::string fingerprint;

    std::string to_json() const;
    static EncodingSchema from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static EncodingSchema load(const std::filesystem::path& path);
};

// Vocabularies come from train and vocab_extra together (pass the test split
// there); numeric ranges come from train only. pad_to = 0 disables padding;
// otherwise it must be >= the natural width.
EncodingSchema fit_schema(const std::vector<RawRecord>& train,
                          const std::vector<RawRecord>& vocab_extra = {}, std::size_t pad_to = 0);

std::string compute_fingerprint(const EncodingSchema& schema);

EncodedDataset transform(const std::vector<RawRecord>& records,
                         std::shared_ptr<const EncodingSchema> schema,
                         const ClassTaxonomy& taxonomy);

// Argmax per one-hot block (ties -> lowest column), numerics rescaled to the
// fitted range. attack_name/difficulty are left empty.
RawRecord inverse_transform(std::span<const double> row, const EncodingSchema& schema);

}  // namespace c2bn::nslkdd
