#include "c2bn/nslkdd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "c2bn/digest.hpp"
#include "c2bn/error.hpp"

namespace c2bn::nslkdd {
namespace {

constexpr std::size_t kProtocolCol = 1;
constexpr std::size_t kServiceCol = 2;
constexpr std::size_t kFlagCol = 3;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view cell, std::size_t line_no, std::string_view column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                        "' is not numeric: '" + std::string(cell) + "'");
    }
    return v;
}

const std::string& categorical_value(const RawRecord& r, std::size_t which) {
    switch (which) {
        case 0: return r.protocol_type;
        case 1: return r.service;
        default: return r.flag;
    }
}

std::string& categorical_value(RawRecord& r, std::size_t which) {
    switch (which) {
        case 0: return r.protocol_type;
        case 1: return r.service;
        default: return r.flag;
    }
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {
        "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
        "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
        "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
        "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
        "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
        "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
        "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
        "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
        "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
    return names;
}

bool is_categorical(std::size_t feature_column) {
    return feature_column == kProtocolCol || feature_column == kServiceCol ||
           feature_column == kFlagCol;
}

std::vector<RawRecord> parse_records(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    const auto& names = feature_names();
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != kFieldCount) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(kFieldCount) + " comma-separated fields, got " +
                            std::to_string(fields.size()));
        }
        RawRecord rec;
        std::size_t numeric_idx = 0;
        for (std::size_t col = 0; col < kFeatureCount; ++col) {
            if (is_categorical(col)) {
                categorical_value(rec, col - kProtocolCol) = std::string(fields[col]);
            } else {
                rec.numeric[numeric_idx++] = parse_number(fields[col], line_no, names[col]);
            }
        }
        rec.attack_name = std::string(fields[41]);
        rec.difficulty = static_cast<int>(parse_number(fields[42], line_no, "difficulty"));
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<RawRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open NSL-KDD file " + path.string());
    try {
        return parse_records(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_record(const RawRecord& rec) {
    std::string out;
    std::size_t numeric_idx = 0;
    char buf[40];
    for (std::size_t col = 0; col < kFeatureCount; ++col) {
        if (is_categorical(col)) {
            out += categorical_value(rec, col - kProtocolCol);
        } else {
            const auto res = std::to_chars(buf, buf + sizeof buf, rec.numeric[numeric_idx++]);
            out.append(buf, res.ptr);
        }
        out += ',';
    }
    out += rec.attack_name;
    out += ',';
    out += std::to_string(rec.difficulty);
    return out;
}

const std::vector<std::string>& ClassTaxonomy::category_names() {
    static const std::vector<std::string> names = {"Normal", "DoS", "Probe", "R2L", "U2R"};
    return names;
}

ClassTaxonomy ClassTaxonomy::parse(std::istream& in) {
    ClassTaxonomy tax;
    const auto& cats = category_names();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto fields = split_commas(body);
        if (fields.size() != 2) {
            throw DataError("taxonomy line " + std::to_string(line_no) +
                            ": expected 'attack_name,category'");
        }
        if (fields[0] == "attack_name") continue;
        const auto it = std::find(cats.begin(), cats.end(), fields[1]);
        if (it == cats.end()) {
            throw DataError("taxonomy line " + std::to_string(line_no) + ": unknown category '" +
                            std::string(fields[1]) + "'");
        }
        const auto idx = static_cast<std::size_t>(it - cats.begin());
        const auto [pos, inserted] = tax.entries_.emplace(std::string(fields[0]), idx);
        if (!inserted && pos->second != idx) {
            throw DataError("taxonomy line " + std::to_string(line_no) + ": attack '" +
                            std::string(fields[0]) + "' mapped to two categories");
        }
    }
    const auto normal = tax.entries_.find("normal");
    if (normal == tax.entries_.end() || normal->second != 0) {
        throw DataError("taxonomy must map 'normal' to Normal");
    }
    return tax;
}

ClassTaxonomy ClassTaxonomy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open taxonomy file " + path.string());
    return parse(in);
}

std::size_t ClassTaxonomy::map(std::string_view attack_name) const {
    const auto it = entries_.find(attack_name);
    if (it == entries_.end()) {
        throw DataError("attack name '" + std::string(attack_name) +
                        "' is not in the taxonomy; add it to the taxonomy file");
    }
    return it->second;
}

std::size_t map_attack(std::string_view attack_name, const ClassTaxonomy& taxonomy) {
    return taxonomy.map(attack_name);
}

std::size_t CategoricalVocab::index_of(std::string_view value) const {
    const auto it = std::lower_bound(values.begin(), values.end(), value);
    if (it == values.end() || *it != value) {
        throw DataError(name + " value '" + std::string(value) + "' is not in the fitted vocabulary");
    }
    return static_cast<std::size_t>(it - values.begin());
}

std::string compute_fingerprint(const EncodingSchema& schema) {
    std::string canon = "c2bn-schema/1\n";
    for (const auto& v : schema.categorical) {
        canon += v.name + "@" + std::to_string(v.offset) + ":";
        for (const auto& s : v.values) canon += s + "\x1f";
        canon += "\n";
    }
    for (const auto& n : schema.numeric) {
        canon += n.name + "@" + std::to_string(n.column) + ":" + double_bits_hex(n.min) + "," +
                 double_bits_hex(n.max) + "\n";
    }
    canon += "dim:" + std::to_string(schema.feature_dim) + "\n";
    return sha256_hex(canon);
}

EncodingSchema fit_schema(const std::vector<RawRecord>& train,
                          const std::vector<RawRecord>& vocab_extra, std::size_t pad_to) {
    if (train.empty()) throw DataError("fit_schema: no training records");
    std::array<std::set<std::string>, 3> vocab;
    for (const auto* set : {&train, &vocab_extra}) {
        for (const RawRecord& r : *set) {
            for (std::size_t k = 0; k < 3; ++k) vocab[k].insert(categorical_value(r, k));
        }
    }
    EncodingSchema schema;
    const auto& names = feature_names();
    std::size_t column = 0;
    std::size_t numeric_idx = 0;
    for (std::size_t col = 0; col < kFeatureCount; ++col) {
        if (is_categorical(col)) {
            const std::size_t k = col - kProtocolCol;
            CategoricalVocab v;
            v.name = std::string(names[col]);
            v.offset = column;
            v.values.assign(vocab[k].begin(), vocab[k].end());
            column += v.values.size();
            schema.categorical.push_back(std::move(v));
        } else {
            NumericRange n;
            n.name = std::string(names[col]);
            n.column = column++;
            n.min = n.max = train.front().numeric[numeric_idx];
            for (const RawRecord& r : train) {
                n.min = std::min(n.min, r.numeric[numeric_idx]);
                n.max = std::max(n.max, r.numeric[numeric_idx]);
            }
            schema.numeric.push_back(std::move(n));
            ++numeric_idx;
        }
    }
    schema.natural_dim = column;
    if (pad_to != 0 && pad_to < column) {
        throw ConfigError("pad_to " + std::to_string(pad_to) + " is narrower than the encoded width " +
                          std::to_string(column));
    }
    schema.feature_dim = pad_to == 0 ? column : pad_to;
    schema.fingerprint = compute_fingerprint(schema);
    return schema;
}

EncodedDataset transform(const std::vector<RawRecord>& records,
                         std::shared_ptr<const EncodingSchema> schema,
                         const ClassTaxonomy& taxonomy) {
    if (!schema) throw ConfigError("transform: schema not fitted");
    EncodedDataset ds;
    ds.num_classes = taxonomy.num_classes();
    ds.schema_fingerprint = schema->fingerprint;
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(records.size()),
                               static_cast<Eigen::Index>(schema->feature_dim));
    ds.labels.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const RawRecord& rec = records[r];
        auto row = ds.features.row(static_cast<Eigen::Index>(r));
        for (std::size_t i = 0; i < schema->numeric.size(); ++i) {
            const NumericRange& n = schema->numeric[i];
            double v = 0.0;
            if (!n.constant()) {
                v = std::clamp((rec.numeric[i] - n.min) / (n.max - n.min), 0.0, 1.0);
            }
            row(static_cast<Eigen::Index>(n.column)) = v;
        }
        for (std::size_t k = 0; k < schema->categorical.size(); ++k) {
            const CategoricalVocab& v = schema->categorical[k];
            row(static_cast<Eigen::Index>(v.offset + v.index_of(categorical_value(rec, k)))) = 1.0;
        }
        ds.labels.push_back(taxonomy.map(rec.attack_name));
    }
    ds.schema = std::move(schema);
    return ds;
}

RawRecord inverse_transform(std::span<const double> row, const EncodingSchema& schema) {
    if (row.size() != schema.feature_dim) {
        throw ShapeError("inverse_transform: row width " + std::to_string(row.size()) +
                         " vs schema width " + std::to_string(schema.feature_dim));
    }
    RawRecord rec;
    for (std::size_t i = 0; i < schema.numeric.size(); ++i) {
        const NumericRange& n = schema.numeric[i];
        rec.numeric[i] = n.min + std::clamp(row[n.column], 0.0, 1.0) * (n.max - n.min);
    }
    for (std::size_t k = 0; k < schema.categorical.size(); ++k) {
        const CategoricalVocab& v = schema.categorical[k];
        std::size_t best = 0;
        for (std::size_t j = 1; j < v.values.size(); ++j) {
            if (row[v.offset + j] > row[v.offset + best]) best = j;
        }
        categorical_value(rec, k) = v.values.at(best);
    }
    return rec;
}

std::string EncodingSchema::to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "c2bn-schema";
    j["version"] = 1;
    j["natural_dim"] = natural_dim;
    j["feature_dim"] = feature_dim;
    j["fingerprint"] = fingerprint;
    j["categorical"] = nlohmann::ordered_json::array();
    for (const auto& v : categorical) {
        j["categorical"].push_back({{"name", v.name}, {"offset", v.offset}, {"values", v.values}});
    }
    j["numeric"] = nlohmann::ordered_json::array();
    for (const auto& n : numeric) {
        j["numeric"].push_back({{"name", n.name},
                                {"column", n.column},
                                {"min", n.min},
                                {"max", n.max},
                                {"constant", n.constant()}});
    }
    return j.dump(2) + "\n";
}

EncodingSchema EncodingSchema::from_json(std::string_view text) {
    EncodingSchema s;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "c2bn-schema" || j.at("version") != 1) {
            throw FormatError("schema file has an unsupported format/version");
        }
        s.natural_dim = j.at("natural_dim").get<std::size_t>();
        s.feature_dim = j.at("feature_dim").get<std::size_t>();
        for (const auto& v : j.at("categorical")) {
            s.categorical.push_back({v.at("name").get<std::string>(), v.at("offset").get<std::size_t>(),
                                     v.at("values").get<std::vector<std::string>>()});
        }
        for (const auto& n : j.at("numeric")) {
            s.numeric.push_back({n.at("name").get<std::string>(), n.at("column").get<std::size_t>(),
                                 n.at("min").get<double>(), n.at("max").get<double>()});
        }
        s.fingerprint = j.at("fingerprint").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed schema file: ") + e.what());
    }
    if (compute_fingerprint(s) != s.fingerprint) {
        throw FormatError("schema file fingerprint does not match its contents");
    }
    return s;
}

void EncodingSchema::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file " + path.string());
    out << to_json();
}

EncodingSchema EncodingSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace c2bn::nslkdd
