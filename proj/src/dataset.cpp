#include "c2bn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "c2bn/binio.hpp"
#include "c2bn/error.hpp"

namespace c2bn {
namespace {

constexpr std::string_view kDatasetMagic = "C2BNDSET";
constexpr std::uint32_t kDatasetVersion = 1;

void save_binary(const EncodedDataset& ds, std::ostream& out, const std::string& manifest) {
    binio::write_magic(out, kDatasetMagic);
    binio::write_u32(out, kDatasetVersion);
    binio::write_string(out, manifest);
    binio::write_string(out, ds.schema_fingerprint);
    binio::write_u64(out, ds.num_classes);
    binio::write_matrix(out, ds.features);
    binio::write_u64(out, ds.labels.size());
    for (std::size_t l : ds.labels) binio::write_u64(out, l);
}

EncodedDataset load_binary(std::istream& in) {
    binio::expect_magic(in, kDatasetMagic, "encoded dataset");
    const std::uint32_t version = binio::read_u32(in);
    if (version != kDatasetVersion) {
        throw FormatError("encoded dataset version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kDatasetVersion) + ")");
    }
    EncodedDataset ds;
    binio::read_string(in);  // manifest
    ds.schema_fingerprint = binio::read_string(in);
    ds.num_classes = binio::read_u64(in);
    ds.features = binio::read_matrix(in);
    const std::uint64_t n = binio::read_u64(in);
    if (n != static_cast<std::uint64_t>(ds.features.rows())) {
        throw FormatError("encoded dataset: label count does not match row count");
    }
    ds.labels.resize(n);
    for (auto& l : ds.labels) l = binio::read_u64(in);
    return ds;
}

void save_csv(const EncodedDataset& ds, std::ostream& out, const std::string& manifest) {
    out << "# " << manifest << "\n";
    out << "# fingerprint=" << ds.schema_fingerprint << " num_classes=" << ds.num_classes << "\n";
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) out << "f" << c << ",";
    out << "label\n";
    out.precision(17);
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.features.cols(); ++c) out << ds.features(r, c) << ",";
        out << ds.labels[static_cast<std::size_t>(r)] << "\n";
    }
}

EncodedDataset load_csv(std::istream& in) {
    EncodedDataset ds;
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto fp = line.find("fingerprint=");
            if (fp != std::string::npos) {
                std::istringstream meta(line.substr(fp + 12));
                std::string nc;
                meta >> ds.schema_fingerprint >> nc;
                if (nc.rfind("num_classes=", 0) == 0) ds.num_classes = std::stoul(nc.substr(12));
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
            continue;
        }
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError("encoded dataset CSV line " + std::to_string(line_no) +
                                  ": non-numeric cell '" + cell + "'");
            }
        }
        if (vals.size() != width + 1) {
            throw FormatError("encoded dataset CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(width + 1) + " cells, got " +
                              std::to_string(vals.size()));
        }
        rows.push_back(std::move(vals));
    }
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    ds.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        ds.labels[r] = static_cast<std::size_t>(rows[r][width]);
    }
    return ds;
}

}  // namespace

void validate(const EncodedDataset& ds) {
    if (static_cast<std::size_t>(ds.features.rows()) != ds.labels.size()) {
        throw ShapeError("dataset: " + std::to_string(ds.labels.size()) + " labels for features " +
                         shape_of(ds.features));
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] >= ds.num_classes) {
            throw LabelError("dataset: label " + std::to_string(ds.labels[i]) + " at row " +
                             std::to_string(i) + " exceeds class count " +
                             std::to_string(ds.num_classes));
        }
    }
}

std::vector<std::size_t> class_counts(const EncodedDataset& ds) {
    std::vector<std::size_t> counts(ds.num_classes, 0);
    for (std::size_t l : ds.labels) {
        if (l >= ds.num_classes) {
            throw LabelError("class_counts: label " + std::to_string(l) + " out of range");
        }
        ++counts[l];
    }
    return counts;
}

EncodedDataset select_rows(const EncodedDataset& ds, std::span<const std::size_t> rows) {
    EncodedDataset out;
    out.num_classes = ds.num_classes;
    out.schema_fingerprint = ds.schema_fingerprint;
    out.schema = ds.schema;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            ds.features.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(ds.labels[rows[i]]);
    }
    return out;
}

EncodedDataset concat_rows(const EncodedDataset& base, const EncodedDataset& extra) {
    if (extra.size() == 0) return base;
    if (base.features.cols() != extra.features.cols() || base.num_classes != extra.num_classes) {
        throw ShapeError("concat_rows: datasets " + shape_of(base.features) + " and " +
                         shape_of(extra.features) + " are not compatible");
    }
    EncodedDataset out = base;
    out.features.conservativeResize(base.features.rows() + extra.features.rows(),
                                    base.features.cols());
    out.features.bottomRows(extra.features.rows()) = extra.features;
    out.labels.insert(out.labels.end(), extra.labels.begin(), extra.labels.end());
    return out;
}

std::vector<std::size_t> stratified_subsample(const Labels& labels, std::size_t num_classes,
                                              double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("subsample fraction must lie in (0, 1]");
    }
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> keep;
    for (auto& rows : by_class) {
        if (rows.empty()) continue;
        auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
        take = std::clamp<std::size_t>(take, 1, rows.size());
        // Partial Fisher-Yates; std::shuffle's draw pattern is library-specific.
        for (std::size_t i = 0; i < take; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
            std::swap(rows[i], rows[pick(rng)]);
        }
        keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

void save_dataset(const EncodedDataset& ds, const std::filesystem::path& path,
                  const std::string& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file " + path.string());
    if (path.extension() == ".csv") {
        save_csv(ds, out, manifest);
    } else {
        save_binary(ds, out, manifest);
    }
    if (!out) throw DataError("failed writing dataset file " + path.string());
}

EncodedDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file " + path.string());
    EncodedDataset ds = path.extension() == ".csv" ? load_csv(in) : load_binary(in);
    validate(ds);
    return ds;
}

}  // namespace c2bn
