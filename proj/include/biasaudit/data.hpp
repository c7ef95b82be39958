#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace biasaudit {

enum class FeatureKind { continuous, categorical };

// Whether higher scores are better (accuracy-style, bounded to [0, 1]) or
// scores are signed residuals where large values indicate poor performance.
enum class Orientation { performance, residual };

std::string to_string(FeatureKind kind);
std::string to_string(Orientation orientation);
Orientation parse_orientation(const std::string& text);

struct FeatureColumn {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    std::vector<std::string> categories;  // declared order; empty for continuous

    bool operator==(const FeatureColumn&) const = default;
};

class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureColumn> columns);

    const std::vector<FeatureColumn>& columns() const noexcept { return columns_; }
    std::size_t size() const noexcept { return columns_.size(); }
    const FeatureColumn& operator[](std::size_t i) const { return columns_[i]; }
    std::optional<std::size_t> find(const std::string& name) const;

    // Width after one-hot expansion.
    std::size_t encoded_width() const noexcept;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<FeatureColumn> columns_;
};

// Provenance of one expanded matrix column.
struct EncodedColumn {
    std::size_t source = 0;                 // index into FeatureSchema::columns()
    std::optional<std::size_t> category;    // set for one-hot indicator columns

    bool operator==(const EncodedColumn&) const = default;
};

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// The (X, y) pair an audit runs on: one-hot expanded features plus one
// performance score per row.
class AuditDataset {
public:
    AuditDataset(FeatureSchema schema, Matrix features, std::vector<double> scores,
                 std::vector<EncodedColumn> encoding_map, Orientation orientation);

    // Purely continuous dataset with columns x1..xp.
    static AuditDataset continuous(Matrix features, std::vector<double> scores,
                                   Orientation orientation = Orientation::performance);

    const FeatureSchema& schema() const noexcept { return schema_; }
    const Matrix& features() const noexcept { return features_; }
    const std::vector<double>& scores() const noexcept { return scores_; }
    const std::vector<EncodedColumn>& encoding_map() const noexcept { return encoding_map_; }
    Orientation orientation() const noexcept { return orientation_; }

    std::size_t size() const noexcept { return scores_.size(); }
    std::size_t width() const noexcept { return features_.cols(); }

    // Expanded column names: "age", "gender=Female", ...
    std::vector<std::string> column_names() const;

    // Rows in the given order (repeats allowed, e.g. bootstrap draws).
    AuditDataset select(std::span<const std::size_t> rows) const;

    bool operator==(const AuditDataset&) const = default;

private:
    FeatureSchema schema_;
    Matrix features_;
    std::vector<double> scores_;
    std::vector<EncodedColumn> encoding_map_;
    Orientation orientation_;
};

using RawCell = std::variant<double, std::string>;
using RawRow = std::vector<RawCell>;

struct EncodedFeatures {
    Matrix matrix;
    std::vector<EncodedColumn> encoding_map;
};

// Continuous cells must hold doubles and categorical cells strings naming a
// declared category. Throws ShapeError on arity mismatch, ParseError otherwise.
EncodedFeatures one_hot_encode(std::span<const RawRow> raw_rows, const FeatureSchema& schema);

// Inverse of one_hot_encode for a single matrix row.
RawRow decode_row(std::span<const double> encoded, const FeatureSchema& schema,
                  std::span<const EncodedColumn> encoding_map);

AuditDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                      const std::string& score_column,
                      Orientation orientation = Orientation::performance);

// Contents of the JSON sidecar describing a CSV file.
struct SchemaFile {
    FeatureSchema schema;
    std::string score_column;
    Orientation orientation = Orientation::performance;
};

SchemaFile load_schema_file(const std::filesystem::path& path);
SchemaFile parse_schema_json(const std::string& text);

// Fisher-Yates permutation of 0..n-1, deterministic in seed.
std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed);

AuditDataset shuffle_rows(const AuditDataset& dataset, std::uint64_t seed);

}  // namespace biasaudit
