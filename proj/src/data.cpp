#include "biasaudit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biasaudit/error.hpp"
#include "biasaudit/rng.hpp"

namespace biasaudit {

std::string to_string(FeatureKind kind) {
    return kind == FeatureKind::continuous ? "continuous" : "categorical";
}

std::string to_string(Orientation orientation) {
    return orientation == Orientation::performance ? "performance" : "residual";
}

Orientation parse_orientation(const std::string& text) {
    if (text == "performance") return Orientation::performance;
    if (text == "residual") return Orientation::residual;
    throw SchemaError("unknown orientation '" + text + "' (expected performance or residual)");
}

FeatureSchema::FeatureSchema(std::vector<FeatureColumn> columns) : columns_(std::move(columns)) {
    std::set<std::string> names;
    for (const auto& col : columns_) {
        if (col.name.empty()) throw SchemaError("column name must not be empty");
        if (!names.insert(col.name).second) throw SchemaError("duplicate column name '" + col.name + "'");
        if (col.kind == FeatureKind::categorical) {
            if (col.categories.empty())
                throw SchemaError("categorical column '" + col.name + "' declares no categories");
            std::set<std::string> seen(col.categories.begin(), col.categories.end());
            if (seen.size() != col.categories.size())
                throw SchemaError("categorical column '" + col.name + "' has duplicate categories");
        } else if (!col.categories.empty()) {
            throw SchemaError("continuous column '" + col.name + "' must not declare categories");
        }
    }
}

std::optional<std::size_t> FeatureSchema::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

std::size_t FeatureSchema::encoded_width() const noexcept {
    std::size_t width = 0;
    for (const auto& col : columns_)
        width += col.kind == FeatureKind::continuous ? 1 : col.categories.size();
    return width;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw ShapeError("matrix data size does not match its shape");
}

AuditDataset::AuditDataset(FeatureSchema schema, Matrix features, std::vector<double> scores,
                           std::vector<EncodedColumn> encoding_map, Orientation orientation)
    : schema_(std::move(schema)),
      features_(std::move(features)),
      scores_(std::move(scores)),
      encoding_map_(std::move(encoding_map)),
      orientation_(orientation) {
    if (scores_.empty()) throw EmptyInputError("dataset has no rows");
    if (features_.rows() != scores_.size()) throw ShapeError("feature rows and score count differ");
    if (features_.cols() != encoding_map_.size() || features_.cols() != schema_.encoded_width())
        throw ShapeError("feature width does not match schema encoding");
    for (double v : features_.data())
        if (!std::isfinite(v)) throw DomainError("feature matrix contains a non-finite value");
    for (double s : scores_) {
        if (!std::isfinite(s)) throw DomainError("score is not finite");
        if (orientation_ == Orientation::performance && (s < 0.0 || s > 1.0))
            throw DomainError("performance score outside [0, 1]");
    }
}

AuditDataset AuditDataset::continuous(Matrix features, std::vector<double> scores, Orientation orientation) {
    std::vector<FeatureColumn> cols;
    std::vector<EncodedColumn> map;
    for (std::size_t j = 0; j < features.cols(); ++j) {
        cols.push_back({"x" + std::to_string(j + 1), FeatureKind::continuous, {}});
        map.push_back({j, std::nullopt});
    }
    return AuditDataset(FeatureSchema(std::move(cols)), std::move(features), std::move(scores), std::move(map),
                        orientation);
}

std::vector<std::string> AuditDataset::column_names() const {
    std::vector<std::string> names;
    names.reserve(encoding_map_.size());
    for (const auto& enc : encoding_map_) {
        const auto& col = schema_[enc.source];
        names.push_back(enc.category ? col.name + "=" + col.categories[*enc.category] : col.name);
    }
    return names;
}

AuditDataset AuditDataset::select(std::span<const std::size_t> rows) const {
    Matrix x(rows.size(), width());
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = features_.row(rows[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
        y[i] = scores_[rows[i]];
    }
    return AuditDataset(schema_, std::move(x), std::move(y), encoding_map_, orientation_);
}

EncodedFeatures one_hot_encode(std::span<const RawRow> raw_rows, const FeatureSchema& schema) {
    EncodedFeatures out;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (schema[c].kind == FeatureKind::continuous) {
            out.encoding_map.push_back({c, std::nullopt});
        } else {
            for (std::size_t k = 0; k < schema[c].categories.size(); ++k) out.encoding_map.push_back({c, k});
        }
    }
    out.matrix = Matrix(raw_rows.size(), out.encoding_map.size());

    for (std::size_t r = 0; r < raw_rows.size(); ++r) {
        const auto& row = raw_rows[r];
        if (row.size() != schema.size())
            throw ShapeError("row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                             " cells, schema has " + std::to_string(schema.size()));
        std::size_t j = 0;
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const auto& col = schema[c];
            if (col.kind == FeatureKind::continuous) {
                const auto* v = std::get_if<double>(&row[c]);
                if (!v) throw ParseError(r + 1, col.name, "expected a number");
                out.matrix(r, j++) = *v;
            } else {
                const auto* label = std::get_if<std::string>(&row[c]);
                if (!label) throw ParseError(r + 1, col.name, "expected a category label");
                const auto it = std::find(col.categories.begin(), col.categories.end(), *label);
                if (it == col.categories.end()) throw ParseError(r + 1, col.name, "unknown category '" + *label + "'");
                const auto hit = static_cast<std::size_t>(it - col.categories.begin());
                for (std::size_t k = 0; k < col.categories.size(); ++k) out.matrix(r, j++) = k == hit ? 1.0 : 0.0;
            }
        }
    }
    return out;
}

RawRow decode_row(std::span<const double> encoded, const FeatureSchema& schema,
                  std::span<const EncodedColumn> encoding_map) {
    if (encoded.size() != encoding_map.size()) throw ShapeError("encoded row width mismatch");
    RawRow row(schema.size());
    for (std::size_t j = 0; j < encoded.size(); ++j) {
        const auto& enc = encoding_map[j];
        if (!enc.category) {
            row[enc.source] = encoded[j];
        } else if (encoded[j] > 0.5) {
            row[enc.source] = schema[enc.source].categories[*enc.category];
        }
    }
    return row;
}

namespace {

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    const char* first = t.data();
    if (*first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace

AuditDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema, const std::string& score_column,
                      Orientation orientation) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw EmptyInputError("'" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto header = split_record(line);
    for (auto& h : header) h = trim(h);

    auto column_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("column '" + name + "' missing from header of '" + path.string() + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> feature_pos;
    for (const auto& col : schema.columns()) feature_pos.push_back(column_index(col.name));
    const std::size_t score_pos = column_index(score_column);

    std::vector<RawRow> raw;
    std::vector<double> scores;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const auto cells = split_record(line);
        if (cells.size() != header.size())
            throw ParseError(row_no, "*", "expected " + std::to_string(header.size()) + " cells, found " +
                                              std::to_string(cells.size()));
        RawRow row;
        row.reserve(schema.size());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const auto& col = schema[c];
            const std::string cell = trim(cells[feature_pos[c]]);
            if (cell.empty()) throw ParseError(row_no, col.name, "missing value");
            if (col.kind == FeatureKind::continuous) {
                const auto v = parse_number(cell);
                if (!v) throw ParseError(row_no, col.name, "not a finite number: '" + cell + "'");
                row.emplace_back(*v);
            } else {
                if (std::find(col.categories.begin(), col.categories.end(), cell) == col.categories.end())
                    throw ParseError(row_no, col.name, "unknown category '" + cell + "'");
                row.emplace_back(cell);
            }
        }
        const auto s = parse_number(cells[score_pos]);
        if (!s) throw ParseError(row_no, score_column, "score is not a finite number");
        if (orientation == Orientation::performance && (*s < 0.0 || *s > 1.0))
            throw ParseError(row_no, score_column, "performance score outside [0, 1]");
        raw.push_back(std::move(row));
        scores.push_back(*s);
    }
    if (raw.empty()) throw EmptyInputError("'" + path.string() + "' has a header but no data rows");

    auto encoded = one_hot_encode(raw, schema);
    return AuditDataset(schema, std::move(encoded.matrix), std::move(scores), std::move(encoded.encoding_map),
                        orientation);
}

SchemaFile parse_schema_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
    }
    try {
        SchemaFile out;
        std::vector<FeatureColumn> cols;
        for (const auto& c : doc.at("columns")) {
            FeatureColumn col;
            col.name = c.at("name").get<std::string>();
            const auto kind = c.at("kind").get<std::string>();
            if (kind == "continuous") {
                col.kind = FeatureKind::continuous;
            } else if (kind == "categorical") {
                col.kind = FeatureKind::categorical;
                col.categories = c.at("categories").get<std::vector<std::string>>();
            } else {
                throw SchemaError("column '" + col.name + "' has unknown kind '" + kind + "'");
            }
            cols.push_back(std::move(col));
        }
        out.schema = FeatureSchema(std::move(cols));
        out.score_column = doc.at("score_column").get<std::string>();
        if (out.schema.find(out.score_column)) throw SchemaError("score column is also declared as a feature");
        out.orientation = parse_orientation(doc.value("orientation", std::string("performance")));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid schema: ") + e.what());
    }
}

SchemaFile load_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_schema_json(ss.str());
}

std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(perm));
    return perm;
}

AuditDataset shuffle_rows(const AuditDataset& dataset, std::uint64_t seed) {
    const auto perm = shuffle_permutation(dataset.size(), seed);
    return dataset.select(perm);
}

}  // namespace biasaudit
