#include "biasaudit/regions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "biasaudit/error.hpp"

namespace biasaudit {

FeatureSpace::FeatureSpace(std::vector<Dimension> dims, std::vector<EncodedColumn> columns)
    : dims_(std::move(dims)), columns_(std::move(columns)) {
    for (const auto& d : dims_) {
        if (d.kind == FeatureKind::continuous && !(d.low <= d.high))
            throw DomainError("dimension '" + d.name + "' has low > high");
        if (d.kind == FeatureKind::categorical && d.categories.empty())
            throw DomainError("categorical dimension '" + d.name + "' has no categories");
    }
    for (const auto& c : columns_) {
        if (c.source >= dims_.size()) throw DomainError("encoded column refers to a missing dimension");
        const auto& d = dims_[c.source];
        if (c.category.has_value() != (d.kind == FeatureKind::categorical))
            throw DomainError("encoded column kind does not match dimension '" + d.name + "'");
        if (c.category && *c.category >= d.categories.size()) throw DomainError("category index out of range");
    }
}

FeatureSpace FeatureSpace::from_dataset(const AuditDataset& dataset) {
    std::vector<Dimension> dims;
    for (const auto& col : dataset.schema().columns())
        dims.push_back({col.name, col.kind, std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity(), col.categories});
    const auto& map = dataset.encoding_map();
    for (std::size_t j = 0; j < map.size(); ++j) {
        if (map[j].category) continue;
        auto& d = dims[map[j].source];
        for (std::size_t r = 0; r < dataset.size(); ++r) {
            d.low = std::min(d.low, dataset.features()(r, j));
            d.high = std::max(d.high, dataset.features()(r, j));
        }
    }
    return FeatureSpace(std::move(dims), map);
}

FeatureSpace FeatureSpace::box(std::size_t p, double low, double high) {
    std::vector<Dimension> dims;
    std::vector<EncodedColumn> cols;
    for (std::size_t j = 0; j < p; ++j) {
        dims.push_back({"x" + std::to_string(j + 1), FeatureKind::continuous, low, high, {}});
        cols.push_back({j, std::nullopt});
    }
    return FeatureSpace(std::move(dims), std::move(cols));
}

Region::Region(FeatureSpace space, std::vector<DimensionBound> bounds)
    : space_(std::move(space)), bounds_(std::move(bounds)) {
    if (bounds_.size() != space_.dims().size()) throw ShapeError("region needs one bound per dimension");
    for (std::size_t d = 0; d < bounds_.size(); ++d) {
        const auto& dim = space_.dims()[d];
        if (const auto* iv = std::get_if<Interval>(&bounds_[d])) {
            if (dim.kind != FeatureKind::continuous) throw DomainError("interval bound on categorical dimension");
            if (!(iv->low <= iv->high)) throw DomainError("interval with low > high on '" + dim.name + "'");
        } else {
            const auto& cs = std::get<CategorySet>(bounds_[d]);
            if (dim.kind != FeatureKind::categorical) throw DomainError("category bound on continuous dimension");
            if (cs.members.empty()) throw DomainError("empty category subset on '" + dim.name + "'");
            if (!std::is_sorted(cs.members.begin(), cs.members.end()) ||
                std::adjacent_find(cs.members.begin(), cs.members.end()) != cs.members.end() ||
                cs.members.back() >= dim.categories.size())
                throw DomainError("invalid category subset on '" + dim.name + "'");
        }
    }
}

Region Region::ambient(const FeatureSpace& space) {
    std::vector<DimensionBound> bounds;
    for (const auto& d : space.dims()) {
        if (d.kind == FeatureKind::continuous) {
            bounds.emplace_back(Interval{d.low, d.high, false});
        } else {
            CategorySet all;
            for (std::size_t k = 0; k < d.categories.size(); ++k) all.members.push_back(k);
            bounds.emplace_back(std::move(all));
        }
    }
    return Region(space, std::move(bounds));
}

Region Region::box(const FeatureSpace& space, std::span<const double> lows, std::span<const double> highs) {
    if (lows.size() != space.dims().size() || highs.size() != space.dims().size())
        throw ShapeError("box bounds must match the space dimension");
    std::vector<DimensionBound> bounds;
    for (std::size_t d = 0; d < lows.size(); ++d) bounds.emplace_back(Interval{lows[d], highs[d], false});
    return Region(space, std::move(bounds));
}

bool Region::contains(std::span<const double> encoded_x) const {
    if (encoded_x.size() != space_.columns().size()) throw ShapeError("point width does not match the space");
    for (std::size_t j = 0; j < encoded_x.size(); ++j) {
        const auto& col = space_.columns()[j];
        const auto& b = bounds_[col.source];
        if (const auto* iv = std::get_if<Interval>(&b)) {
            const double v = encoded_x[j];
            if (v > iv->high || v < iv->low || (iv->low_open && v == iv->low)) return false;
        } else if (encoded_x[j] > 0.5) {
            const auto& m = std::get<CategorySet>(b).members;
            if (!std::binary_search(m.begin(), m.end(), *col.category)) return false;
        }
    }
    return true;
}

Region region_from_path(const RegressionTree& tree, std::size_t node_id, const FeatureSpace& space) {
    if (tree.n_features() != space.columns().size())
        throw ShapeError("tree feature count does not match the feature space");
    auto bounds = Region::ambient(space).bounds();
    for (const auto& [ancestor, went_left] : tree.path_to(node_id)) {
        const auto& rule = *tree.node(ancestor).rule;
        const auto& col = space.columns()[rule.feature];
        auto& b = bounds[col.source];
        if (auto* iv = std::get_if<Interval>(&b)) {
            if (went_left) {
                iv->high = std::min(iv->high, rule.threshold);
            } else if (rule.threshold >= iv->low) {
                iv->low = rule.threshold;
                iv->low_open = true;
            }
            if (iv->high < iv->low) iv->high = iv->low;
        } else {
            // Indicator column: <= threshold means "not this category".
            auto& m = std::get<CategorySet>(b).members;
            const auto k = *col.category;
            if (went_left)
                m.erase(std::remove(m.begin(), m.end(), k), m.end());
            else
                m.assign({k});
            if (m.empty()) throw DomainError("path excludes every category of '" + space.dims()[col.source].name + "'");
        }
    }
    return Region(space, std::move(bounds));
}

double hypervolume(const Region& region) {
    double vol = 1.0;
    for (std::size_t d = 0; d < region.bounds().size(); ++d) {
        const auto& b = region.bounds()[d];
        if (const auto* iv = std::get_if<Interval>(&b))
            vol *= iv->width();
        else
            vol *= static_cast<double>(std::get<CategorySet>(b).members.size()) /
                   static_cast<double>(region.space().dims()[d].categories.size());
    }
    return vol;
}

std::optional<Region> intersect(const Region& a, const Region& b) {
    if (!(a.space() == b.space())) throw DomainError("regions live in different feature spaces");
    std::vector<DimensionBound> out;
    for (std::size_t d = 0; d < a.bounds().size(); ++d) {
        if (const auto* ia = std::get_if<Interval>(&a.bounds()[d])) {
            const auto& ib = std::get<Interval>(b.bounds()[d]);
            Interval iv;
            if (ia->low > ib.low) {
                iv.low = ia->low;
                iv.low_open = ia->low_open;
            } else if (ib.low > ia->low) {
                iv.low = ib.low;
                iv.low_open = ib.low_open;
            } else {
                iv.low = ia->low;
                iv.low_open = ia->low_open || ib.low_open;
            }
            iv.high = std::min(ia->high, ib.high);
            if (!(iv.high - iv.low > 0.0)) return std::nullopt;
            out.emplace_back(iv);
        } else {
            const auto& ma = std::get<CategorySet>(a.bounds()[d]).members;
            const auto& mb = std::get<CategorySet>(b.bounds()[d]).members;
            CategorySet cs;
            std::set_intersection(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(cs.members));
            if (cs.members.empty()) return std::nullopt;
            out.emplace_back(std::move(cs));
        }
    }
    return Region(a.space(), std::move(out));
}

namespace {

double cvr_formula(double overlap, double true_volume, double estimated_volume) {
    return 0.5 * (overlap / true_volume + overlap / estimated_volume);
}

}  // namespace

double coverage_ratio(const Region& true_region, const Region& estimated) {
    const double vs = hypervolume(true_region);
    const double ve = hypervolume(estimated);
    if (!(vs > 0.0) || !(ve > 0.0)) throw DomainError("coverage ratio needs regions with positive volume");
    const auto overlap = intersect(true_region, estimated);
    return cvr_formula(overlap ? hypervolume(*overlap) : 0.0, vs, ve);
}

double estimated_region_union_cvr(const Region& true_region, std::span<const Region> estimated) {
    if (estimated.empty()) throw DomainError("no estimated regions");
    const double vs = hypervolume(true_region);
    if (!(vs > 0.0)) throw DomainError("true region has zero volume");
    for (std::size_t i = 0; i < estimated.size(); ++i)
        for (std::size_t j = i + 1; j < estimated.size(); ++j)
            if (const auto o = intersect(estimated[i], estimated[j]); o && hypervolume(*o) > 0.0)
                throw DomainError("estimated regions overlap");
    double ve = 0.0, overlap = 0.0;
    for (const auto& r : estimated) {
        ve += hypervolume(r);
        if (const auto o = intersect(true_region, r)) overlap += hypervolume(*o);
    }
    if (!(ve > 0.0)) throw DomainError("estimated regions have zero volume");
    return cvr_formula(overlap, vs, ve);
}

namespace {

std::string fmt_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string describe(const Region& region) {
    const auto ambient = Region::ambient(region.space());
    std::vector<std::string> terms;
    for (std::size_t d = 0; d < region.bounds().size(); ++d) {
        const auto& dim = region.space().dims()[d];
        const auto& b = region.bounds()[d];
        if (const auto* iv = std::get_if<Interval>(&b)) {
            const auto& amb = std::get<Interval>(ambient.bounds()[d]);
            const bool lower = iv->low > amb.low || iv->low_open;
            const bool upper = iv->high < amb.high;
            const std::string lo_op = iv->low_open ? " < " : " <= ";
            if (lower && upper)
                terms.push_back(fmt_number(iv->low) + lo_op + dim.name + " <= " + fmt_number(iv->high));
            else if (lower)
                terms.push_back(dim.name + (iv->low_open ? " > " : " >= ") + fmt_number(iv->low));
            else if (upper)
                terms.push_back(dim.name + " <= " + fmt_number(iv->high));
        } else {
            const auto& m = std::get<CategorySet>(b).members;
            if (m.size() == dim.categories.size()) continue;
            if (m.size() == 1) {
                terms.push_back(dim.name + " = " + dim.categories[m.front()]);
            } else {
                std::string set;
                for (auto k : m) set += (set.empty() ? "" : ", ") + dim.categories[k];
                terms.push_back(dim.name + " in {" + set + "}");
            }
        }
    }
    if (terms.empty()) return "(entire feature space)";
    std::string out;
    for (const auto& t : terms) out += (out.empty() ? "" : " AND ") + t;
    return out;
}

}  // namespace biasaudit
