#include "biasaudit/serialize.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "biasaudit/error.hpp"

namespace biasaudit {

namespace {

std::string fmt(double v, const char* format = "%.4g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

MaxFeatures max_features_from_json(const Json& v) {
    if (v.is_null()) return MaxFeatures::all;
    return parse_max_features(v.get<std::string>());
}

Json max_features_to_json(MaxFeatures m) {
    if (m == MaxFeatures::all) return nullptr;
    return to_string(m);
}

std::size_t positive_count(const Json& v, const char* name) {
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw UsageError(std::string(name) + " must be a positive integer");
    return v.get<std::size_t>();
}

void apply_param(HyperParams& hp, const std::string& key, const Json& v) {
    if (key == "criterion") {
        hp.criterion = parse_criterion(v.get<std::string>());
    } else if (key == "max_depth") {
        hp.max_depth = static_cast<int>(positive_count(v, "max_depth"));
    } else if (key == "min_samples_split") {
        hp.min_samples_split = positive_count(v, "min_samples_split");
    } else if (key == "min_samples_leaf") {
        hp.min_samples_leaf = positive_count(v, "min_samples_leaf");
    } else if (key == "ccp_alpha") {
        if (!v.is_number()) throw UsageError("ccp_alpha must be a number");
        hp.ccp_alpha = v.get<double>();
    } else if (key == "max_features") {
        hp.max_features = max_features_from_json(v);
    } else if (key == "splitter") {
        if (v.get<std::string>() != "best") throw UsageError("only splitter 'best' is supported");
    } else {
        throw UsageError("unknown hyperparameter '" + key + "'");
    }
}

}  // namespace

Json to_json(const HyperParams& params) {
    return Json{{"criterion", to_string(params.criterion)},
                {"max_depth", params.max_depth},
                {"min_samples_split", params.min_samples_split},
                {"min_samples_leaf", params.min_samples_leaf},
                {"ccp_alpha", params.ccp_alpha},
                {"max_features", max_features_to_json(params.max_features)}};
}

HyperParams hyperparams_from_json(const Json& doc) {
    if (!doc.is_object()) throw UsageError("hyperparameters must be a JSON object");
    HyperParams hp;
    try {
        for (const auto& [key, v] : doc.items()) apply_param(hp, key, v);
    } catch (const Json::exception& e) {
        throw UsageError(std::string("invalid hyperparameter value: ") + e.what());
    }
    try {
        hp.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    return hp;
}

std::vector<HyperParams> parse_grid_json(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        throw UsageError(std::string("grid is not valid JSON: ") + e.what());
    }
    std::vector<HyperParams> grid;
    if (doc.is_array()) {
        for (const auto& item : doc) grid.push_back(hyperparams_from_json(item));
    } else if (doc.is_object()) {
        std::vector<Json> points{Json::object()};
        for (const auto& [key, values] : doc.items()) {
            if (!values.is_array() || values.empty())
                throw UsageError("grid entry '" + key + "' must be a non-empty list");
            std::vector<Json> next;
            for (const auto& p : points)
                for (const auto& v : values) {
                    Json q = p;
                    q[key] = v;
                    next.push_back(std::move(q));
                }
            points = std::move(next);
        }
        for (const auto& p : points) grid.push_back(hyperparams_from_json(p));
    } else {
        throw UsageError("grid must be a JSON list or object");
    }
    if (grid.empty()) throw UsageError("grid is empty");
    return grid;
}

std::vector<HyperParams> load_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_grid_json(ss.str());
}

Json default_grid_json() {
    return Json{{"criterion", {"squared_error", "absolute_error"}},
                {"splitter", {"best"}},
                {"ccp_alpha", {0.0, 0.0001, 0.0005, 0.001}},
                {"max_depth", {3, 4}},
                {"min_samples_leaf", {10, 30, 50, 60, 100}},
                {"min_samples_split", {10, 30, 50, 60, 100}},
                {"max_features", {nullptr, "log2", "sqrt"}}};
}

std::vector<HyperParams> default_grid() { return parse_grid_json(default_grid_json().dump()); }

Json tree_to_json(const RegressionTree& tree, std::span<const NodeInterval> intervals) {
    Json nodes = Json::array();
    for (const auto& nd : tree.nodes()) {
        Json j;
        j["id"] = nd.id;
        if (nd.rule) {
            Json rule{{"feature", nd.rule->feature}, {"threshold", nd.rule->threshold}};
            if (!tree.feature_names().empty()) rule["feature_name"] = tree.feature_names()[nd.rule->feature];
            j["rule"] = std::move(rule);
        } else {
            j["rule"] = nullptr;
        }
        j["prediction"] = nd.prediction;
        j["n_samples"] = nd.n_samples;
        j["dispersion"] = nd.dispersion;
        j["impurity"] = nd.impurity;
        j["depth"] = nd.depth;
        j["children"] = nd.children ? Json::array({nd.children->first, nd.children->second}) : Json(nullptr);
        for (const auto& iv : intervals)
            if (iv.node_id == nd.id) j["interval"] = {{"alpha", iv.alpha}, {"lower", iv.lower}, {"upper", iv.upper}};
        j["sample_indices"] = nd.sample_indices;
        nodes.push_back(std::move(j));
    }
    return Json{{"root", tree.root_id()},
                {"depth", tree.depth()},
                {"n_features", tree.n_features()},
                {"feature_names", tree.feature_names()},
                {"hyperparams", to_json(tree.hyperparams())},
                {"nodes", std::move(nodes)}};
}

ExportedTree tree_from_json(const Json& doc) {
    try {
        if (doc.at("root").get<std::size_t>() != 0) throw DomainError("root must be node 0");
        std::vector<TreeNode> nodes;
        std::vector<NodeInterval> intervals;
        for (const auto& j : doc.at("nodes")) {
            TreeNode nd;
            nd.id = j.at("id").get<std::size_t>();
            if (!j.at("rule").is_null())
                nd.rule = SplitRule{j["rule"].at("feature").get<std::size_t>(), j["rule"].at("threshold").get<double>()};
            nd.prediction = j.at("prediction").get<double>();
            nd.n_samples = j.at("n_samples").get<std::size_t>();
            nd.dispersion = j.at("dispersion").get<double>();
            nd.impurity = j.value("impurity", 0.0);
            nd.depth = j.value("depth", 0);
            if (!j.at("children").is_null())
                nd.children = std::make_pair(j["children"].at(0).get<std::size_t>(), j["children"].at(1).get<std::size_t>());
            if (j.contains("sample_indices")) nd.sample_indices = j["sample_indices"].get<std::vector<std::size_t>>();
            if (j.contains("interval"))
                intervals.push_back({nd.id, j["interval"].at("lower").get<double>(), j["interval"].at("upper").get<double>(),
                                     j["interval"].at("alpha").get<double>()});
            nodes.push_back(std::move(nd));
        }
        return {RegressionTree(std::move(nodes), hyperparams_from_json(doc.at("hyperparams")),
                               doc.at("n_features").get<std::size_t>(),
                               doc.value("feature_names", std::vector<std::string>{})),
                std::move(intervals)};
    } catch (const Json::exception& e) {
        throw DomainError(std::string("malformed tree document: ") + e.what());
    }
}

std::string tree_to_dot(const RegressionTree& tree, std::span<const NodeInterval> intervals) {
    double lo = tree.root().prediction, hi = lo;
    for (const auto& nd : tree.nodes()) {
        lo = std::min(lo, nd.prediction);
        hi = std::max(hi, nd.prediction);
    }
    std::ostringstream out;
    out << "digraph Tree {\n"
        << "node [shape=box, style=\"filled, rounded\", fontname=\"helvetica\"] ;\n"
        << "edge [fontname=\"helvetica\"] ;\n";
    for (const auto& nd : tree.nodes()) {
        std::string label;
        if (nd.rule) {
            const auto& names = tree.feature_names();
            const std::string name =
                names.empty() ? "x[" + std::to_string(nd.rule->feature) + "]" : names[nd.rule->feature];
            label += name + " <= " + fmt(nd.rule->threshold) + "\\n";
        }
        label += "node #" + std::to_string(nd.id) + "\\n";
        label += "n = " + std::to_string(nd.n_samples) + "\\n";
        label += "y_hat = " + fmt(nd.prediction) + "\\n";
        label += "sd = " + fmt(nd.dispersion);
        for (const auto& iv : intervals)
            if (iv.node_id == nd.id)
                label += "\\nC(" + fmt(iv.alpha, "%.2f") + ") = [" + fmt(iv.lower) + ", " + fmt(iv.upper) + "]";
        // Darker fill for higher predictions.
        const double t = hi > lo ? (nd.prediction - lo) / (hi - lo) : 0.5;
        const int shade = 255 - static_cast<int>(t * 160.0);
        char color[16];
        std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
        out << nd.id << " [label=\"" << label << "\", fillcolor=\"" << color << "\"] ;\n";
    }
    for (const auto& nd : tree.nodes()) {
        if (!nd.children) continue;
        out << nd.id << " -> " << nd.children->first << " [label=\"True\"] ;\n";
        out << nd.id << " -> " << nd.children->second << " [label=\"False\"] ;\n";
    }
    out << "}\n";
    return out.str();
}

Json region_to_json(const Region& region) {
    Json out = Json::object();
    for (std::size_t d = 0; d < region.bounds().size(); ++d) {
        const auto& dim = region.space().dims()[d];
        if (const auto* iv = std::get_if<Interval>(&region.bounds()[d])) {
            out[dim.name] = {{"low", iv->low}, {"high", iv->high}};
        } else {
            Json cats = Json::array();
            for (auto k : std::get<CategorySet>(region.bounds()[d]).members) cats.push_back(dim.categories[k]);
            out[dim.name] = {{"categories", std::move(cats)}};
        }
    }
    return out;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json report_to_json(const BiasReport& report, const FeatureSpace& space) {
    Json nodes = Json::array();
    for (const auto& v : report.verdicts) {
        const auto& nd = report.tree.node(v.node_id);
        const auto region = region_from_path(report.tree, v.node_id, space);
        Json j{{"node_id", v.node_id},
               {"region", region_to_json(region)},
               {"region_text", describe(region)},
               {"prediction", nd.prediction},
               {"n", nd.n_samples},
               {"dispersion", nd.dispersion},
               {"optimized_alpha", optional_number(v.optimized_alpha)},
               {"confidence_level", optional_number(v.confidence_level)},
               {"detected", v.detected}};
        if (v.node_id < report.intervals.size()) {
            const auto& iv = report.intervals[v.node_id];
            j["interval"] = {{"alpha", iv.alpha}, {"lower", iv.lower}, {"upper", iv.upper}};
        }
        nodes.push_back(std::move(j));
    }
    Json epochs = Json::array();
    for (const auto& e : report.epoch_summaries)
        epochs.push_back({{"hyperparams", to_json(e.params)}, {"votes", e.votes}, {"detected", e.detected}});
    return Json{{"alpha_star", report.alpha_star},
                {"epochs", report.epochs},
                {"bag_size", report.bag_size},
                {"orientation", to_string(report.orientation)},
                {"global_detected", report.global_detected},
                {"epoch_results", std::move(epochs)},
                {"nodes", std::move(nodes)}};
}

std::string report_summary(const BiasReport& report, const FeatureSpace& space) {
    std::ostringstream out;
    out << (report.global_detected ? "Bias Detected" : "No Bias Detected") << " (alpha* = " << fmt(report.alpha_star)
        << ", epochs = " << report.epochs << ", bag = " << report.bag_size << ")\n";
    const auto flagged = report.flagged_nodes();
    for (auto id : flagged) {
        const auto& nd = report.tree.node(id);
        const auto& v = *std::find_if(report.verdicts.begin(), report.verdicts.end(),
                                      [&](const BiasVerdict& b) { return b.node_id == id; });
        out << "  node " << id << ": n = " << nd.n_samples << ", y_hat = " << fmt(nd.prediction)
            << ", optimized alpha = " << fmt(*v.optimized_alpha, "%.2f") << " (confidence "
            << fmt(*v.confidence_level, "%.2f") << ")\n"
            << "    " << describe(region_from_path(report.tree, id, space)) << "\n";
    }
    if (flagged.empty() && report.global_detected)
        out << "  (majority of bagged estimators flagged bias; the reported tree has no flagged leaf)\n";
    return out.str();
}

}  // namespace biasaudit
