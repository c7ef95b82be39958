#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasaudit/cart.hpp"
#include "biasaudit/conformal.hpp"
#include "biasaudit/regions.hpp"

namespace biasaudit {

using Json = nlohmann::ordered_json;

Json to_json(const HyperParams& params);
HyperParams hyperparams_from_json(const Json& doc);

// Accepts either a list of parameter objects or an object mapping each
// parameter to a list of values (expanded as a cartesian product, first key
// outermost). Missing parameters take HyperParams defaults.
std::vector<HyperParams> parse_grid_json(const std::string& text);
std::vector<HyperParams> load_grid_file(const std::filesystem::path& path);

// criterion x ccp_alpha x max_depth x min_samples_leaf x min_samples_split x
// max_features, with the values used for the clinical audit (1200 points).
std::vector<HyperParams> default_grid();
Json default_grid_json();

// Node list with rules, predictions, counts and dispersion. Intervals, when
// given, are attached to the node with the matching id.
Json tree_to_json(const RegressionTree& tree, std::span<const NodeInterval> intervals = {});

struct ExportedTree {
    RegressionTree tree;
    std::vector<NodeInterval> intervals;
};

ExportedTree tree_from_json(const Json& doc);

// Graphviz rendering; node labels show the rule, n, prediction, standard
// deviation and (when available) the conformal interval.
std::string tree_to_dot(const RegressionTree& tree, std::span<const NodeInterval> intervals = {});

// {dimension: {low, high} | {categories: [...]}} using original column names.
Json region_to_json(const Region& region);

Json report_to_json(const BiasReport& report, const FeatureSpace& space);

// "Bias Detected" / "No Bias Detected" headline followed by the flagged
// nodes and the conjunction of conditions that defines each of them.
std::string report_summary(const BiasReport& report, const FeatureSpace& space);

}  // namespace biasaudit
