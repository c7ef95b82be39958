#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasaudit/cart.hpp"
#include "biasaudit/conformal.hpp"
#include "biasaudit/data.hpp"
#include "biasaudit/regions.hpp"
#include "biasaudit/rng.hpp"
#include "biasaudit/serialize.hpp"

namespace biasaudit {

// Synthetic features are uniform over [kAmbientLow, kAmbientHigh]^p.
inline constexpr double kAmbientLow = -10.0;
inline constexpr double kAmbientHigh = 10.0;

// Features U(-10, 10), scores U(0, 1).
AuditDataset gen_no_bias(std::size_t n, std::size_t p, Rng& rng);

struct PlantedDataset {
    AuditDataset dataset;
    Region true_region;
};

// Features U(-10, 10); scores U(0.3, 0.6) inside the box
// [center - half_width, center + half_width] and U(0.8, 1.0) elsewhere.
PlantedDataset gen_planted_region(std::size_t n, std::size_t p, std::span<const double> center, double half_width,
                                  Rng& rng);

// Re-draws scores for fixed features against a new planted box.
PlantedDataset plant_region(const Matrix& features, std::span<const double> center, double half_width, Rng& rng);

// Half-width of a box covering 10% of the ambient volume in p dimensions.
double default_half_width(std::size_t p);

// Uniform center keeping the whole box inside the ambient space.
std::vector<double> draw_center(std::size_t p, double half_width, Rng& rng);

enum class ExperimentKind { no_bias_fdr, fixed_region_varying_points, fixed_points_varying_region };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::no_bias_fdr;
    std::vector<std::size_t> sample_sizes;
    std::vector<std::size_t> dims;
    std::size_t replications = 100;
    double alpha_star = 0.20;
    std::size_t bag_size = 5;
    std::size_t epochs = 1;
    std::optional<double> half_width;  // default_half_width(p) when unset
    std::uint64_t seed = 0;
    std::vector<HyperParams> grid;     // default_grid() when empty
    unsigned threads = 0;              // 0 = hardware concurrency

    void validate() const;
};

struct CellResult {
    std::size_t p = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 sd / sqrt(reps)
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t replications = 0;
    std::vector<double> values;  // per-replication metric, replication order
};

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::no_bias_fdr;
    std::vector<CellResult> cells;  // p-major, then n in config order
};

// Mean with a normal-approximation 95% interval clipped to [0, 1].
CellResult summarize_cell(std::size_t p, std::size_t n, std::vector<double> values);

ExperimentResult run_fdr_experiment(const ExperimentConfig& config);

// Maps one replication's dataset to the estimated bias region(s).
using RegionEstimator = std::function<std::vector<Region>(const AuditDataset& dataset, const Region& true_region,
                                                          std::uint64_t seed)>;

ExperimentResult run_cvr_experiment(const ExperimentConfig& config);
ExperimentResult run_cvr_experiment(const ExperimentConfig& config, const RegionEstimator& estimator);

// Regions of the report tree's flagged leaves, or of the lowest-prediction
// leaf when nothing is flagged.
std::vector<Region> estimated_regions(const BiasReport& report, const FeatureSpace& space);

// Runs `body(i)` for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

// Cell per row: p,n,mean,ci_low,ci_high,reps.
std::string results_csv(const ExperimentResult& result);
Json experiment_manifest(const ExperimentConfig& config);
ExperimentConfig config_from_manifest(const Json& manifest);
// Per-p series of (n, mean, ci_low, ci_high) for plotting.
Json plot_data(const ExperimentResult& result);

}  // namespace biasaudit
