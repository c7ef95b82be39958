#include "biasaudit/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "biasaudit/error.hpp"

namespace biasaudit {

namespace {

// Seed streams under a cell seed.
constexpr std::uint64_t kCenterStream = 0xC0FFEE;
constexpr std::uint64_t kPointsStream = 0xB0B;
constexpr std::uint64_t kDetectStream = 0xDE7EC7;

Matrix uniform_features(std::size_t n, std::size_t p, Rng& rng) {
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.uniform(kAmbientLow, kAmbientHigh);
    return x;
}

bool inside_box(std::span<const double> x, std::span<const double> center, double half_width) {
    for (std::size_t j = 0; j < x.size(); ++j)
        if (std::abs(x[j] - center[j]) > half_width) return false;
    return true;
}

}  // namespace

AuditDataset gen_no_bias(std::size_t n, std::size_t p, Rng& rng) {
    if (n < 1 || p < 1) throw DomainError("need n >= 1 and p >= 1");
    auto x = uniform_features(n, p, rng);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform();
    return AuditDataset::continuous(std::move(x), std::move(y), Orientation::performance);
}

PlantedDataset plant_region(const Matrix& features, std::span<const double> center, double half_width, Rng& rng) {
    const std::size_t p = features.cols();
    if (center.size() != p) throw ShapeError("center dimension does not match features");
    if (!(half_width > 0.0)) throw DomainError("half_width must be positive");
    for (double c : center)
        if (c < kAmbientLow || c > kAmbientHigh) throw DomainError("center outside the ambient space");

    std::vector<double> y(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i)
        y[i] = inside_box(features.row(i), center, half_width) ? rng.uniform(0.3, 0.6) : rng.uniform(0.8, 1.0);

    const auto space = FeatureSpace::box(p, kAmbientLow, kAmbientHigh);
    std::vector<double> lows(p), highs(p);
    for (std::size_t j = 0; j < p; ++j) {
        lows[j] = std::max(kAmbientLow, center[j] - half_width);
        highs[j] = std::min(kAmbientHigh, center[j] + half_width);
    }
    return {AuditDataset::continuous(features, std::move(y), Orientation::performance), Region::box(space, lows, highs)};
}

PlantedDataset gen_planted_region(std::size_t n, std::size_t p, std::span<const double> center, double half_width,
                                  Rng& rng) {
    if (n < 1 || p < 1) throw DomainError("need n >= 1 and p >= 1");
    const auto x = uniform_features(n, p, rng);
    return plant_region(x, center, half_width, rng);
}

double default_half_width(std::size_t p) {
    // (2h)^p = 0.1 * 20^p
    return 0.5 * (kAmbientHigh - kAmbientLow) * std::pow(0.1, 1.0 / static_cast<double>(p));
}

std::vector<double> draw_center(std::size_t p, double half_width, Rng& rng) {
    const double lo = kAmbientLow + half_width;
    const double hi = kAmbientHigh - half_width;
    if (lo > hi) throw DomainError("half_width exceeds the ambient half-range");
    std::vector<double> c(p);
    for (auto& v : c) v = rng.uniform(lo, hi);
    return c;
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::no_bias_fdr: return "no_bias_fdr";
        case ExperimentKind::fixed_region_varying_points: return "fixed_region_varying_points";
        case ExperimentKind::fixed_points_varying_region: return "fixed_points_varying_region";
    }
    return "no_bias_fdr";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    if (text == "no_bias_fdr" || text == "fdr") return ExperimentKind::no_bias_fdr;
    if (text == "fixed_region_varying_points" || text == "fixed-region") return ExperimentKind::fixed_region_varying_points;
    if (text == "fixed_points_varying_region" || text == "fixed-points") return ExperimentKind::fixed_points_varying_region;
    throw UsageError("unknown experiment kind '" + text + "'");
}

void ExperimentConfig::validate() const {
    if (replications < 1) throw UsageError("replications must be >= 1");
    if (sample_sizes.empty() || dims.empty()) throw UsageError("sample sizes and dimensions must be non-empty");
    for (auto n : sample_sizes)
        if (n < 10) throw UsageError("sample sizes must be >= 10");
    for (auto p : dims)
        if (p < 2 || p > 5) throw UsageError("dimensions must lie in {2, 3, 4, 5}");
    if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw UsageError("alpha_star must lie in (0, 1)");
    if (bag_size < 1 || epochs < 1) throw UsageError("bag size and epochs must be >= 1");
    if (half_width && !(*half_width > 0.0 && *half_width <= 0.5 * (kAmbientHigh - kAmbientLow)))
        throw UsageError("half_width must lie in (0, 10]");
}

CellResult summarize_cell(std::size_t p, std::size_t n, std::vector<double> values) {
    CellResult c;
    c.p = p;
    c.n = n;
    c.replications = values.size();
    if (values.empty()) return c;
    const double k = static_cast<double>(values.size());
    c.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - c.mean) * (v - c.mean);
        c.half_width = 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    }
    c.ci_low = std::max(0.0, c.mean - c.half_width);
    c.ci_high = std::min(1.0, c.mean + c.half_width);
    c.values = std::move(values);
    return c;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (unsigned t = 0; t < threads; ++t)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
    }
    if (failure) std::rethrow_exception(failure);
}

namespace {

std::vector<HyperParams> effective_grid(const ExperimentConfig& config) {
    return config.grid.empty() ? default_grid() : config.grid;
}

DetectionOptions detection_options(const ExperimentConfig& config, std::uint64_t seed) {
    DetectionOptions o;
    o.alpha_star = config.alpha_star;
    o.epochs = config.epochs;
    o.bag_size = config.bag_size;
    o.seed = seed;
    return o;
}

template <typename Fn>
ExperimentResult run_cells(const ExperimentConfig& config, Fn&& replicate) {
    ExperimentResult result;
    result.kind = config.kind;
    std::size_t cell = 0;
    for (auto p : config.dims) {
        for (auto n : config.sample_sizes) {
            const std::uint64_t cell_seed = derive_seed(config.seed, cell++);
            std::vector<double> values(config.replications);
            auto setup = replicate(p, n, cell_seed);
            parallel_for(config.replications, config.threads,
                         [&](std::size_t rep) { values[rep] = setup(rep, derive_seed(cell_seed, rep)); });
            result.cells.push_back(summarize_cell(p, n, std::move(values)));
        }
    }
    return result;
}

}  // namespace

ExperimentResult run_fdr_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.kind != ExperimentKind::no_bias_fdr) throw UsageError("run_fdr_experiment needs kind no_bias_fdr");
    const auto grid = effective_grid(config);
    return run_cells(config, [&](std::size_t p, std::size_t n, std::uint64_t) {
        return [&, p, n](std::size_t, std::uint64_t rep_seed) {
            Rng rng(rep_seed);
            const auto data = gen_no_bias(n, p, rng);
            const auto report = run_bias_detection(data, grid, detection_options(config, derive_seed(rep_seed, kDetectStream)));
            return report.global_detected ? 1.0 : 0.0;
        };
    });
}

std::vector<Region> estimated_regions(const BiasReport& report, const FeatureSpace& space) {
    std::vector<Region> out;
    for (auto id : report.flagged_nodes()) out.push_back(region_from_path(report.tree, id, space));
    if (out.empty()) {
        const auto leaves = report.tree.leaf_ids();
        const bool low_is_bad = report.orientation == Orientation::performance;
        std::size_t pick = leaves.front();
        for (auto id : leaves) {
            const double v = report.tree.node(id).prediction;
            const double best = report.tree.node(pick).prediction;
            if (low_is_bad ? v < best : v > best) pick = id;
        }
        out.push_back(region_from_path(report.tree, pick, space));
    }
    return out;
}

ExperimentResult run_cvr_experiment(const ExperimentConfig& config) {
    const auto grid = effective_grid(config);
    return run_cvr_experiment(config, [&](const AuditDataset& data, const Region& truth, std::uint64_t seed) {
        const auto report = run_bias_detection(data, grid, detection_options(config, seed));
        return estimated_regions(report, truth.space());
    });
}

ExperimentResult run_cvr_experiment(const ExperimentConfig& config, const RegionEstimator& estimator) {
    config.validate();
    if (config.kind == ExperimentKind::no_bias_fdr) throw UsageError("run_cvr_experiment needs a planted-region kind");
    const bool fixed_region = config.kind == ExperimentKind::fixed_region_varying_points;

    return run_cells(config, [&](std::size_t p, std::size_t n, std::uint64_t cell_seed) {
        const double h = config.half_width.value_or(default_half_width(p));
        std::vector<double> center;
        Matrix points;
        if (fixed_region) {
            Rng rng(derive_seed(cell_seed, kCenterStream));
            center = draw_center(p, h, rng);
        } else {
            Rng rng(derive_seed(cell_seed, kPointsStream));
            points = uniform_features(n, p, rng);
        }
        return [&estimator, fixed_region, p, n, h, center = std::move(center),
                points = std::move(points)](std::size_t, std::uint64_t rep_seed) {
            Rng rng(rep_seed);
            PlantedDataset planted = [&] {
                if (fixed_region) return gen_planted_region(n, p, center, h, rng);
                const auto c = draw_center(p, h, rng);
                return plant_region(points, c, h, rng);
            }();
            const auto regions = estimator(planted.dataset, planted.true_region, derive_seed(rep_seed, kDetectStream));
            return estimated_region_union_cvr(planted.true_region, regions);
        };
    });
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string results_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "p,n,mean,ci_low,ci_high,reps\n";
    for (const auto& c : result.cells)
        out << c.p << ',' << c.n << ',' << num(c.mean) << ',' << num(c.ci_low) << ',' << num(c.ci_high) << ','
            << c.replications << '\n';
    return out.str();
}

Json experiment_manifest(const ExperimentConfig& config) {
    Json grid;
    if (config.grid.empty()) {
        grid = "default";
    } else {
        grid = Json::array();
        for (const auto& hp : config.grid) grid.push_back(to_json(hp));
    }
    return Json{{"command", "simulate"},
                {"kind", to_string(config.kind)},
                {"sample_sizes", config.sample_sizes},
                {"dims", config.dims},
                {"replications", config.replications},
                {"alpha_star", config.alpha_star},
                {"bag_size", config.bag_size},
                {"epochs", config.epochs},
                {"half_width", config.half_width ? Json(*config.half_width) : Json(nullptr)},
                {"seed", config.seed},
                {"grid", std::move(grid)}};
}

ExperimentConfig config_from_manifest(const Json& m) {
    try {
        ExperimentConfig c;
        c.kind = parse_experiment_kind(m.at("kind").get<std::string>());
        c.sample_sizes = m.at("sample_sizes").get<std::vector<std::size_t>>();
        c.dims = m.at("dims").get<std::vector<std::size_t>>();
        c.replications = m.at("replications").get<std::size_t>();
        c.alpha_star = m.at("alpha_star").get<double>();
        c.bag_size = m.at("bag_size").get<std::size_t>();
        c.epochs = m.at("epochs").get<std::size_t>();
        if (!m.at("half_width").is_null()) c.half_width = m["half_width"].get<double>();
        c.seed = m.at("seed").get<std::uint64_t>();
        if (m.at("grid").is_array()) c.grid = parse_grid_json(m["grid"].dump());
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw UsageError(std::string("malformed simulate manifest: ") + e.what());
    }
}

Json plot_data(const ExperimentResult& result) {
    Json series = Json::array();
    for (const auto& c : result.cells) {
        auto it = std::find_if(series.begin(), series.end(), [&](const Json& s) { return s["p"] == c.p; });
        if (it == series.end()) {
            series.push_back({{"p", c.p}, {"points", Json::array()}});
            it = series.end() - 1;
        }
        (*it)["points"].push_back({{"n", c.n}, {"mean", c.mean}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}});
    }
    return Json{{"kind", to_string(result.kind)},
                {"metric", result.kind == ExperimentKind::no_bias_fdr ? "fdr" : "cvr"},
                {"series", std::move(series)}};
}

}  // namespace biasaudit
