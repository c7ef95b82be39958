#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "biasaudit/conformal.hpp"
#include "biasaudit/data.hpp"
#include "biasaudit/error.hpp"
#include "biasaudit/regions.hpp"
#include "biasaudit/serialize.hpp"
#include "biasaudit/synthgen.hpp"

namespace biasaudit::cli {

namespace fs = std::filesystem;

namespace {

// Files are staged as hidden temporaries and renamed into place together on
// commit(); anything uncommitted is removed.
class StagedOutput {
public:
    explicit StagedOutput(fs::path dir) : dir_(std::move(dir)) {}
    StagedOutput(const StagedOutput&) = delete;
    StagedOutput& operator=(const StagedOutput&) = delete;

    ~StagedOutput() {
        std::error_code ec;
        for (const auto& [tmp, _] : staged_) fs::remove(tmp, ec);
    }

    void add(const std::string& name, const std::string& content) {
        fs::create_directories(dir_);
        const auto tmp = dir_ / ("." + name + ".tmp");
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write '" + tmp.string() + "'");
        f << content;
        f.close();
        if (!f) throw IoError("failed writing '" + tmp.string() + "'");
        staged_.emplace_back(tmp, dir_ / name);
    }

    void commit() {
        for (const auto& [tmp, final_path] : staged_) fs::rename(tmp, final_path);
        staged_.clear();
    }

private:
    fs::path dir_;
    std::vector<std::pair<fs::path, fs::path>> staged_;
};

std::string default_out_dir() {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return "biasaudit-out";
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct DetectArgs {
    std::string data;
    std::string schema;
    double alpha = 0.20;
    std::size_t epochs = 1;
    std::size_t bag = 1;
    std::size_t folds = 5;
    std::string grid;
    std::uint64_t seed = 0;
    std::string out;
};

Json detect_manifest(const DetectArgs& a, const std::vector<HyperParams>& grid) {
    Json g;
    if (a.grid.empty()) {
        g = "default";
    } else {
        g = Json::array();
        for (const auto& hp : grid) g.push_back(to_json(hp));
    }
    return Json{{"command", "detect"}, {"data", a.data},   {"schema", a.schema}, {"alpha_star", a.alpha},
                {"epochs", a.epochs},  {"bag_size", a.bag}, {"folds", a.folds},   {"seed", a.seed},
                {"grid", std::move(g)}};
}

int run_detect(const DetectArgs& a, const std::optional<std::vector<HyperParams>>& grid_override, std::ostream& out) {
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    if (a.epochs < 1) throw UsageError("--epochs must be >= 1");
    if (a.bag < 1) throw UsageError("--bag must be >= 1");
    if (a.folds < 2) throw UsageError("--folds must be >= 2");

    const auto sidecar = load_schema_file(a.schema);
    const auto dataset = load_csv(a.data, sidecar.schema, sidecar.score_column, sidecar.orientation);
    const auto grid = grid_override ? *grid_override : (a.grid.empty() ? default_grid() : load_grid_file(a.grid));

    DetectionOptions opts;
    opts.alpha_star = a.alpha;
    opts.epochs = a.epochs;
    opts.bag_size = a.bag;
    opts.folds = a.folds;
    opts.seed = a.seed;
    const auto report = run_bias_detection(dataset, grid, opts);
    const auto space = FeatureSpace::from_dataset(dataset);
    const auto summary = report_summary(report, space);

    StagedOutput staged(a.out);
    staged.add("report.json", report_to_json(report, space).dump(2) + "\n");
    staged.add("tree.json", tree_to_json(report.tree, report.intervals).dump(2) + "\n");
    staged.add("tree.dot", tree_to_dot(report.tree, report.intervals));
    staged.add("summary.txt", summary);
    DetectArgs recorded = a;
    recorded.out.clear();
    staged.add("manifest.json", detect_manifest(recorded, grid).dump(2) + "\n");
    staged.commit();

    out << summary;
    return 0;
}

struct SimulateArgs {
    std::string experiment;  // fdr | cvr
    std::string kind = "fixed-region";
    std::vector<std::size_t> dims;
    std::vector<std::size_t> sizes;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> bag;
    std::size_t epochs = 1;
    double alpha = 0.20;
    std::optional<double> half_width;
    std::uint64_t seed = 0;
    std::string grid;
    unsigned threads = 0;
    bool full = false;
    std::string out;
};

ExperimentConfig simulate_config(const SimulateArgs& a) {
    ExperimentConfig c;
    const bool fdr = a.experiment == "fdr";
    c.kind = fdr ? ExperimentKind::no_bias_fdr : parse_experiment_kind(a.kind);
    if (!fdr && c.kind == ExperimentKind::no_bias_fdr) throw UsageError("--kind must be fixed-region or fixed-points");
    if (fdr) {
        c.dims = a.dims.empty() ? std::vector<std::size_t>{2, 3, 4, 5} : a.dims;
        c.sample_sizes = a.sizes.empty() ? std::vector<std::size_t>{500, 750, 1000, 2000, 3000, 6000, 8000} : a.sizes;
        c.replications = a.reps.value_or(a.full ? 500 : 100);
        c.bag_size = a.bag.value_or(5);
    } else {
        c.dims = a.dims.empty() ? std::vector<std::size_t>{2, 3, 4} : a.dims;
        c.sample_sizes = a.sizes.empty() ? std::vector<std::size_t>{150, 200, 300, 400, 500, 750, 1000, 2000} : a.sizes;
        c.replications = a.reps.value_or(a.full ? 100 : 30);
        c.bag_size = a.bag.value_or(1);
    }
    c.epochs = a.epochs;
    c.alpha_star = a.alpha;
    c.half_width = a.half_width;
    c.seed = a.seed;
    c.threads = a.threads;
    if (!a.grid.empty()) c.grid = load_grid_file(a.grid);
    c.validate();
    return c;
}

int run_simulate(const ExperimentConfig& config, const std::string& out_dir, std::ostream& out) {
    const auto result = config.kind == ExperimentKind::no_bias_fdr ? run_fdr_experiment(config)
                                                                   : run_cvr_experiment(config);
    const auto csv = results_csv(result);
    StagedOutput staged(out_dir);
    staged.add("results.csv", csv);
    staged.add("manifest.json", experiment_manifest(config).dump(2) + "\n");
    staged.add("plot_data.json", plot_data(result).dump(2) + "\n");
    staged.commit();
    out << csv;
    return 0;
}

int run_export(const std::string& tree_path, const std::string& format, const std::string& out_path,
               std::ostream& out) {
    if (format != "json" && format != "dot") throw UsageError("--format must be json or dot");
    const auto doc = [&] {
        try {
            return Json::parse(read_file(tree_path));
        } catch (const Json::exception& e) {
            throw DomainError(std::string("tree file is not valid JSON: ") + e.what());
        }
    }();
    const auto exported = tree_from_json(doc);
    const std::string text = format == "dot" ? tree_to_dot(exported.tree, exported.intervals)
                                             : tree_to_json(exported.tree, exported.intervals).dump(2) + "\n";
    if (out_path.empty()) {
        out << text;
    } else {
        const fs::path p(out_path);
        StagedOutput staged(p.has_parent_path() ? p.parent_path() : fs::path("."));
        staged.add(p.filename().string(), text);
        staged.commit();
    }
    return 0;
}

struct GenerateArgs {
    std::string kind = "no-bias";
    std::size_t n = 2000;
    std::size_t p = 2;
    std::optional<double> half_width;
    std::uint64_t seed = 0;
    std::string out;
};

std::string dataset_csv(const AuditDataset& data) {
    std::ostringstream csv;
    for (const auto& name : data.column_names()) csv << name << ',';
    csv << "score\n";
    char buf[40];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features().row(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            csv << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", data.scores()[i]);
        csv << buf << '\n';
    }
    return csv.str();
}

int run_generate(const GenerateArgs& a, std::ostream& out) {
    if (a.n < 1 || a.p < 1) throw UsageError("--n and --p must be >= 1");
    Rng rng(a.seed);
    StagedOutput staged(a.out);
    Json truth = nullptr;
    std::optional<AuditDataset> data;
    if (a.kind == "no-bias") {
        data = gen_no_bias(a.n, a.p, rng);
    } else {
        const double h = a.half_width.value_or(default_half_width(a.p));
        const auto center = draw_center(a.p, h, rng);
        auto planted = gen_planted_region(a.n, a.p, center, h, rng);
        truth = region_to_json(planted.true_region);
        data = std::move(planted.dataset);
    }
    Json cols = Json::array();
    for (const auto& name : data->column_names()) cols.push_back({{"name", name}, {"kind", "continuous"}});
    staged.add("data.csv", dataset_csv(*data));
    staged.add("schema.json",
               Json{{"columns", cols}, {"score_column", "score"}, {"orientation", "performance"}}.dump(2) + "\n");
    if (!truth.is_null()) staged.add("truth.json", truth.dump(2) + "\n");
    staged.commit();
    out << "wrote " << data->size() << " rows to " << a.out << "\n";
    return 0;
}

int run_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out) {
    Json m;
    try {
        m = Json::parse(read_file(manifest_path));
    } catch (const Json::exception& e) {
        throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
    }
    const auto command = m.value("command", std::string());
    if (command == "simulate") return run_simulate(config_from_manifest(m), out_dir, out);
    if (command != "detect") throw UsageError("manifest has unknown command '" + command + "'");
    try {
        DetectArgs a;
        a.data = m.at("data").get<std::string>();
        a.schema = m.at("schema").get<std::string>();
        a.alpha = m.at("alpha_star").get<double>();
        a.epochs = m.at("epochs").get<std::size_t>();
        a.bag = m.at("bag_size").get<std::size_t>();
        a.folds = m.at("folds").get<std::size_t>();
        a.seed = m.at("seed").get<std::uint64_t>();
        a.out = out_dir;
        std::optional<std::vector<HyperParams>> grid;
        if (m.at("grid").is_array()) {
            grid = parse_grid_json(m["grid"].dump());
            a.grid = "(manifest)";
        }
        return run_detect(a, grid, out);
    } catch (const Json::exception& e) {
        throw UsageError(std::string("malformed detect manifest: ") + e.what());
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Audit a model's per-sample performance scores for bias regions"};
    app.require_subcommand(1);

    DetectArgs detect;
    detect.out = default_out_dir();
    auto* det = app.add_subcommand("detect", "Run bias detection on a scored CSV file");
    det->add_option("--data", detect.data, "CSV with features and a score column")->required();
    det->add_option("--schema", detect.schema, "JSON schema sidecar")->required();
    det->add_option("--alpha", detect.alpha, "Detection threshold alpha*")->capture_default_str();
    det->add_option("--epochs", detect.epochs, "Number of epochs K")->capture_default_str();
    det->add_option("--bag", detect.bag, "Bootstrap estimators per epoch (1 disables voting)")->capture_default_str();
    det->add_option("--folds", detect.folds, "Cross-validation folds")->capture_default_str();
    det->add_option("--grid", detect.grid, "JSON hyperparameter grid (default: built-in audit grid)");
    det->add_option("--seed", detect.seed, "Random seed")->capture_default_str();
    det->add_option("--out", detect.out, std::string("Output directory (default: $") + kOutputDirEnv + ")");

    SimulateArgs sim;
    sim.out = default_out_dir();
    auto* simc = app.add_subcommand("simulate", "Run a synthetic experiment");
    simc->add_option("experiment", sim.experiment, "fdr or cvr")->required()->check(CLI::IsMember({"fdr", "cvr"}));
    simc->add_option("--kind", sim.kind, "cvr design: fixed-region or fixed-points")
        ->check(CLI::IsMember({"fixed-region", "fixed-points"}));
    simc->add_option("--p", sim.dims, "Feature dimensions");
    simc->add_option("--n", sim.sizes, "Sample sizes");
    simc->add_option("--reps", sim.reps, "Replications per cell");
    simc->add_option("--bag", sim.bag, "Bootstrap estimators (fdr default 5, cvr default 1)");
    simc->add_option("--epochs", sim.epochs, "Epochs per detection run")->capture_default_str();
    simc->add_option("--alpha", sim.alpha, "Detection threshold alpha*")->capture_default_str();
    simc->add_option("--half-width", sim.half_width, "Planted box half-width (default: 10% volume)");
    simc->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simc->add_option("--grid", sim.grid, "JSON hyperparameter grid");
    simc->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
    simc->add_flag("--full", sim.full, "Use full-scale replication counts");
    simc->add_option("--out", sim.out, "Output directory");

    std::string tree_path, format = "json", export_out;
    auto* exp = app.add_subcommand("export", "Render a tree.json as JSON or Graphviz DOT");
    exp->add_option("--tree", tree_path, "tree.json written by detect")->required();
    exp->add_option("--format", format, "json or dot")->capture_default_str();
    exp->add_option("--out", export_out, "Output file (default: stdout)");

    GenerateArgs gen;
    gen.out = default_out_dir();
    auto* genc = app.add_subcommand("generate", "Write a synthetic scored dataset (data.csv + schema.json)");
    genc->add_option("--kind", gen.kind, "no-bias or planted")->check(CLI::IsMember({"no-bias", "planted"}))
        ->capture_default_str();
    genc->add_option("--n", gen.n, "Rows")->capture_default_str();
    genc->add_option("--p", gen.p, "Feature dimensions")->capture_default_str();
    genc->add_option("--half-width", gen.half_width, "Planted box half-width (default: 10% volume)");
    genc->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    genc->add_option("--out", gen.out, "Output directory");

    std::string manifest_path, rerun_out = default_out_dir();
    auto* rer = app.add_subcommand("rerun", "Repeat a detect or simulate run from its manifest.json");
    rer->add_option("--manifest", manifest_path, "manifest.json")->required();
    rer->add_option("--out", rerun_out, "Output directory");

    std::vector<std::string> argv_store{"biasaudit"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*det) return run_detect(detect, std::nullopt, out);
        if (*simc) return run_simulate(simulate_config(sim), sim.out, out);
        if (*exp) return run_export(tree_path, format, export_out, out);
        if (*genc) return run_generate(gen, out);
        if (*rer) return run_rerun(manifest_path, rerun_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace biasaudit::cli
