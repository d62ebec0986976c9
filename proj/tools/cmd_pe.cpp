#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "json.hpp"
#include "mvt/encoding.hpp"
#include "mvt/serialize.hpp"

namespace mvt::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

struct PeOptions {
    std::size_t d_model = 128;
    double base = 10000.0;
    std::size_t max_len = 100;
    std::size_t k_max = 2000;
    std::size_t k_stride = 1;
    double plateau_frac = 0.01;
    std::string norm = "l2";
    bool consecutive_only = false;
    std::string out_dir;
    const CLI::App* root = nullptr;
};

void add_search_options(CLI::App& sub, PeOptions& o) {
    sub.add_option("--d-model", o.d_model, "Encoding width (even)")->capture_default_str();
    sub.add_option("--base", o.base, "Sinusoid base")->capture_default_str();
    sub.add_option("--max-len", o.max_len, "Number of positions the objective sums over")
        ->capture_default_str();
    sub.add_option("--k-max", o.k_max, "Search grid upper bound (candidates 1..k-max)")
        ->capture_default_str();
    sub.add_option("--k-stride", o.k_stride, "Search grid stride")->capture_default_str();
    sub.add_option("--plateau-frac", o.plateau_frac,
                   "Pick the smallest k within this fraction of the curve maximum")
        ->capture_default_str();
    sub.add_option("--norm", o.norm, "Distance norm: l2 or l1")
        ->check(CLI::IsMember({"l2", "l1"}))
        ->capture_default_str();
    sub.add_flag("--consecutive-only", o.consecutive_only,
                 "Sum distances of consecutive positions only");
}

std::vector<std::size_t> make_grid(const PeOptions& o) {
    if (o.k_max < 1) throw ConfigError("--k-max must be >= 1");
    if (o.k_stride < 1) throw ConfigError("--k-stride must be >= 1");
    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k <= o.k_max; k += o.k_stride) ks.push_back(k);
    return ks;
}

StepSearchResult run_search(const PeOptions& o) {
    Norm norm = o.norm == "l1" ? Norm::l1 : Norm::l2;
    return search_optimal_step(o.d_model, o.base, o.max_len, make_grid(o), o.plateau_frac, norm,
                               o.consecutive_only);
}

std::string curve_csv(const StepSearchResult& res) {
    std::ostringstream os;
    os << "k,objective\n";
    for (const auto& [k, obj] : res.curve) os << k << "," << fmt17(obj) << "\n";
    return os.str();
}

std::string encoding_csv(const EncodingTable& table) {
    std::ostringstream os;
    os << "pos";
    for (std::size_t d = 0; d < table.config.d_model; ++d) os << ",dim" << d;
    os << "\n";
    for (std::size_t pos = 0; pos < table.config.max_len; ++pos) {
        os << pos;
        for (double v : table.row(pos)) os << "," << fmt17(v);
        os << "\n";
    }
    return os.str();
}

std::string result_json(const PeOptions& o, const StepSearchResult& res) {
    ordered_json j;
    j["d_model"] = o.d_model;
    j["base"] = o.base;
    j["max_len"] = o.max_len;
    j["norm"] = o.norm;
    j["consecutive_only"] = o.consecutive_only;
    j["plateau_frac"] = o.plateau_frac;
    j["n_candidates"] = res.curve.size();
    j["k_star"] = res.best_k;
    j["objective"] = res.best_objective;
    j["max_objective"] = res.max_objective;
    return j.dump(2) + "\n";
}

void print_summary(const StepSearchResult& res) {
    std::cout << "k_star=" << res.best_k << "\n";
    std::cout << "objective=" << fmt17(res.best_objective) << "\n";
    std::cout << "max_objective=" << fmt17(res.max_objective) << "\n";
}

}  // namespace

void add_cmd_analyze_pe(CLI::App& app) {
    auto o = std::make_shared<PeOptions>();
    CLI::App* sub = app.add_subcommand(
        "analyze-pe", "Step search plus CSV dumps of the objective curve and the chosen encoding");
    add_search_options(*sub, *o);
    sub->add_option("--out-dir", o->out_dir, "Directory for curve.csv, encoding.csv, result.json")
        ->required();
    o->root = &app;
    sub->callback([o] {
        StepSearchResult res = run_search(*o);
        ensure_dir(o->out_dir);
        write_text_file(path_join(o->out_dir, "curve.csv"), curve_csv(res));
        EncodingTable table =
            build_mvpe_table({o->d_model, o->base, o->max_len, res.best_k});
        write_text_file(path_join(o->out_dir, "encoding.csv"), encoding_csv(table));
        write_text_file(path_join(o->out_dir, "result.json"), result_json(*o, res));
        dump_run_config(*o->root, path_join(o->out_dir, kRunConfigFile));
        print_summary(res);
    });
}

void add_cmd_search_step(CLI::App& app) {
    auto o = std::make_shared<PeOptions>();
    CLI::App* sub = app.add_subcommand(
        "search-step", "Print the optimal encoding step for a position-spread objective");
    add_search_options(*sub, *o);
    sub->add_option("--out-dir", o->out_dir, "Optional directory for result.json");
    o->root = &app;
    sub->callback([o] {
        StepSearchResult res = run_search(*o);
        if (!o->out_dir.empty()) {
            ensure_dir(o->out_dir);
            write_text_file(path_join(o->out_dir, "result.json"), result_json(*o, res));
            dump_run_config(*o->root, path_join(o->out_dir, kRunConfigFile));
        }
        print_summary(res);
    });
}

}  // namespace mvt::cli
