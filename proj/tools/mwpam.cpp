// mwpam: medoid co-clustering of dense tensors.
//
//   mwpam fit    --input scores.tensor --clusters 5,5,5 [--method pam|tbm] ...
//   mwpam synth  --dims 50,50,50 --clusters 5,5,5 --sigma 0.5 --out-prefix data/run
//   mwpam verify --input scores.tensor --clusters 5,5,5 --report report.json [--global]
//
// Exit codes: 0 ok, 2 input/parse error, 3 invalid cluster spec,
// 4 optimality violation, 5 enumeration budget exceeded.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mwpam/io.hpp"
#include "mwpam/pam.hpp"
#include "mwpam/report.hpp"
#include "mwpam/synth.hpp"
#include "mwpam/tbm.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitInvalidClusterSpec = 3;
constexpr int kExitNotLocallyOptimal = 4;
constexpr int kExitBudgetExceeded = 5;

struct FitArgs {
    std::string input;
    std::vector<std::size_t> clusters;
    std::string method = "pam";
    std::uint64_t seed = 0;
    std::vector<std::string> label_specs;
    std::string out;
    bool trace = false;
    std::size_t threads = 0;
};

struct SynthArgs {
    std::vector<std::size_t> dims;
    std::vector<std::size_t> clusters;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::string out_prefix;
    std::string means_file;
    std::string membership = "balanced";
};

struct VerifyArgs {
    std::string input;
    std::vector<std::size_t> clusters;
    std::string report;
    bool global = false;
    std::uint64_t budget = 10'000'000;
    std::size_t threads = 0;
};

/// Parses repeatable "--labels mode=<file>" specs and checks line counts
/// against the tensor dimensions.
std::vector<std::vector<std::string>> load_mode_labels(const std::vector<std::string>& specs,
                                                       const std::vector<std::size_t>& dims)
{
    std::vector<std::vector<std::string>> labels(dims.size());
    for (const std::string& spec : specs) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw mwpam::ParseError("--labels", 0, "expected mode=<file>, got '" + spec + "'");
        }
        std::size_t mode = 0;
        try {
            mode = std::stoul(spec.substr(0, eq));
        } catch (const std::exception&) {
            throw mwpam::ParseError("--labels", 0, "invalid mode in '" + spec + "'");
        }
        if (mode >= dims.size()) {
            throw mwpam::ParseError("--labels", 0,
                                    "mode " + std::to_string(mode) + " out of range for a rank-" +
                                        std::to_string(dims.size()) + " tensor");
        }
        const std::string path = spec.substr(eq + 1);
        labels[mode] = mwpam::load_label_file(path);
        if (labels[mode].size() != dims[mode]) {
            throw mwpam::ParseError(path, labels[mode].size(),
                                    "expected " + std::to_string(dims[mode]) +
                                        " labels for mode " + std::to_string(mode) + ", found " +
                                        std::to_string(labels[mode].size()));
        }
    }
    return labels;
}

void write_report(const nlohmann::json& report, const std::string& out)
{
    if (out.empty()) {
        std::cout << report.dump(2) << '\n';
        return;
    }
    std::ofstream stream(out);
    if (!stream) {
        throw mwpam::ParseError(out, 0, "cannot open file for writing");
    }
    stream << report.dump(2) << '\n';
}

int run_fit(const FitArgs& args)
{
    const mwpam::Tensor y = mwpam::load_tensor_file(args.input);
    mwpam::ClusterSpec c{args.clusters};
    c.validate_for(y.dims());
    const auto labels = load_mode_labels(args.label_specs, y.dims());

    const auto start = std::chrono::steady_clock::now();
    mwpam::Clustering cl;
    if (args.method == "pam") {
        cl = mwpam::fit(y, c, mwpam::PamOptions{args.threads});
    } else if (args.method == "tbm") {
        mwpam::TbmConfig cfg;
        cfg.seed = args.seed;
        cl = mwpam::tbm_fit(y, c, cfg);
    } else {
        throw mwpam::ParseError("--method", 0, "unknown method '" + args.method + "'");
    }
    const auto stop = std::chrono::steady_clock::now();
    const double wall_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(stop - start).count();

    const mwpam::EvalReport eval = mwpam::evaluate(y, cl);
    const nlohmann::json report = mwpam::make_run_report(args.method, y, c, cl, eval, labels,
                                                         args.seed, wall_ms, args.trace);
    write_report(report, args.out);
    return kExitOk;
}

int run_synth(const SynthArgs& args)
{
    mwpam::SyntheticSpec spec;
    spec.dims = args.dims;
    spec.clusters.counts = args.clusters;
    spec.clusters.validate_for(spec.dims);
    spec.noise_sigma = args.sigma;
    spec.seed = args.seed;
    if (args.membership == "balanced") {
        spec.membership_mode = mwpam::SyntheticSpec::MembershipMode::balanced;
    } else if (args.membership == "random") {
        spec.membership_mode = mwpam::SyntheticSpec::MembershipMode::random;
    } else {
        throw mwpam::ParseError("--membership", 0,
                                "expected 'balanced' or 'random', got '" + args.membership + "'");
    }
    if (args.means_file.empty()) {
        // Auto-spaced means: one gap per cluster step along every mode, wide
        // enough to keep planted blocks separated at the requested noise.
        const double gap = args.sigma > 0.0 ? 4.0 * args.sigma : 1.0;
        spec.block_means = mwpam::spaced_block_means(spec.clusters, gap);
    } else {
        spec.block_means = mwpam::load_tensor_file(args.means_file);
    }

    const mwpam::PlantedTensor planted = mwpam::generate(spec);

    const std::string tensor_path = args.out_prefix + ".tensor";
    mwpam::save_tensor_file(tensor_path, planted.tensor);
    std::cout << tensor_path << '\n';

    const std::string means_path = args.out_prefix + ".means";
    mwpam::save_tensor_file(means_path, spec.block_means);
    std::cout << means_path << '\n';

    for (std::size_t k = 0; k < planted.memberships.size(); ++k) {
        const std::string path = args.out_prefix + ".mode" + std::to_string(k) + ".labels";
        std::ofstream out(path);
        if (!out) {
            throw mwpam::ParseError(path, 0, "cannot open file for writing");
        }
        for (std::size_t label : planted.memberships[k]) {
            out << label << '\n';
        }
        std::cout << path << '\n';
    }
    return kExitOk;
}

int run_verify(const VerifyArgs& args)
{
    const mwpam::Tensor y = mwpam::load_tensor_file(args.input);
    mwpam::ClusterSpec c{args.clusters};
    c.validate_for(y.dims());

    mwpam::LoadedReport loaded = mwpam::load_run_report_file(args.report);
    if (loaded.dims != y.dims()) {
        throw mwpam::ParseError(args.report, 0, "report dims do not match the input tensor");
    }
    if (loaded.clusters.counts != c.counts) {
        throw mwpam::ParseError(args.report, 0, "report cluster counts do not match --clusters");
    }
    mwpam::validate_clustering(loaded.clustering, y.dims(), c);

    const mwpam::LocalOptimality check = mwpam::verify_local_optimum(y, c, loaded.clustering);
    if (check.baseline != loaded.clustering.objective) {
        std::cerr << "note: report objective " << loaded.clustering.objective
                  << " differs from recomputed " << check.baseline << "; using the recomputed value\n";
    }
    std::cout << "objective: " << check.baseline << '\n';
    if (!check.optimal) {
        const mwpam::SwapViolation& v = *check.worst;
        std::cout << "improving swap found: mode " << v.mode << ", medoid " << v.swapped_out
                  << " -> " << v.swapped_in << ", objective " << v.objective << " ("
                  << check.violations << " violating swaps)\n";
        return kExitNotLocallyOptimal;
    }
    std::cout << "local optimum: no improving single swap\n";

    if (args.global) {
        const mwpam::Clustering best = mwpam::exhaustive_global_optimum(y, c, args.budget);
        std::cout << "global objective: " << best.objective << '\n';
        std::cout << "gap to global: " << (check.baseline - best.objective) << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Medoid co-clustering of dense tensors"};
    app.require_subcommand(1);

    FitArgs fit_args;
    CLI::App* fit = app.add_subcommand("fit", "Cluster a tensor and write a JSON run report");
    fit->add_option("--input", fit_args.input, "Tensor file")->required();
    fit->add_option("--clusters", fit_args.clusters, "Clusters per mode, e.g. 5,5,5")
        ->required()
        ->delimiter(',');
    fit->add_option("--method", fit_args.method, "pam (default) or tbm");
    fit->add_option("--seed", fit_args.seed, "Seed for the tbm initialization");
    fit->add_option("--labels", fit_args.label_specs, "mode=<label file>, repeatable");
    fit->add_option("--out", fit_args.out, "Report path (default: stdout)");
    fit->add_flag("--trace", fit_args.trace, "Include the iteration trace in the report");
    fit->add_option("--threads", fit_args.threads, "Worker threads (default: all cores)");

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Generate a planted-block tensor");
    synth->add_option("--dims", synth_args.dims, "Tensor dimensions, e.g. 50,50,50")
        ->required()
        ->delimiter(',');
    synth->add_option("--clusters", synth_args.clusters, "Planted clusters per mode")
        ->required()
        ->delimiter(',');
    synth->add_option("--sigma", synth_args.sigma, "Gaussian noise scale");
    synth->add_option("--seed", synth_args.seed, "Generator seed");
    synth->add_option("--out-prefix", synth_args.out_prefix, "Output path prefix")->required();
    synth->add_option("--means", synth_args.means_file,
                      "Block-means tensor file (default: auto-spaced)");
    synth->add_option("--membership", synth_args.membership, "balanced (default) or random");

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "Check a run report for local optimality");
    verify->add_option("--input", verify_args.input, "Tensor file")->required();
    verify->add_option("--clusters", verify_args.clusters, "Clusters per mode")
        ->required()
        ->delimiter(',');
    verify->add_option("--report", verify_args.report, "Run report to verify")->required();
    verify->add_flag("--global", verify_args.global,
                     "Also compare against the exhaustive global optimum");
    verify->add_option("--budget", verify_args.budget,
                       "Medoid-combination budget for --global");
    verify->add_option("--threads", verify_args.threads, "Worker threads (unused, accepted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (fit->parsed()) return run_fit(fit_args);
        if (synth->parsed()) return run_synth(synth_args);
        if (verify->parsed()) return run_verify(verify_args);
    } catch (const mwpam::InvalidClusterSpec& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalidClusterSpec;
    } catch (const mwpam::BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBudgetExceeded;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitOk;
}
