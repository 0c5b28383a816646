// Experiment runner: config ingestion, subcommand dispatch, seeded
// reproducible runs, structured result emission. All file outputs are
// deterministic for a fixed (config, seed, flags); human-readable progress
// goes to stderr only.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "spinsim/config_io.hpp"
#include "spinsim/cooling_gadget.hpp"
#include "spinsim/exact_oracle.hpp"
#include "spinsim/sampler.hpp"

namespace fs = std::filesystem;
using namespace spinsim;

namespace {

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    int workers = 1;
    std::string out_dir = ".";
    double c_prime = 3.0;
    double tau_c = 0.3;
    int64_t steps = 0;       // 0 = use choose_N
    double epsilon = 0.02;   // trotterization error target for choose_N
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

json run_metadata(const CommonOpts& opt, const json& model_json) {
    json meta;
    meta["version"] = kVersion;
    meta["seed"] = opt.seed;
    meta["model"] = model_json;
    return meta;
}

json circuit_digest(const TrotterCircuit& circuit) {
    json d;
    d["N"] = circuit.N;
    d["g"] = circuit.g;
    d["layers"] = circuit.L;
    d["slots_per_step"] = circuit.slots_per_step();
    d["slot_count"] = circuit.slot_count();
    d["horizontal_p"] = circuit.horizontal_p;
    d["noise_p"] = circuit.noise_p;
    return d;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    return j;
}

TrotterCircuit make_circuit(const ModelSpec& model, const CommonOpts& opt) {
    int64_t n = opt.steps > 0 ? opt.steps : choose_N(model, opt.epsilon, opt.tau_c);
    return build_trotter_circuit(model, n);
}

int cmd_sample(const CommonOpts& opt, int64_t n_samples) {
    json model_json = load_json_file(opt.config_path);
    ModelSpec model = load_model_spec(model_json);
    TrotterCircuit circuit = make_circuit(model, opt);
    SamplerParams params;
    params.c_prime = opt.c_prime;
    params.tau_c = opt.tau_c;
    SampleStats stats = sample_distribution(circuit, params, n_samples, opt.workers, opt.seed, true);

    fs::create_directories(opt.out_dir);
    std::string lines;
    for (size_t i = 0; i < stats.records.size(); ++i) {
        const SampleRecord& r = stats.records[i];
        json rec;
        rec["sample"] = i;
        rec["accepted"] = r.accepted;
        if (r.accepted) rec["bitstring"] = r.bitstring;
        rec["max_cluster"] = r.max_cluster;
        rec["n_noise_events"] = r.n_noise_events;
        rec["retries"] = r.retries;
        rec["seed_path"] = r.seed_path;
        lines += rec.dump();
        lines += '\n';
    }
    write_text(fs::path(opt.out_dir) / "samples.jsonl", lines);

    json summary = run_metadata(opt, model_json);
    summary["circuit"] = circuit_digest(circuit);
    summary["params"] = {{"samples", n_samples}, {"workers", opt.workers},
                         {"c_prime", opt.c_prime}, {"tau_c", opt.tau_c}};
    summary["n_accepted"] = stats.n_accepted;
    summary["n_attempts"] = stats.n_attempts;
    summary["rejection_rate"] = stats.rejection_rate;
    json hist = json::object();
    for (const auto& [size, count] : stats.cluster_hist) hist[std::to_string(size)] = count;
    summary["cluster_histogram"] = hist;
    // top-k of the empirical distribution (k = 32), deterministic order
    std::vector<std::pair<int64_t, std::string>> ranked;
    for (const auto& [bits, count] : stats.counts) ranked.emplace_back(-count, bits);
    std::sort(ranked.begin(), ranked.end());
    json top = json::array();
    for (size_t i = 0; i < ranked.size() && i < 32; ++i)
        top.push_back({{"bitstring", ranked[i].second},
                       {"p", static_cast<double>(-ranked[i].first) / stats.n_accepted}});
    summary["distribution_top"] = top;
    write_text(fs::path(opt.out_dir) / "summary.json", summary.dump(2) + "\n");
    std::cerr << "sample: " << stats.n_accepted << "/" << n_samples
              << " accepted, rejection_rate=" << stats.rejection_rate << "\n";
    return 0;
}

int cmd_oracle_compare(const CommonOpts& opt, int64_t n_samples, int64_t ref_assignments) {
    json model_json = load_json_file(opt.config_path);
    ModelSpec model = load_model_spec(model_json);
    TrotterCircuit circuit = make_circuit(model, opt);
    SamplerParams params;
    params.c_prime = opt.c_prime;
    params.tau_c = opt.tau_c;

    SampleStats stats = sample_distribution(circuit, params, n_samples, opt.workers, opt.seed);
    ConditionedOptions copt;
    copt.n_assignments = ref_assignments;
    copt.tau_c = opt.tau_c;
    copt.seed = mix64(opt.seed ^ 0x5ca1ab1eULL);
    ConditionedDistribution ref = conditioned_trotter_distribution(circuit, opt.c_prime, copt);

    const int n = model.n();
    std::vector<double> empirical(size_t(1) << n, 0.0);
    for (const auto& [bits, count] : stats.counts) {
        size_t idx = 0;
        for (char c : bits) idx = 2 * idx + (c == '1');
        empirical[idx] = static_cast<double>(count) / static_cast<double>(stats.n_accepted);
    }
    const double tv = tv_distance(empirical, ref.probs);

    fs::create_directories(opt.out_dir);
    json summary = run_metadata(opt, model_json);
    summary["circuit"] = circuit_digest(circuit);
    summary["params"] = {{"samples", n_samples}, {"workers", opt.workers},
                         {"c_prime", opt.c_prime}, {"tau_c", opt.tau_c},
                         {"reference_assignments", ref_assignments}};
    summary["tv_distance"] = tv;
    summary["rejection_rate"] = stats.rejection_rate;
    summary["reference_acceptance"] = ref.acceptance;
    summary["reference_enumerated"] = ref.enumerated;
    write_text(fs::path(opt.out_dir) / "summary.json", summary.dump(2) + "\n");
    std::cout << "tv_distance=" << fmt_double(tv) << " rejection_rate=" << fmt_double(stats.rejection_rate)
              << " N=" << circuit.N << "\n";
    return 0;
}

int cmd_percolation_scan(const CommonOpts& opt, int dim, std::vector<int> sizes, double p_min,
                         double p_max, int p_steps, int trials, int tail_configs) {
    if (sizes.empty()) throw ConfigError("percolation-scan: need at least one size");
    fs::create_directories(opt.out_dir);
    Rng rng(opt.seed);
    std::string csv = "size,p,spanning_prob,max_cluster_median,tail_slope,tail_r2\n";
    for (int size : sizes) {
        Grid grid = Grid::open(std::vector<int64_t>(dim, size));
        std::vector<double> fractions = detail::spanning_fractions_for_grid(grid, trials, rng);
        for (int i = 0; i < p_steps; ++i) {
            const double p = p_min + (p_max - p_min) * i / std::max(1, p_steps - 1);
            auto it = std::upper_bound(fractions.begin(), fractions.end(), p);
            const double spanning = static_cast<double>(it - fractions.begin()) / fractions.size();
            std::vector<int64_t> maxes;
            maxes.reserve(tail_configs);
            for (int c = 0; c < tail_configs; ++c) {
                std::vector<uint8_t> open = random_open_field(grid, p, rng);
                maxes.push_back(find_clusters(grid, open).max_size);
            }
            std::sort(maxes.begin(), maxes.end());
            const double median = maxes.size() % 2
                                      ? maxes[maxes.size() / 2]
                                      : 0.5 * (maxes[maxes.size() / 2 - 1] + maxes[maxes.size() / 2]);
            TailStats tail = cluster_tail_stats(maxes);
            csv += std::to_string(size) + "," + fmt_double(p) + "," + fmt_double(spanning) + "," +
                   fmt_double(median) + "," + fmt_double(tail.slope) + "," + fmt_double(tail.r2) + "\n";
        }
    }
    write_text(fs::path(opt.out_dir) / "scan.csv", csv);

    json meta;
    meta["version"] = kVersion;
    meta["seed"] = opt.seed;
    meta["dim"] = dim;
    meta["sizes"] = sizes;
    meta["trials"] = trials;
    if (sizes.size() >= 2) {
        Rng trng = Rng::stream(opt.seed, 1);
        ThresholdEstimate est = estimate_threshold(dim, sizes, trials, trng);
        meta["threshold"] = {{"p_c", est.p_c}, {"ci_lo", est.ci_lo}, {"ci_hi", est.ci_hi},
                             {"lattice_size", est.lattice_size}};
        std::cout << "p_c=" << fmt_double(est.p_c) << " ci=[" << fmt_double(est.ci_lo) << ","
                  << fmt_double(est.ci_hi) << "]\n";
    }
    write_text(fs::path(opt.out_dir) / "meta.json", meta.dump(2) + "\n");
    return 0;
}

int cmd_trotter_scan(const CommonOpts& opt, std::vector<int64_t> step_list) {
    json model_json = load_json_file(opt.config_path);
    ModelSpec model = load_model_spec(model_json);
    if (model.n() > 6) throw ConfigError("trotter-scan: n > 6 not supported");
    FullState exact = evolve_exact(model);
    fs::create_directories(opt.out_dir);
    std::string csv = "N,trace_norm_error\n";
    std::vector<double> lx, ly;
    for (int64_t n_steps : step_list) {
        TrotterCircuit circuit = build_trotter_circuit(model, n_steps);
        Superoperator avg = average_trotter_channel(circuit);
        Mat rho = avg.apply(product_state(model.rho0));
        rho /= rho.trace().real();
        const double err = trace_norm(Mat(rho - exact.rho));
        csv += std::to_string(n_steps) + "," + fmt_double(err) + "\n";
        lx.push_back(std::log(static_cast<double>(n_steps)));
        ly.push_back(std::log(std::max(err, 1e-300)));
    }
    write_text(fs::path(opt.out_dir) / "trotter_scan.csv", csv);
    double slope = 0.0;
    if (lx.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i]; sy += ly[i]; sxx += lx[i] * lx[i]; sxy += lx[i] * ly[i];
        }
        const double n = static_cast<double>(lx.size());
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    json meta = run_metadata(opt, model_json);
    meta["steps"] = step_list;
    meta["slope"] = slope;
    write_text(fs::path(opt.out_dir) / "meta.json", meta.dump(2) + "\n");
    std::cout << "slope=" << fmt_double(slope) << "\n";
    return 0;
}

int cmd_cooling_demo(const CommonOpts& opt, double eps_in, int levels, double tau_s) {
    fs::create_directories(opt.out_dir);
    std::string ladder = "level,qubits,polarization\n";
    double eps = eps_in;
    int qubits = 1;
    ladder += "0,1," + fmt_double(eps) + "\n";
    for (int l = 1; l <= levels; ++l) {
        qubits *= 3;
        eps = compression_map(eps);
        ladder += std::to_string(l) + "," + std::to_string(qubits) + "," + fmt_double(eps) + "\n";
    }
    write_text(fs::path(opt.out_dir) / "cooling_ladder.csv", ladder);
    std::cout << "cooling ladder (eps_in=" << fmt_double(eps_in) << "):\n" << ladder;

    std::string csv = "kappa,m,q,tau_s,tau_d_bound,kappa_tau_d,q_prime_at_bound\n";
    const std::vector<double> kappas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    const std::vector<double> qs = {0.05, 0.1, 0.2, 0.4};
    for (double kappa : kappas)
        for (int m : {1, 2, 3, 4})
            for (double q : qs) {
                double td = tau_d_bound(m, kappa, tau_s, q);
                ShiftExperiment exp{m, kappa, tau_s, td, q};
                csv += fmt_double(kappa) + "," + std::to_string(m) + "," + fmt_double(q) + "," +
                       fmt_double(tau_s) + "," + fmt_double(td) + "," + fmt_double(kappa * td) + "," +
                       fmt_double(shift_q_prime(exp)) + "\n";
            }
    write_text(fs::path(opt.out_dir) / "taud_feasibility.csv", csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisy spin dynamics sampler and desk-scale gadget simulators"};
    app.require_subcommand(1);

    CommonOpts opt;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) sub->add_option("--config", opt.config_path, "model config JSON")->required();
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--workers", opt.workers, "worker threads");
        sub->add_option("--out", opt.out_dir, "output directory");
    };

    int64_t n_samples = 1000;
    int64_t ref_assignments = 1'000'000;

    CLI::App* sample = app.add_subcommand("sample", "draw samples from the trotterized dynamics");
    add_common(sample, true);
    sample->add_option("--samples", n_samples, "number of samples");
    sample->add_option("--c-prime", opt.c_prime, "cluster rejection constant");
    sample->add_option("--tau-c", opt.tau_c, "block constant c in e^{-kappa tau} = c");
    sample->add_option("--steps", opt.steps, "override the trotter step count");
    sample->add_option("--epsilon", opt.epsilon, "trotter error target for choosing N");

    CLI::App* oracle = app.add_subcommand("oracle-compare", "compare sampler against the exact reference");
    add_common(oracle, true);
    oracle->add_option("--samples", n_samples, "number of samples");
    oracle->add_option("--reference-assignments", ref_assignments, "assignment draws for the reference");
    oracle->add_option("--c-prime", opt.c_prime, "cluster rejection constant");
    oracle->add_option("--tau-c", opt.tau_c, "block constant c in e^{-kappa tau} = c");
    oracle->add_option("--steps", opt.steps, "override the trotter step count");
    oracle->add_option("--epsilon", opt.epsilon, "trotter error target for choosing N");

    int dim = 2;
    std::vector<int> sizes = {64, 128};
    double p_min = 0.5, p_max = 0.7;
    int p_steps = 9, trials = 200, tail_configs = 200;
    CLI::App* perc = app.add_subcommand("percolation-scan", "site percolation spanning and cluster scan");
    add_common(perc, false);
    perc->add_option("--dim", dim, "lattice dimension (d+1)");
    perc->add_option("--sizes", sizes, "lattice extents");
    perc->add_option("--p-min", p_min, "lowest open probability");
    perc->add_option("--p-max", p_max, "highest open probability");
    perc->add_option("--p-steps", p_steps, "grid points");
    perc->add_option("--trials", trials, "spanning trials per size");
    perc->add_option("--tail-configs", tail_configs, "configs per point for cluster stats");

    std::vector<int64_t> step_list = {8, 16, 32, 64, 128, 256};
    CLI::App* tscan = app.add_subcommand("trotter-scan", "trotter error versus step count");
    add_common(tscan, true);
    tscan->add_option("--steps-list", step_list, "step counts to scan");

    double eps_in = 0.2, tau_s = 0.01;
    int levels = 4;
    CLI::App* cool = app.add_subcommand("cooling-demo", "compression ladder and tau_d feasibility");
    add_common(cool, false);
    cool->add_option("--eps-in", eps_in, "input polarization");
    cool->add_option("--levels", levels, "compression levels");
    cool->add_option("--tau-s", tau_s, "swap duration");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed()) return cmd_sample(opt, n_samples);
        if (oracle->parsed()) return cmd_oracle_compare(opt, n_samples, ref_assignments);
        if (perc->parsed())
            return cmd_percolation_scan(opt, dim, sizes, p_min, p_max, p_steps, trials, tail_configs);
        if (tscan->parsed()) return cmd_trotter_scan(opt, step_list);
        if (cool->parsed()) return cmd_cooling_demo(opt, eps_in, levels, tau_s);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible parameters: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
