#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tscc/batch.h"
#include "tscc/lattice.h"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) {
    g_stop.store(true);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Monte Carlo threshold estimation for topological subsystem color codes"};
    app.require_subcommand(1);

    auto *gen = app.add_subcommand("generate-lattice", "Write the canonical lattice serialization");
    int gen_L = 0, size1 = 0, size2 = 0, shear = 0;
    std::string gen_out;
    gen->add_option("--L", gen_L, "Linear size of the square torus (multiple of 3)");
    gen->add_option("--size1", size1, "Sheared torus: vertices along direction 1");
    gen->add_option("--size2", size2, "Sheared torus: vertices along direction 2");
    gen->add_option("--shear", shear, "Sheared torus: shift applied when wrapping direction 2");
    gen->add_option("--out", gen_out, "Output file (default: stdout)");

    auto *run = app.add_subcommand("run", "Run a batch of disorder samples");
    std::string config_path, preset_name, out_dir;
    uint32_t workers = 0;
    uint64_t seed = 0;
    bool resume = false;
    uint64_t budget = 0, ckpt_interval = 1u << 14;
    std::vector<double> only_p;
    std::vector<int> only_L;
    auto *cfg_opt = run->add_option("--config", config_path, "Config file");
    auto *preset_opt = run->add_option("--preset", preset_name, "Built-in preset");
    cfg_opt->excludes(preset_opt);
    run->add_option("--workers", workers, "Worker threads");
    auto *seed_opt = run->add_option("--seed", seed, "Master seed (overrides the config)");
    run->add_option("--out", out_dir, "Output directory");
    run->add_flag("--resume", resume, "Continue interrupted samples from their checkpoints");
    run->add_option("--sweep-budget", budget, "Stop each sample after this many sweeps (checkpointed)");
    run->add_option("--checkpoint-interval", ckpt_interval, "Sweeps between checkpoints");
    run->add_option("--p", only_p, "Only run cells with these p");
    run->add_option("--only-L", only_L, "Only run cells with these L");

    auto *an = app.add_subcommand("analyze", "Crossings, phase boundary and threshold from a batch directory");
    std::string an_dir;
    uint32_t resamples = 500;
    uint64_t an_seed = 0;
    bool no_svg = false, no_sens = false;
    an->add_option("--out", an_dir, "Batch directory")->required();
    an->add_option("--resamples", resamples, "Bootstrap resamples");
    an->add_option("--seed", an_seed, "Bootstrap seed");
    an->add_flag("--no-svg", no_svg, "Skip SVG plots");
    an->add_flag("--no-sensitivity", no_sens, "Skip the per-sublattice sensitivity report");

    auto *pr = app.add_subcommand("preset", "Inspect built-in presets");
    pr->require_subcommand(1);
    auto *pr_list = pr->add_subcommand("list", "List presets");
    auto *pr_show = pr->add_subcommand("show", "Print a preset as config text");
    std::string show_name;
    pr_show->add_option("name", show_name)->required();

    auto *rep = app.add_subcommand("report", "Summarize a batch directory");
    std::string rep_dir;
    rep->add_option("--out", rep_dir, "Batch directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            tscc::LatticeSpec spec;
            if (gen_L > 0) {
                spec = tscc::LatticeSpec::square(gen_L);
            } else if (size1 > 0) {
                spec = {size1, size2, shear};
            } else {
                std::cerr << "generate-lattice: give --L or --size1/--size2/--shear\n";
                return 2;
            }
            std::string text = tscc::serialize_lattice(tscc::build_lattice(spec));
            if (gen_out.empty()) {
                std::cout << text << "\n";
            } else {
                std::ofstream(gen_out) << text << "\n";
            }
            return 0;
        }
        if (*run) {
            tscc::BatchConfig cfg;
            if (!config_path.empty()) {
                cfg = tscc::load_config(config_path);
            } else if (!preset_name.empty()) {
                cfg.runs = tscc::preset(preset_name).runs;
            } else {
                std::cerr << "run: give --config or --preset\n";
                return 2;
            }
            std::vector<tscc::RunConfig> runs;
            for (tscc::RunConfig rc : cfg.runs) {
                if (!only_p.empty() && std::find(only_p.begin(), only_p.end(), rc.p) == only_p.end()) {
                    continue;
                }
                if (!only_L.empty() && std::find(only_L.begin(), only_L.end(), rc.L) == only_L.end()) {
                    continue;
                }
                if (*seed_opt) {
                    rc.seed = seed;
                }
                runs.push_back(rc);
            }
            if (runs.empty()) {
                std::cerr << "run: no cells selected\n";
                return 2;
            }
            tscc::BatchOptions opt;
            opt.out_dir = !out_dir.empty() ? out_dir : cfg.out_dir.value_or("out");
            opt.workers = workers > 0 ? workers : cfg.workers.value_or(1);
            opt.resume = resume;
            opt.checkpoint_interval = ckpt_interval;
            if (budget > 0) {
                opt.sweep_budget = budget;
            }
            opt.stop = &g_stop;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            tscc::BatchSummary s = tscc::run_batch(runs, opt);
            std::printf("cells=%u skipped=%u done=%u unequilibrated=%u pending=%u failed=%u\n", s.cells, s.skipped,
                        s.done, s.unequilibrated, s.pending, s.failed);
            return s.failed ? 1 : 0;
        }
        if (*an) {
            tscc::AnalyzeOptions opt;
            opt.n_resample = resamples;
            opt.seed = an_seed;
            opt.svg = !no_svg;
            opt.sensitivity = !no_sens;
            tscc::AnalyzeReport r = tscc::analyze(an_dir, opt);
            for (const auto &e : r.crossings) {
                std::printf("p=%g %s T_c=%.4f +- %.4f\n", e.p, tscc::crossing_status_name(e.status), e.Tc, e.sigma_Tc);
            }
            if (r.threshold) {
                std::printf("p_c=%.5f +- %.5f\n", r.threshold->p_c, r.threshold->sigma);
            } else {
                std::printf("threshold: %s\n", r.threshold_status.c_str());
            }
            for (const auto &g : r.gaps) {
                std::printf("gap: %s\n", g.c_str());
            }
            return 0;
        }
        if (*pr_list) {
            for (const std::string &n : tscc::preset_names()) {
                std::printf("%-14s %s\n", n.c_str(), tscc::preset(n).description.c_str());
            }
            return 0;
        }
        if (*pr_show) {
            tscc::Preset p = tscc::preset(show_name);
            tscc::BatchConfig cfg;
            cfg.description = p.description;
            cfg.runs = p.runs;
            std::cout << tscc::format_config(cfg);
            return 0;
        }
        if (*rep) {
            std::cout << tscc::batch_report(rep_dir);
            return 0;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
