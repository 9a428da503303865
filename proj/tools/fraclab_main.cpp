// Command-line front end: every subcommand assembles the same JSON block the
// config-file runner consumes, so `fraclab run -c cfg.json` and the direct
// subcommands produce identical artifacts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fraclab/experiment.hpp"

namespace fs = std::filesystem;
using fraclab::harness::ExperimentConfig;
using nlohmann::json;

namespace {

fs::path default_output_root() {
    if (const char* env = std::getenv("FRACLAB_OUT")) return fs::path(env);
    return fs::path("fraclab_out");
}

json drift_json(const std::string& spec) {
    if (spec.empty()) return json{{"type", "zero"}};
    if (spec.front() == '{' || spec.front() == '"') return json::parse(spec);
    if (spec.front() == '@') {
        std::ifstream in(spec.substr(1));
        if (!in) throw fraclab::ConfigError("cannot open drift descriptor file " + spec.substr(1));
        return json::parse(in);
    }
    return json(spec); // bare type name
}

struct Common {
    double alpha = 1.5;
    int dim = 2;
    double lambda = 1.0;
    std::size_t Nt = 32, Nx = 64;
    double Lt = 4.0, Lx = 16.0;
    std::uint64_t seed = 1;
    std::string out;

    void attach(CLI::App* app) {
        app->add_option("--alpha", alpha, "stability exponent in (0,2]");
        app->add_option("--dim", dim, "spatial dimension (1..3)");
        app->add_option("--lambda", lambda, "zeroth-order damping");
        app->add_option("--nt", Nt, "time grid size (power of two)");
        app->add_option("--nx", Nx, "space grid size (power of two)");
        app->add_option("--lt", Lt, "time box length");
        app->add_option("--lx", Lx, "space box length");
        app->add_option("--seed", seed, "root seed");
        app->add_option("--out", out, "output directory");
    }

    ExperimentConfig config(json experiments) const {
        json j{{"params", {{"alpha", alpha}, {"d", dim}, {"lambda", lambda}}},
               {"grid", {{"Lt", Lt}, {"Lx", Lx}, {"Nt", Nt}, {"Nx", Nx}}},
               {"seed", seed},
               {"experiments", std::move(experiments)}};
        fs::path dir = out.empty() ? default_output_root() : fs::path(out);
        j["output_dir"] = dir.string();
        return ExperimentConfig::parse(j, dir);
    }
};

int run_config(const ExperimentConfig& cfg) {
    const fs::path manifest = fraclab::harness::run_experiment(cfg);
    std::cout << "manifest: " << manifest.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for fractional parabolic equations with singular drift"};
    app.require_subcommand(1);

    Common common;
    std::string drift_spec, kernel_spec, config_path, manifest_path;
    double gamma = 2.0, q = 1.1, p = 2.0, tol = 1e-8, T = 1.0, dt = 1e-3, r = 0.0, tmax = 2.0,
           tmin = 0.1, xmax = 5.0, eps = 0.1, t_horizon = 0.5;
    int grid_n = 16, n_cutoff = 8;
    std::size_t paths = 10000, N = 1000;
    std::string mode = "meanfield";
    bool dump_paths = false;

    auto* ck = app.add_subcommand("kernel", "kernel tables and two-sided bound measurements");
    common.attach(ck);
    ck->add_option("--gamma", gamma, "kernel order in (0,2]");
    ck->add_option("--tmin", tmin, "grid start time");
    ck->add_option("--tmax", tmax, "grid end time");
    ck->add_option("--xmax", xmax, "max |x|");
    ck->add_option("--grid-n", grid_n, "points per axis");

    double rho_min = std::pow(2.0, -8), rho_max = std::pow(2.0, 8);
    int centers = 0;
    auto* cm = app.add_subcommand("morrey", "sampled parabolic Morrey norm of a drift");
    common.attach(cm);
    cm->add_option("--drift", drift_spec, "drift descriptor (JSON, @file or type name)")->required();
    cm->add_option("--q", q, "integrability exponent");
    cm->add_option("--rho-min", rho_min, "smallest cylinder radius");
    cm->add_option("--rho-max", rho_max, "largest cylinder radius");
    cm->add_option("--centers", centers, "extra lattice centers beyond the default plan");

    auto* ca = app.add_subcommand("akcheck", "empirical operator-inequality constant");
    common.attach(ca);
    ca->add_option("--drift", drift_spec)->required();
    ca->add_option("--p", p);
    ca->add_option("--eps", eps);

    std::string rhs_spec, g_spec;
    auto* cs = app.add_subcommand("solve", "Duhamel series solve of the regularized equation");
    common.attach(cs);
    cs->add_option("--drift", drift_spec)->required();
    cs->add_option("--rhs", rhs_spec, "forcing descriptor JSON {amplitude,t_center,t_width,x_width}");
    cs->add_option("--p", p);
    cs->add_option("--tol", tol);

    auto* ce = app.add_subcommand("evolve", "evolution family applied to initial data");
    common.attach(ce);
    ce->add_option("--drift", drift_spec)->required();
    ce->add_option("--g", g_spec, "initial datum descriptor JSON {amplitude,x_width,center}");
    ce->add_option("--r", r, "initial time");
    ce->add_option("--p", p);

    auto* csde = app.add_subcommand("sde", "Euler-Maruyama paths driven by stable noise");
    common.attach(csde);
    csde->add_option("--drift", drift_spec)->required();
    csde->add_option("--n-cutoff", n_cutoff, "drift cutoff level");
    csde->add_option("--T", T);
    csde->add_option("--dt", dt);
    csde->add_option("--paths", paths);
    csde->add_flag("--dump-paths", dump_paths, "write stored trajectories as CSV");

    auto* ckr = app.add_subcommand("krylov", "occupation-time bound measurements");
    common.attach(ckr);
    ckr->add_option("--drift", drift_spec)->required();
    ckr->add_option("--p", p);
    ckr->add_option("--t", t_horizon);
    ckr->add_option("--paths", paths);
    ckr->add_option("--dt", dt);

    auto* cmv = app.add_subcommand("mv", "mean-field / particle dynamics");
    common.attach(cmv);
    cmv->add_option("--kernel", kernel_spec, "interaction kernel descriptor")->required();
    cmv->add_option("--N", N, "particle count");
    cmv->add_option("--T", T);
    cmv->add_option("--dt", dt);
    cmv->add_option("--mode", mode, "particles | meanfield | both");

    auto* crun = app.add_subcommand("run", "run every experiment in a config file");
    crun->add_option("-c,--config", config_path, "JSON config")->required();
    std::string run_out;
    crun->add_option("--out", run_out, "output directory override");

    auto* crep = app.add_subcommand("report", "aggregate a manifest into summary.csv");
    crep->add_option("-m,--manifest", manifest_path, "manifest.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ck))
            return run_config(common.config(json::array({json{{"type", "kernel"},
                                                              {"gamma", gamma},
                                                              {"tmin", tmin},
                                                              {"tmax", tmax},
                                                              {"xmax", xmax},
                                                              {"grid_n", grid_n}}})));
        if (app.got_subcommand(cm))
            return run_config(common.config(json::array({json{{"type", "morrey"},
                                                              {"drift", drift_json(drift_spec)},
                                                              {"q", q},
                                                              {"rho_min", rho_min},
                                                              {"rho_max", rho_max},
                                                              {"centers", centers}}})));
        if (app.got_subcommand(ca))
            return run_config(common.config(json::array({json{{"type", "akcheck"},
                                                              {"drift", drift_json(drift_spec)},
                                                              {"p", p},
                                                              {"eps", eps}}})));
        if (app.got_subcommand(cs)) {
            json blk{{"type", "solve"},
                     {"drift", drift_json(drift_spec)},
                     {"p", p},
                     {"lambda", common.lambda},
                     {"tol", tol}};
            if (!rhs_spec.empty()) blk["rhs"] = json::parse(rhs_spec);
            return run_config(common.config(json::array({blk})));
        }
        if (app.got_subcommand(ce)) {
            json blk{{"type", "evolve"},
                     {"drift", drift_json(drift_spec)},
                     {"r", r},
                     {"p", p},
                     {"lambda", common.lambda}};
            if (!g_spec.empty()) blk["g"] = json::parse(g_spec);
            return run_config(common.config(json::array({blk})));
        }
        if (app.got_subcommand(csde))
            return run_config(common.config(json::array({json{{"type", "sde"},
                                                              {"drift", drift_json(drift_spec)},
                                                              {"n_cutoff", n_cutoff},
                                                              {"T", T},
                                                              {"dt", dt},
                                                              {"paths", paths},
                                                              {"seed", common.seed},
                                                              {"dump_paths", dump_paths}}})));
        if (app.got_subcommand(ckr))
            return run_config(common.config(json::array({json{{"type", "krylov"},
                                                              {"drift", drift_json(drift_spec)},
                                                              {"p", p},
                                                              {"t", t_horizon},
                                                              {"paths", paths},
                                                              {"dt", dt},
                                                              {"seed", common.seed}}})));
        if (app.got_subcommand(cmv))
            return run_config(common.config(json::array({json{{"type", "mv"},
                                                              {"kernel", drift_json(kernel_spec)},
                                                              {"N", N},
                                                              {"T", T},
                                                              {"dt", dt},
                                                              {"seed", common.seed},
                                                              {"mode", mode}}})));
        if (app.got_subcommand(crun)) {
            std::ifstream in(config_path);
            if (!in) throw fraclab::ConfigError("cannot open config " + config_path);
            json j = json::parse(in);
            if (!run_out.empty()) j["output_dir"] = run_out;
            ExperimentConfig cfg = ExperimentConfig::parse(j, default_output_root());
            return run_config(cfg);
        }
        if (app.got_subcommand(crep)) {
            const fs::path out = fraclab::harness::report(manifest_path);
            std::cout << "summary: " << out.string() << "\n";
            return 0;
        }
    } catch (const fraclab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
