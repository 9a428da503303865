#include "fraclab/experiment.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fraclab/kernels.hpp"
#include "fraclab/mckean_vlasov.hpp"
#include "fraclab/morrey.hpp"
#include "fraclab/sde.hpp"
#include "fraclab/solver.hpp"

namespace fraclab {
namespace harness {

// ---------------------------------------------------------------------------
// sha256 (FIPS 180-4), enough for artifact manifests

namespace {

struct Sha256 {
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    std::uint64_t total = 0;
    unsigned char buf[64];
    std::size_t fill = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void block(const unsigned char* p) {
        static const std::uint32_t K[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6],
                      hh = h[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + S1 + ch + K[i] + w[i];
            const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = S0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }

    void update(const unsigned char* p, std::size_t n) {
        total += n;
        while (n > 0) {
            const std::size_t take = std::min<std::size_t>(n, 64 - fill);
            std::memcpy(buf + fill, p, take);
            fill += take;
            p += take;
            n -= take;
            if (fill == 64) {
                block(buf);
                fill = 0;
            }
        }
    }

    std::string hex() {
        const std::uint64_t bits = total * 8;
        unsigned char pad[72] = {0x80};
        const std::size_t padlen = (fill < 56) ? (56 - fill) : (120 - fill);
        update(pad, padlen);
        unsigned char len[8];
        for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len, 8);
        char out[65];
        for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
        return std::string(out, 64);
    }
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 s;
    s.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    return s.hex();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModuleError("harness", "cannot write " + path.string());
    out << body;
}

void CsvWriter::header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) body += (i ? "," : "") + cols[i];
    body += "\n";
}
void CsvWriter::row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) body += (i ? "," : "") + format_double(vals[i]);
    body += "\n";
}
void CsvWriter::row_mixed(const std::vector<std::string>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) body += (i ? "," : "") + vals[i];
    body += "\n";
}

// ---------------------------------------------------------------------------
// config parsing

namespace {
double need_number(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(ctx + "." + key + ": missing or not a number");
    return j[key].get<double>();
}
} // namespace

ExperimentConfig ExperimentConfig::parse(const json& j, const std::filesystem::path& default_out) {
    ExperimentConfig cfg;
    cfg.raw = j;
    if (j.contains("params")) {
        const json& p = j["params"];
        const double alpha = need_number(p, "alpha", "params");
        if (!(alpha > 0.0 && alpha <= 2.0)) throw ConfigError("params.alpha: must lie in (0,2]");
        const double d = p.value("d", 2.0);
        if (d < 1 || d > 3 || d != std::floor(d)) throw ConfigError("params.d: must be 1, 2 or 3");
        const double lambda = p.value("lambda", 1.0);
        if (lambda < 0.0) throw ConfigError("params.lambda: must be >= 0");
        cfg.params = StableParams(alpha, static_cast<int>(d), lambda);
    }
    if (j.contains("grid")) {
        const json& g = j["grid"];
        cfg.grid_Lt = g.value("Lt", cfg.grid_Lt);
        cfg.grid_Lx = g.value("Lx", cfg.grid_Lx);
        cfg.grid_Nt = g.value("Nt", cfg.grid_Nt);
        cfg.grid_Nx = g.value("Nx", cfg.grid_Nx);
        auto pow2 = [](std::size_t n) { return n >= 8 && (n & (n - 1)) == 0; };
        if (!pow2(cfg.grid_Nt)) throw ConfigError("grid.Nt: must be a power of two >= 8");
        if (!pow2(cfg.grid_Nx)) throw ConfigError("grid.Nx: must be a power of two >= 8");
    }
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.output_dir = j.contains("output_dir") ? std::filesystem::path(j["output_dir"].get<std::string>())
                                              : default_out;
    return cfg;
}

drift::DriftDescriptor parse_drift_descriptor(const json& j) {
    drift::DriftDescriptor d;
    if (j.is_string()) {
        d.type = j.get<std::string>();
        return d;
    }
    d.type = j.value("type", "radial");
    d.kappa = j.value("kappa", 0.0);
    d.s = j.value("s", 0.0);
    d.t0 = j.value("t0", 0.0);
    d.direction = j.value("direction", "attracting");
    d.direction_axis = j.value("direction_axis", 0);
    d.trunc_radius = j.value("trunc_radius", d.trunc_radius);
    d.csv_path = j.value("csv_path", "");
    d.interpolation = j.value("interpolation", "linear");
    d.amplitude = j.value("amplitude", 0.0);
    d.radius = j.value("radius", 1.0);
    if (j.contains("constant")) d.constant = j["constant"].get<std::vector<double>>();
    if (j.contains("parts"))
        for (const auto& sub : j["parts"]) d.parts.push_back(parse_drift_descriptor(sub));
    return d;
}

// ---------------------------------------------------------------------------
// experiment blocks

json run_kernel_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    StableParams p = cfg.params;
    if (block.contains("alpha")) p.alpha = block["alpha"].get<double>();
    if (block.contains("dim")) p.d = block["dim"].get<int>();
    p.validate();
    const double gamma = block.value("gamma", 2.0);
    const double tmin = block.value("tmin", 0.1);
    const double tmax = block.value("tmax", 2.0);
    const double xmax = block.value("xmax", 5.0);
    const int grid_n = block.value("grid_n", 16);

    kernels::StableDensity q(p);
    kernels::BoundGrid grid = kernels::make_bound_grid(tmin, tmax, xmax, grid_n, grid_n);
    kernels::BoundReport rep = kernels::verify_bounds(q, gamma, grid);

    CsvWriter csv;
    csv.header({"t", "abs_x", "p_gamma", "q_gamma", "ratio"});
    const double cg = kernels::resolvent_constant(gamma);
    for (double t : grid.times)
        for (double r : grid.radii) {
            const double qg = cg * std::pow(t, 0.5 * gamma - 1.0) * q(t, r);
            const double pg = kernels::comparison_kernel(t, r, gamma, p);
            csv.row({t, r, pg, qg, qg / pg});
        }
    const std::string csv_name = "kernel_table.csv";
    write_text(out / csv_name, csv.body);
    artifacts.push_back(csv_name);

    json rep_json{{"module", "kernel"},
                  {"alpha", p.alpha},
                  {"d", p.d},
                  {"gamma", gamma},
                  {"c_hat", rep.c_hat},
                  {"C_hat", rep.C_hat},
                  {"C1_hat", rep.C1_hat},
                  {"points", rep.points},
                  {"mass", q.mass()}};
    const std::string name = "kernel_report.json";
    write_text(out / name, rep_json.dump(2) + "\n");
    artifacts.push_back(name);
    return rep_json;
}

json run_morrey_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField b = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    const double q = block.value("q", 1.1);
    const double rho_min = block.value("rho_min", std::pow(2.0, -8));
    const double rho_max = block.value("rho_max", std::pow(2.0, 8));
    const int lo = static_cast<int>(std::floor(std::log2(rho_min)));
    const int hi = static_cast<int>(std::ceil(std::log2(rho_max)));
    morrey::ScalarField w = morrey::drift_power_field(b, 1.0 / (cfg.params.alpha - 1.0));
    morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, cfg.params.d, lo, hi);
    for (int extra = 0; extra < block.value("centers", 0); ++extra) {
        std::array<double, 3> cpt{0.25 * (extra + 1), 0.35 * (extra % 3), 0.0};
        plan.centers_x.push_back(cpt);
    }
    morrey::MorreyReport rep = morrey::parabolic_morrey_norm(w, q, plan, cfg.params.alpha);
    json rj{{"module", "morrey"},
            {"drift", b.id},
            {"q", q},
            {"norm_estimate", rep.norm_estimate},
            {"arg_rho", rep.arg_cylinder.rho},
            {"arg_t", rep.arg_cylinder.t},
            {"arg_x", std::vector<double>(rep.arg_cylinder.x.begin(),
                                          rep.arg_cylinder.x.begin() + cfg.params.d)},
            {"rho_grid", rep.rho_grid},
            {"centers", rep.center_count}};
    const std::string name = "morrey_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);
    return rj;
}

json run_akcheck_block(const ExperimentConfig& cfg, const json& block,
                       const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField b = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    const double p = block.value("p", 2.0);
    const double eps = block.value("eps", 0.1);
    BoxGrid g(cfg.grid_Lt, cfg.grid_Lx, cfg.grid_Nt, cfg.grid_Nx, cfg.params.d);
    FieldOnGrid f = FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
        double r2 = (t - 0.5 * g.Lt) * (t - 0.5 * g.Lt);
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    });
    morrey::ScalarField w = morrey::drift_power_field(b, 1.0 / (cfg.params.alpha - 1.0));
    morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, cfg.params.d, -6, 6);
    morrey::MorreyReport mrep = morrey::parabolic_morrey_norm(w, 1.0 + eps, plan, cfg.params.alpha);
    morrey::AdamsKrylovResult res = morrey::adams_krylov_check(b, f, p, cfg.params, mrep);
    json rj{{"module", "akcheck"}, {"drift", b.id},
            {"p", p},             {"eps", eps},
            {"vacuous", res.vacuous}, {"constant", res.constant},
            {"constant_adjoint", res.constant_adjoint}, {"lhs", res.lhs},
            {"morrey_norm", res.morrey_norm}, {"f_norm", res.f_norm}};
    const std::string name = "akcheck_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);
    return rj;
}

namespace {
// forcing descriptor: a separable space-time bump
FieldOnGrid make_rhs(const BoxGrid& g, const json& desc) {
    const double amp = desc.value("amplitude", 1.0);
    const double tc0 = desc.value("t_center", 0.35 * g.Lt);
    const double tw = desc.value("t_width", 0.12 * g.Lt);
    const double xw = desc.value("x_width", 1.0);
    return FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        const double tc = (t - tc0) / tw;
        return amp * std::exp(-tc * tc - r2 / (xw * xw));
    });
}
FieldOnGrid make_initial(const BoxGrid& g, const json& desc) {
    const double amp = desc.value("amplitude", 1.0);
    const double xw = desc.value("x_width", 1.0);
    std::vector<double> center = desc.value("center", std::vector<double>{});
    return FieldOnGrid::sample_spatial(g, [&](std::span<const double> x) {
        double r2 = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            const double dx = x[a] - (a < center.size() ? center[a] : 0.0);
            r2 += dx * dx;
        }
        return amp * std::exp(-r2 / (xw * xw));
    });
}
} // namespace

json run_solve_block(const ExperimentConfig& cfg, const json& block,
                     const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField b = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    BoxGrid g(cfg.grid_Lt, cfg.grid_Lx, cfg.grid_Nt, cfg.grid_Nx, cfg.params.d);
    FieldOnGrid f = make_rhs(g, block.value("rhs", json::object()));
    solver::SolveOptions opt;
    opt.p = block.value("p", 2.0);
    opt.lambda = block.value("lambda", 5.0);
    opt.tol = block.value("tol", 1e-8);
    solver::SolveResult res = solver::solve_series(b, f, opt);

    json rj{{"module", "solve"},
            {"drift", b.id},
            {"p", opt.p},
            {"lambda", opt.lambda},
            {"tol", opt.tol},
            {"series_terms", res.series_terms},
            {"last_ratio", res.contraction.last_ratio},
            {"contraction_lower_bound", res.contraction.norm_lower_bound},
            {"residual", res.residual}};
    for (const auto& [gamma, norm] : res.bessel_norms)
        rj["bessel_norms"][format_double(gamma)] = norm;
    const std::string name = "solve_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);

    // midplane slice at the time of peak forcing
    CsvWriter csv;
    csv.header({"x1", "u"});
    const std::size_t it = static_cast<std::size_t>(0.45 * g.Nt);
    const std::size_t sp = g.space_size();
    for (std::size_t i = 0; i < g.Nx; ++i) {
        std::size_t idx = it * sp;
        if (g.d == 1) idx += i;
        else if (g.d == 2) idx += i * g.Nx + g.Nx / 2;
        else idx += (i * g.Nx + g.Nx / 2) * g.Nx + g.Nx / 2;
        csv.row({g.coord_at(i), res.u.values()[idx]});
    }
    const std::string slice = "solve_slice.csv";
    write_text(out / slice, csv.body);
    artifacts.push_back(slice);
    return rj;
}

json run_evolve_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField b = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    BoxGrid g(cfg.grid_Lt, cfg.grid_Lx, cfg.grid_Nt, cfg.grid_Nx, cfg.params.d);
    const double r = block.value("r", 0.0);
    FieldOnGrid g0 = make_initial(g, block.value("g", json::object()));
    solver::SolveOptions opt;
    opt.p = block.value("p", 4.0);
    opt.lambda = block.value("lambda", 5.0);
    solver::EvolveResult res = solver::evolve(g0, r, b, opt);
    json rj{{"module", "evolve"},        {"drift", b.id},
            {"r", r},                    {"p", opt.p},
            {"series_terms", res.series_terms}, {"sup_norm", res.sup_norm},
            {"g_w1p_norm", res.g_w1p_norm},     {"sup_constant", res.sup_constant}};
    const std::string name = "evolve_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);
    return rj;
}

json run_sde_block(const ExperimentConfig& cfg, const json& block,
                   const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField braw = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    const int n_cutoff = block.value("n_cutoff", 8);
    BoxGrid ref(cfg.grid_Lt, cfg.grid_Lx, cfg.grid_Nt, cfg.grid_Nx, cfg.params.d);
    drift::TunedCutoff cut = drift::auto_cutoff_mollify(braw, n_cutoff, ref, 2.0);
    const double T = block.value("T", 1.0);
    const double dt = block.value("dt", 1e-3);
    const std::size_t paths = block.value("paths", std::size_t{10000});
    std::vector<double> x0(cfg.params.d, 0.0);
    if (block.contains("x0")) x0 = block["x0"].get<std::vector<double>>();
    sde::PathEnsemble e = sde::euler_maruyama(cut.field, x0, T, dt, paths,
                                              block.value("seed", cfg.seed), cfg.params,
                                              0.5 * cfg.grid_Lx);
    e.cutoff_n = cut.spec.n;
    e.eps_n = cut.spec.eps_n;
    sde::MassReport mass = sde::mass_check(e);

    json rj{{"module", "sde"},
            {"drift", braw.id},
            {"n_cutoff", n_cutoff},
            {"eps_n", cut.spec.eps_n},
            {"paths", paths},
            {"dt", dt},
            {"T", T},
            {"seed", block.value("seed", cfg.seed)},
            {"escape_fraction", mass.escape_fraction},
            {"escape_warning", mass.warning}};
    {
        // terminal moments
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < e.num_paths; ++i) {
            double r2 = 0.0;
            for (int a = 0; a < e.d; ++a) r2 += e.terminal[i * e.d + a] * e.terminal[i * e.d + a];
            m1 += std::sqrt(r2);
            m2 += r2;
        }
        rj["terminal_mean_radius"] = m1 / e.num_paths;
        rj["terminal_second_moment"] = m2 / e.num_paths;
    }
    const std::string name = "sde_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);

    if (block.value("dump_paths", false)) {
        CsvWriter csv;
        csv.header({"path", "step", "t", "x1", "x2", "x3"});
        const std::size_t steps = e.steps();
        for (std::size_t pth = 0; pth < e.stored_count; ++pth)
            for (std::size_t k = 0; k <= steps; ++k) {
                std::vector<double> row{static_cast<double>(pth), static_cast<double>(k),
                                        dt * static_cast<double>(k)};
                for (int a = 0; a < e.d; ++a)
                    row.push_back(e.stored[(pth * (steps + 1) + k) * e.d + a]);
                for (int a = e.d; a < 3; ++a) row.push_back(0.0);
                csv.row(row);
            }
        const std::string paths_name = "sde_paths.csv";
        write_text(out / paths_name, csv.body);
        artifacts.push_back(paths_name);
    }
    return rj;
}

json run_krylov_block(const ExperimentConfig& cfg, const json& block,
                      const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField braw = drift::make_drift(parse_drift_descriptor(block.at("drift")), cfg.params);
    BoxGrid ref(cfg.grid_Lt, cfg.grid_Lx, cfg.grid_Nt, cfg.grid_Nx, cfg.params.d);
    drift::TunedCutoff cut = drift::auto_cutoff_mollify(braw, block.value("n_cutoff", 8), ref, 2.0);
    const double p = block.value("p", 4.0);
    const double t = block.value("t", 0.5);
    std::vector<double> x0(cfg.params.d, 0.0);

    // occupation target: a unit bump around the origin
    sde::OccupationTarget target;
    target.id = "bump";
    target.eval = [](double, std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    };
    target.l1_norm = t * std::pow(M_PI, 0.5 * cfg.params.d);
    sde::MCSpec spec;
    spec.num_paths = block.value("paths", std::size_t{20000});
    spec.dt = block.value("dt", 2e-3);
    spec.seed = block.value("seed", cfg.seed);
    auto reports = sde::krylov_bound_check(cut.field, {target}, p, t, x0, spec, cfg.params);
    json rj{{"module", "krylov"}, {"drift", braw.id}, {"p", p}, {"t", t}};
    for (const auto& r : reports)
        rj["reports"].push_back(json{{"F", r.F_id},
                                     {"lhs", r.lhs},
                                     {"lhs_se", r.lhs_se},
                                     {"rhs", r.rhs},
                                     {"fitted_C", r.fitted_C}});
    const std::string name = "krylov_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);
    return rj;
}

json run_mv_block(const ExperimentConfig& cfg, const json& block,
                  const std::filesystem::path& out, std::vector<std::string>& artifacts) {
    drift::DriftField kernel =
        drift::make_drift(parse_drift_descriptor(block.at("kernel")), cfg.params);
    mv::SpatialGrid sg;
    sg.Lx = cfg.grid_Lx;
    sg.Nx = cfg.grid_Nx;
    sg.d = cfg.params.d;
    const double hwidth = block.value("h_width", 1.0);
    auto h = [hwidth](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2 / (hwidth * hwidth));
    };
    mv::MeanFieldOptions opt;
    opt.dt = block.value("dt", 5e-3);
    opt.T = block.value("T", 0.5);
    opt.lambda = cfg.params.lambda > 0 ? cfg.params.lambda : 1.0;
    const std::string mode = block.value("mode", "meanfield");

    json rj{{"module", "mv"}, {"kernel", kernel.id}, {"mode", mode}};
    CsvWriter csv;
    csv.header({"t", "second_moment", "mass_drift", "min_value"});
    if (mode == "meanfield" || mode == "both") {
        mv::DensityEvolution evo = mv::meanfield_solve(kernel, h, sg, cfg.params.alpha, opt);
        for (std::size_t k = 0; k < evo.rho.size(); ++k) {
            const double t = opt.dt * static_cast<double>(k);
            csv.row({t, mv::second_moment(sg, evo.rho[k]),
                     k ? evo.mass_drift[k - 1] : 0.0, k ? evo.min_value[k - 1] : 0.0});
        }
        rj["final_second_moment"] = mv::second_moment(sg, evo.rho.back());
        rj["max_mass_drift"] =
            evo.mass_drift.empty() ? 0.0 : *std::max_element(evo.mass_drift.begin(), evo.mass_drift.end());
        const double pp = block.value("p", 2.0);
        const double rr = block.value("r_exponent", 0.9 * pp);
        mv::AprioriReport ap = mv::apriori_bound_check(evo, pp, rr, cfg.params.alpha, 32);
        rj["apriori_ratio_delta"] = ap.ratio_delta;
        rj["apriori_ratio_lr"] = ap.ratio_lr;
        morrey::ScalarField w = morrey::drift_power_field(kernel, 1.0 / (cfg.params.alpha - 1.0));
        morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, cfg.params.d, -5, 5);
        morrey::MorreyReport rhs =
            morrey::elliptic_morrey_norm(w, 1.1, plan, cfg.params.alpha);
        mv::YoungMorreyReport ym = mv::young_morrey_check(kernel, evo, 0.1, cfg.params.alpha, rhs);
        rj["young_morrey_lhs"] = ym.lhs;
        rj["young_morrey_rhs"] = ym.rhs;
        rj["young_morrey_holds"] = ym.holds_on_all_cylinders;
    }
    if (mode == "particles" || mode == "both") {
        mv::ParticleOptions popt;
        popt.dt = opt.dt;
        popt.T = opt.T;
        auto snaps = mv::particle_system_run(kernel, h, sg, cfg.params.alpha,
                                             block.value("N", std::size_t{1000}),
                                             block.value("seed", cfg.seed), popt);
        double m2 = 0.0;
        const auto& fin = snaps.back();
        for (std::size_t i = 0; i < fin.N; ++i) {
            double r2 = 0.0;
            for (int a = 0; a < fin.d; ++a) r2 += fin.positions[i * fin.d + a] * fin.positions[i * fin.d + a];
            m2 += r2;
        }
        rj["particle_second_moment"] = m2 / fin.N;
        rj["N"] = fin.N;
        rj["kernel_trunc"] = fin.kernel_trunc;
    }
    const std::string mom = "mv_moments.csv";
    write_text(out / mom, csv.body);
    artifacts.push_back(mom);
    const std::string name = "mv_report.json";
    write_text(out / name, rj.dump(2) + "\n");
    artifacts.push_back(name);
    return rj;
}

// ---------------------------------------------------------------------------

std::filesystem::path run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    std::vector<std::string> artifacts;

    // resolved config is always written alongside the outputs
    write_text(cfg.output_dir / "config_resolved.json", cfg.raw.dump(2) + "\n");
    artifacts.push_back("config_resolved.json");

    if (cfg.raw.contains("experiments")) {
        for (const auto& block : cfg.raw["experiments"]) {
            const std::string type = block.value("type", "");
            try {
                if (type == "kernel") run_kernel_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "morrey") run_morrey_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "akcheck") run_akcheck_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "solve") run_solve_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "evolve") run_evolve_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "sde") run_sde_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "krylov") run_krylov_block(cfg, block, cfg.output_dir, artifacts);
                else if (type == "mv") run_mv_block(cfg, block, cfg.output_dir, artifacts);
                else throw ConfigError("experiments[].type: unknown type '" + type + "'");
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                throw ModuleError(type, e.what());
            }
        }
    }

    json manifest;
    manifest["artifacts"] = json::array();
    for (const auto& name : artifacts) {
        std::ifstream in(cfg.output_dir / name, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        manifest["artifacts"].push_back(json{{"name", name}, {"sha256", sha256_hex(bytes)}});
    }
    const fs::path mpath = cfg.output_dir / "manifest.json";
    write_text(mpath, manifest.dump(2) + "\n");
    return mpath;
}

std::filesystem::path report(const std::filesystem::path& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw MissingArtifact("report: manifest not found: " + manifest_path.string());
    json manifest = json::parse(in);
    const fs::path dir = manifest_path.parent_path();

    CsvWriter csv;
    csv.header({"artifact", "module", "key", "value"});
    for (const auto& entry : manifest["artifacts"]) {
        const std::string name = entry["name"].get<std::string>();
        const fs::path path = dir / name;
        if (!fs::exists(path)) throw MissingArtifact("report: missing artifact " + name);
        if (path.extension() != ".json" || name == "config_resolved.json") continue;
        std::ifstream f(path);
        json j = json::parse(f);
        const std::string module = j.value("module", "unknown");
        for (const auto& [key, val] : j.items()) {
            if (val.is_number())
                csv.row_mixed({name, module, key, format_double(val.get<double>())});
            else if (val.is_boolean())
                csv.row_mixed({name, module, key, val.get<bool>() ? "true" : "false"});
        }
    }
    const fs::path out = dir / "summary.csv";
    write_text(out, csv.body);
    return out;
}

} // namespace harness
} // namespace fraclab
