#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "nlsemi/channel_sim.hpp"
#include "nlsemi/mi_formulas.hpp"
#include "nlsemi/montecarlo.hpp"
#include "nlsemi/wick_verify.hpp"

using namespace nlsemi;
using namespace nlsemi::cli;

namespace {

constexpr int schema_version = 1;

enum Exit { ok = 0, check_failed = 1, usage = 2 };

struct Options {
    std::string config_path;
    std::string out_path;
    bool print = false;
    bool bits = false;
};

/// A run in progress: parameters, results and checks accumulate into one record.
class Record {
public:
    explicit Record(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    void result(const std::string& name, double v) { results_[name] = v; }
    void result(const std::string& name, const MCEstimate& e) {
        Json j;
        j["mean"] = e.mean;
        j["stderr"] = e.std_error;
        j["n"] = e.n;
        if (e.flagged) j["flagged"] = e.flagged;
        results_[name] = j;
    }
    void result(const std::string& name, Json j) { results_[name] = std::move(j); }

    void check(const VerificationReport& r) {
        Json j;
        j["name"] = r.name;
        j["passed"] = r.passed;
        j["residual"] = r.residual;
        j["scale"] = r.scale;
        if (!r.values.empty()) {
            Json v = Json::object();
            for (const auto& [k, x] : r.values) v[k] = x;
            j["values"] = v;
        }
        if (!r.detail.empty()) j["detail"] = r.detail;
        checks_.push_back(j);
        all_passed_ = all_passed_ && r.passed;
        std::cerr << (r.passed ? "  pass  " : "  FAIL  ") << r.name << "  residual " << r.residual << "\n";
    }
    void check(const std::string& name, bool passed, double residual, const std::string& detail = "") {
        VerificationReport r;
        r.name = name;
        r.passed = passed;
        r.residual = residual;
        r.detail = detail;
        check(r);
    }
    bool passed() const { return all_passed_; }

    Json finish(const Json& params, std::optional<std::uint64_t> seed) const {
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        Json j;
        j["schema_version"] = schema_version;
        j["command"] = command_;
        j["params"] = params;
        j["results"] = results_;
        j["verifications"] = checks_;
        j["passed"] = all_passed_;
        if (seed) j["seed"] = *seed;
        else j["seed"] = nullptr;
        j["runtime_ms"] = ms;
        return j;
    }

private:
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    Json results_ = Json::object();
    Json checks_ = Json::array();
    bool all_passed_ = true;
};

void emit(const Options& o, const std::string& default_out, const std::string& text) {
    const std::string path = o.out_path.empty() ? default_out : o.out_path;
    if (path != "-") {
        std::ofstream f(path);
        if (!f) throw UsageError("cannot write output file '" + path + "'");
        f << text;
        std::cerr << "wrote " << path << "\n";
    }
    if (o.print || path == "-") std::cout << text;
}

/// Output path resolution: --out wins, then the config key, then <command>.json.
void finalize(const Options& o, Config& cfg, const Record& rec, const std::string& command,
              std::optional<std::uint64_t> seed) {
    Options eff = o;
    if (eff.out_path.empty() && cfg.has("out")) eff.out_path = cfg.text("out");
    emit(eff, command + ".json", to_text(rec.finish(cfg.resolved(), seed)));
}

Config load_config(const Options& o) {
    if (o.config_path.empty()) throw UsageError("a configuration file is required");
    return Config::load(o.config_path);
}

double unit_scale(const Options& o) { return o.bits ? 1.0 / std::log(2.0) : 1.0; }

Json derived_json(const ChannelParams& c) {
    const DerivedParams d = derived_params(c);
    Json j;
    j["eps"] = d.eps;
    j["gamma_tilde"] = d.gamma_tilde;
    j["beta_tilde"] = d.beta_tilde;
    j["p_ave"] = d.p_ave;
    j["p_noise"] = d.p_noise;
    return j;
}

// ---------------------------------------------------------------- gfun

struct GfunArgs {
    double beta_min = 0.0, beta_max = 0.0, tol = 1e-6;
    int points = 1;
    std::string format = "json";
};

int cmd_gfun(const GfunArgs& a, const Options& o) {
    if (a.points < 1) throw UsageError("points must be >= 1");
    if (!(a.beta_min <= a.beta_max)) throw UsageError("beta_min must not exceed beta_max");
    if (!(a.tol > 0.0)) throw UsageError("tol must be positive");
    if (a.points == 1 && a.beta_min != a.beta_max) throw UsageError("a single point needs beta_min = beta_max");
    if (a.format != "json" && a.format != "csv") throw UsageError("format must be json or csv");

    Record rec("gfun");
    std::vector<double> betas, values;
    for (int i = 0; i < a.points; ++i) {
        const double b = a.points == 1 ? a.beta_min : a.beta_min + (a.beta_max - a.beta_min) * i / (a.points - 1);
        betas.push_back(b);
        values.push_back(g_function(b, a.tol));
    }
    if (a.beta_min == 0.0) rec.check("g_at_zero", std::abs(values[0] - 1.5) <= a.tol, std::abs(values[0] - 1.5));
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        // G is even, so order by |beta| before testing monotonicity
        const bool toward_zero = std::abs(betas[i]) < std::abs(betas[i - 1]);
        const double rise = toward_zero ? values[i - 1] - values[i] : values[i] - values[i - 1];
        worst_rise = std::max(worst_rise, rise);
    }
    if (a.beta_min >= 0.0 || a.beta_max <= 0.0)
        rec.check("monotone_in_abs_beta", worst_rise <= 2.0 * a.tol, worst_rise);

    Json table = Json::array();
    for (std::size_t i = 0; i < betas.size(); ++i) table.push_back(Json{{"beta_tilde", betas[i]}, {"g", values[i]}});
    rec.result("table", table);

    Config params;
    params.set("beta_min", Config::fmt(a.beta_min));
    params.set("beta_max", Config::fmt(a.beta_max));
    params.set("points", std::to_string(a.points));
    params.set("tol", Config::fmt(a.tol));
    params.set("format", a.format);

    if (a.format == "csv") {
        std::string csv = "beta_tilde,g\n";
        for (std::size_t i = 0; i < betas.size(); ++i) csv += Config::fmt(betas[i]) + "," + Config::fmt(values[i]) + "\n";
        emit(o, "gfun.csv", csv);
    } else {
        emit(o, "gfun.json", to_text(rec.finish(params.resolved(), std::nullopt)));
    }
    return rec.passed() ? ok : check_failed;
}

// ---------------------------------------------------------------- mi

int cmd_mi(const Options& o) {
    Config cfg = load_config(o);
    const ChannelParams c = channel_from(cfg);
    const double tol = cfg.real("tol", 1e-8);
    Record rec("mi");
    const double u = unit_scale(o);
    const MiResult r = mi_perturbative(c);
    const int m = c.grid.m_inner;
    rec.result("derived", derived_json(c));
    rec.result("units", o.bits ? std::string("bits") : std::string("nats"));
    rec.result("shannon_per_mode", r.shannon * u);
    rec.result("shannon_total", m * r.shannon * u);
    rec.result("error_budget", Json{{"order_gamma_tilde2", r.error_budget.order_gamma2 * u},
                                    {"order_eps", r.error_budget.order_eps * u}});
    rec.result("outside_validity", Json(r.outside_validity));
    if (c.beta == 0.0 && c.gamma != 0.0) {
        const double gt = r.params.gamma_tilde;
        const double exact = mi_zero_dispersion(r.params.eps, gt, m, tol) / m;
        rec.result("zero_dispersion_per_mode", exact * u);
        rec.result("zero_dispersion_total", exact * m * u);
        rec.result("correction_per_mode", (r.shannon - exact) * u);
        rec.result("correction_over_gamma_tilde2", (r.shannon - exact) / (gt * gt));
    }
    finalize(o, cfg, rec, "mi", std::nullopt);
    return ok;
}

// ---------------------------------------------------------------- verify

void wick_suite(const ChannelParams& c, const VerifyOptions& vo, Record& rec) {
    const int m = c.grid.m_inner;
    std::cerr << "wick suite, M = " << m << "\n";
    rec.check(verify_normalization(c, vo));
    rec.check(verify_order_gamma(c, vo));
    rec.check(verify_leading_singular(c, 1, vo));
    if (m <= 3) {
        rec.check(verify_leading_singular(c, 2, vo));
        rec.check(verify_singular_cancellation(c, vo));
    }
    // beta1 vanishes identically when the observation band equals the signal band
    const WickExpression b1 = build_beta1_expr(c);
    double worst = 0.0;
    for (const auto& [k, v] : b1.terms()) worst = std::max(worst, std::abs(v));
    const double ref = std::max(build_s1_expr(c).scale(), 1e-300);
    const double injected = vo.corrupt;
    rec.check("beta1_zero_expression", worst / ref + injected <= vo.threshold, worst / ref + injected);
}

void mc_suite(Config& cfg, const ChannelParams& c, const VerifyOptions& vo, Record& rec) {
    const long n = cfg.integer("n_samples", 100000);
    const std::uint64_t seed = cfg.seed();
    std::cerr << "mc suite, n = " << n << "\n";
    const MIEstimate e = mc_mutual_information(c, n, seed);
    rec.result("i0", e.i0);
    rec.result("i1", e.i1);
    rec.result("i2", e.i2);
    rec.result("i3", e.i3);
    rec.result("singular_pair", e.singular_pair);
    rec.result("total", e.total);
    // corrupted fixture: the oracle is moved by `corrupt` relative to its magnitude plus one standard error
    auto compare = [&](const std::string& name, const MCEstimate& est, double oracle) {
        const double target = oracle + vo.corrupt * (std::abs(oracle) + 10.0 * est.std_error);
        const double z = std::abs(est.mean - target) / std::max(est.std_error, 1e-300);
        VerificationReport r;
        r.name = name;
        r.passed = z <= 3.0;
        r.residual = z;
        r.scale = est.std_error;
        r.values = {{"estimate", est.mean}, {"stderr", est.std_error}, {"oracle", target}};
        r.detail = "residual is |estimate - oracle| in standard errors";
        rec.check(r);
    };
    if (c.grid.m_total == c.grid.m_inner) compare("i1_matches_wick", e.i1, exact_i1(c));
    if (c.grid.m_total > c.grid.m_inner && c.grid.m_total <= 6) compare("i3_matches_wick", e.i3, compute_i3(c));
    if (c.gamma == 0.0) compare("linear_channel_shannon", e.total, c.grid.m_inner * std::log1p(c.p / (c.q * c.l)));
}

int cmd_verify(const std::string& suite, double corrupt, const Options& o) {
    if (suite != "wick" && suite != "mc") throw UsageError("suite must be wick or mc");
    if (!(corrupt >= 0.0)) throw UsageError("corrupt must be non-negative");
    Config cfg = load_config(o);
    const ChannelParams c = channel_from(cfg);
    VerifyOptions vo;
    vo.corrupt = corrupt;
    vo.threshold = cfg.real("tol", 1e-12);
    Record rec("verify_" + suite);
    rec.result("derived", derived_json(c));
    std::optional<std::uint64_t> seed;
    if (suite == "wick") {
        wick_suite(c, vo, rec);
    } else {
        seed = cfg.seed();
        mc_suite(cfg, c, vo, rec);
    }
    finalize(o, cfg, rec, "verify_" + suite, seed);
    return rec.passed() ? ok : check_failed;
}

// ---------------------------------------------------------------- simulate, pdfcheck

SimConfig sim_config(Config& cfg) {
    SimConfig s;
    s.n_steps = static_cast<int>(cfg.integer("n_steps", 256));
    s.pad_factor = static_cast<int>(cfg.integer("pad_factor", 2));
    const std::string scheme = cfg.text("scheme", "strang");
    if (scheme == "strang") s.scheme = SplitScheme::strang;
    else if (scheme == "lie") s.scheme = SplitScheme::lie;
    else throw UsageError("key 'scheme' must be strang or lie");
    s.seed = cfg.seed();
    return s;
}

int cmd_simulate(long runs, std::optional<std::uint64_t> seed, const Options& o) {
    Config cfg = load_config(o);
    if (runs > 0) cfg.set("runs", std::to_string(runs));
    if (seed) cfg.set("seed", std::to_string(*seed));
    const ChannelParams c = channel_from(cfg);
    const SimConfig s = sim_config(cfg);
    const long n = cfg.integer("runs");
    if (n < 2) throw UsageError("runs must be >= 2");
    Record rec("simulate");
    rec.result("derived", derived_json(c));
    const Spectrum x = sample_input(c, s.seed);
    std::cerr << "simulating " << n << " runs\n";
    const NoiseStatistics st = noise_statistics(x, c, s, n);
    Json modes = Json::array();
    for (const auto& m : st.modes)
        modes.push_back(Json{{"power", m.power}, {"power_stderr", m.power_se}, {"kurtosis", m.kurtosis}, {"kurtosis_stderr", m.kurtosis_se}});
    rec.result("noise_modes", modes);
    rec.result("max_power_sigma", st.max_power_sigma);
    rec.result("max_kurtosis_sigma", st.max_kurtosis_sigma);
    if (c.gamma == 0.0) {
        rec.check("noise_power_per_mode", st.max_power_sigma <= 3.0, st.max_power_sigma, "largest deviation from 1 in standard errors");
        rec.check("noise_kurtosis_gaussian", st.max_kurtosis_sigma <= 3.0, st.max_kurtosis_sigma, "largest deviation from 2 in standard errors");
    } else {
        const ActionResidual ar = action_residual(x, c, s);
        rec.result("action_residual", Json{{"residual", ar.residual}, {"s0", ar.s0}, {"s1", ar.s1}, {"s2", ar.s2}});
    }
    finalize(o, cfg, rec, "simulate", s.seed);
    return rec.passed() ? ok : check_failed;
}

int cmd_pdfcheck(const Options& o) {
    Config cfg = load_config(o);
    const ChannelParams c = channel_from(cfg);
    const SimConfig s = sim_config(cfg);
    const long n = cfg.integer("runs");
    if (c.grid.m_total != 1) throw UsageError("pdfcheck needs m = m_total = 1");
    if (n < 100000) throw UsageError("pdfcheck needs runs >= 100000");
    Record rec("pdfcheck");
    rec.result("derived", derived_json(c));
    std::cerr << "pdf check with " << n << " runs\n";
    const PdfCheckReport r = empirical_pdf_check(c, s, n);
    rec.result("l1_first_order", r.l1_first_order);
    rec.result("l1_leading", r.l1_leading);
    rec.result("sup_first_order", r.sup_first_order);
    rec.result("sup_leading", r.sup_leading);
    rec.result("budget", r.budget);
    rec.result("second_order_l1", r.second_order_l1);
    rec.result("kde_bias_l1", r.kde_bias_l1);
    rec.result("kde_noise_l1", r.kde_noise_l1);
    rec.result("bandwidth", r.bandwidth);
    rec.check("first_order_improves", r.improves, r.l1_first_order / r.l1_leading);
    rec.check("within_budget", r.within_budget, r.l1_first_order / r.budget);
    finalize(o, cfg, rec, "pdfcheck", s.seed);
    return rec.passed() ? ok : check_failed;
}

// ---------------------------------------------------------------- selftest

int cmd_selftest(const Options& o) {
    Record rec("selftest");
    std::cerr << "selftest\n";
    const double g0 = g_function(0.0);
    rec.check("g_at_zero", std::abs(g0 - 1.5) < 1e-9, std::abs(g0 - 1.5));
    const double g1 = g_function(1.0), gm1 = g_function(-1.0), g2 = g_function(2.0);
    rec.check("g_even_and_decreasing", std::abs(g1 - gm1) < 1e-9 && g2 <= g1 && g1 <= g0, std::abs(g1 - gm1));

    const double loss = zero_dispersion_loss(0.01);
    rec.check("zero_dispersion_small_gamma", std::abs(loss / (1e-4 / 3.0) - 1.0) < 0.01, std::abs(loss / (1e-4 / 3.0) - 1.0));

    {
        // 4-point identity against an explicit pairing sum
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        const int mt = 3;
        CovarianceModel cov(mt);
        std::vector<cplx> a(9);
        for (auto& v : a) v = {nd(rng), nd(rng)};
        for (int j = 0; j < mt; ++j)
            for (int k = 0; k < mt; ++k) {
                cplx s{};
                for (int l = 0; l < mt; ++l) s += a[static_cast<std::size_t>(j * mt + l)] * std::conj(a[static_cast<std::size_t>(k * mt + l)]);
                cov.set(Family::X, j, k, s);
            }
        WickExpression e;
        e.add(MonoKey::of({{FieldKind::X, 0}, {FieldKind::X, 1}, {FieldKind::Xbar, 2}, {FieldKind::Xbar, 0}}), 1.0);
        const cplx got = wick_expectation(e, cov);
        const cplx want = cov.get(Family::X, 0, 2) * cov.get(Family::X, 1, 0) + cov.get(Family::X, 0, 0) * cov.get(Family::X, 1, 2);
        rec.check("wick_four_point", std::abs(got - want) <= 1e-12 * std::abs(want), std::abs(got - want));
    }

    const auto grid2 = FrequencyGrid::make(2, 2, 1.0);
    const ChannelParams c2 = params_from_dimensionless(0.01, 0.05, 1.0, grid2, 32, Closure::periodic);
    rec.check(verify_normalization(c2));
    rec.check(verify_singular_cancellation(c2));

    {
        std::vector<double> vals;
        double worst = 0.0;
        for (std::uint64_t i = 0; i < 10; ++i) {
            const Spectrum y = sample_input(c2, 5, i);
            worst = std::max(worst, std::abs(beta1(y, c2)));
        }
        rec.check("beta1_zero_at_equal_bands", worst == 0.0, worst);
    }

    {
        ChannelParams lin = params_from_dimensionless(0.05, 0.0, 0.5, FrequencyGrid::make(2, 4, 1.0), 16);
        SimConfig s;
        s.n_steps = 16;
        s.seed = 3;
        const NoiseStatistics st = noise_statistics(sample_input(lin, 1), lin, s, 4000);
        rec.check("linear_channel_noise", st.max_power_sigma <= 4.0 && st.max_kurtosis_sigma <= 4.0,
                  std::max(st.max_power_sigma, st.max_kurtosis_sigma));
    }

    {
        const ChannelParams lin = params_from_dimensionless(0.1, 0.0, 0.0, grid2, 16);
        const MIEstimate e = mc_mutual_information(lin, 2048, 9);
        const double shannon = 2.0 * std::log1p(10.0);
        rec.check("mc_linear_shannon", std::abs(e.total.mean - shannon) <= 1e-12 * shannon, std::abs(e.total.mean - shannon));
    }

    Config none;
    emit(o, "selftest.json", to_text(rec.finish(none.resolved(), std::nullopt)));
    return rec.passed() ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbative mutual information of the nonlinear Schroedinger channel"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&o](CLI::App* s, bool with_config) {
        if (with_config) s->add_option("config", o.config_path, "key = value configuration file")->required();
        s->add_option("--out", o.out_path, "output path, '-' for stdout");
        s->add_flag("--print", o.print, "also write the record to stdout");
    };

    GfunArgs g;
    auto* gfun = app.add_subcommand("gfun", "tabulate the dispersion coefficient G");
    gfun->add_option("--beta-min", g.beta_min)->required();
    gfun->add_option("--beta-max", g.beta_max)->required();
    gfun->add_option("--points", g.points)->required();
    gfun->add_option("--tol", g.tol);
    gfun->add_option("--format", g.format, "json or csv");
    add_common(gfun, false);

    auto* mi = app.add_subcommand("mi", "Shannon value, error budget and the zero-dispersion result");
    mi->add_flag("--bits", o.bits, "report in bits instead of nats");
    add_common(mi, true);

    std::string suite;
    double corrupt = 0.0;
    auto* verify = app.add_subcommand("verify", "run the exact or Monte-Carlo verification suite");
    verify->add_option("--suite", suite, "wick or mc")->required();
    verify->add_option("--corrupt", corrupt, "inject a known defect of this relative size");
    add_common(verify, true);

    long runs = 0;
    std::uint64_t seed_value = 0;
    auto* simulate = app.add_subcommand("simulate", "split-step simulation with noise statistics");
    simulate->add_option("--runs", runs);
    auto* seed_opt = simulate->add_option("--seed", seed_value);
    add_common(simulate, true);

    auto* pdf = app.add_subcommand("pdfcheck", "compare a kernel density estimate with the expanded density");
    add_common(pdf, true);

    auto* self = app.add_subcommand("selftest", "quick invariants of every module");
    add_common(self, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    try {
        if (*gfun) return cmd_gfun(g, o);
        if (*mi) return cmd_mi(o);
        if (*verify) return cmd_verify(suite, corrupt, o);
        if (*simulate) return cmd_simulate(runs, seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt, o);
        if (*pdf) return cmd_pdfcheck(o);
        if (*self) return cmd_selftest(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return check_failed;
    }
    return usage;
}
