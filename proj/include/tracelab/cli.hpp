#pragma once

// Experiment driver behind the `tracelab` executable. Every subcommand takes
// flags, optionally read from a key=value config file with one [section] per
// subcommand (flags win), and writes CSV or JSON that echoes the full config.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracelab/alignment.hpp"
#include "tracelab/channel.hpp"
#include "tracelab/common.hpp"
#include "tracelab/genfun.hpp"
#include "tracelab/interpolation.hpp"
#include "tracelab/littlewood.hpp"
#include "tracelab/recon.hpp"

namespace tracelab::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "tracelab/v1";

/// Shortest round-trip decimal form of a double.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string fmt(const Index& v) { return v ? std::to_string(*v) : "NA"; }

/// Writes to a sibling temp file and renames it over the target, so readers
/// never see a partial file. "-" or an empty path means stdout.
inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
        out.flush();
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(splitmix64(std::hash<std::string>{}(path)) & 0xffffff);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw RuntimeError("cannot open '" + tmp.string() + "' for writing");
        f << content;
        f.flush();
        if (!f) throw RuntimeError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw RuntimeError("cannot move output into '" + path + "': " + ec.message());
    }
}

/// Option values of one subcommand in declaration order: given values, else defaults.
inline std::vector<std::pair<std::string, std::string>> config_pairs(const CLI::App& sub) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const CLI::Option* o : sub.get_options()) {
        const std::string name = o->get_single_name();
        // The output path is left out so that a document does not depend on where it was written.
        if (name == "help" || name == "h" || name == "out" || name.empty()) continue;
        std::string value;
        if (o->count() > 0) {
            const auto& res = o->results();
            for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
        } else {
            value = o->get_default_str();
        }
        out.emplace_back(name, value);
    }
    return out;
}

inline Json json_header(const CLI::App& sub) {
    Json j;
    j["schema"] = kSchema;
    j["version"] = kVersion;
    Json cfg;
    cfg["subcommand"] = sub.get_name();
    for (const auto& [k, v] : config_pairs(sub)) cfg[k] = v;
    j["config"] = cfg;
    return j;
}

inline std::string csv_header(const CLI::App& sub) {
    std::string s = "# tracelab " + std::string(kVersion) + " schema=" + kSchema + "\n";
    s += "# subcommand=" + sub.get_name() + "\n";
    for (const auto& [k, v] : config_pairs(sub)) s += "# " + k + "=" + v + "\n";
    return s;
}

inline void require_field(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw InvalidArgument("--" + field + ": " + what);
}

inline ChannelParams channel_from(double q, double qp) {
    require_field(std::isfinite(q) && q >= 0.0 && q < 1.0, "q", "must lie in [0,1)");
    require_field(std::isfinite(qp) && qp >= 0.0 && qp < 1.0, "qp", "must lie in [0,1)");
    return ChannelParams(q, qp);
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }


// ---------------------------------------------------------------------------
// Subcommand settings

struct Common {
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string out;
};

struct SimulateArgs {
    std::size_t n = 10;
    double q = 0.0, qp = 0.0, eps = 0.0;
    std::size_t pool = 100, shift_max = 0;
    std::string input;
};

struct AlignArgs {
    double q = 0.1, qp = 0.1, C = 4.0;
    std::size_t n = 2000, trials = 100, strings = 1, stride = 250;
};

struct IdentityArgs {
    double q = 0.1, qp = 0.1;
    std::size_t l = 0, n = 10, traces = 100000, shift_max = 0;
    std::vector<double> z0{0.5, 0.2};
    double zrest = 0.5;
};

struct ScanArgs {
    std::vector<double> a{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    std::size_t grid = 100000;
};

struct SurveyArgs {
    std::vector<std::size_t> n{64, 256, 1024};
    double mu = 0.2;
    std::size_t draws = 20, grid = 2048;
};

struct ReconArgs {
    std::size_t n = 64, pool = 10000, continuation_bits = 3;
    double q = 0.05, qp = 0.05, C = 4.0;
    std::string mode = "mean", pool_file, truth;
    bool skip_fine = false;
};

struct InterpArgs {
    std::vector<int> n_deg{1, 2, 4, 6, 8, 10};
    std::size_t l = 1, trials = 100;
    double c = 0.5, delta = 1e-9;
};

// ---------------------------------------------------------------------------
// Runners. Each returns the output document as a string.

inline std::string run_simulate(const CLI::App& sub, const SimulateArgs& a, const Common& c) {
    const ChannelParams ch = channel_from(a.q, a.qp);
    BitString x;
    if (!a.input.empty()) {
        try {
            x = BitString::parse(a.input);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(std::string("--input: ") + e.what());
        }
    } else {
        require_field(a.n >= 1, "n", "must be >= 1");
        Rng rng(derive_seed(c.seed, "message", 0));
        x = random_bits(a.n, rng);
    }
    require_field(a.shift_max < x.size(), "shift-max", "must be smaller than the string length");
    require_field(a.eps >= 0.0 && a.eps <= 1.0, "eps", "must lie in [0,1]");
    const auto shift = ShiftSpec::uniform(0, a.shift_max);
    const SamplePool pool = make_sample_pool(x, shift, ch, a.eps, {}, a.pool, derive_seed(c.seed, "pool", 0), c.workers);
    std::ostringstream os;
    write_pool(os, pool);
    std::string body = os.str();
    const auto nl = body.find('\n');
    std::string comments = csv_header(sub) + "# x=" + x.str() + "\n";
    return body.substr(0, nl + 1) + comments + body.substr(nl + 1);
}

inline std::string run_align(const CLI::App& sub, const AlignArgs& a, const Common& c) {
    const ChannelParams ch = channel_from(a.q, a.qp);
    require_field(a.n >= 2, "n", "must be >= 2");
    require_field(a.stride >= 1, "stride", "must be >= 1");
    const ParameterPack pk = practical_pack(a.n, a.C);
    const std::size_t k_lo = pk.coarse.ell + pk.window;
    require_field(a.n >= k_lo + pk.window, "n", "too short for the alignment window (need >= " +
                                                    std::to_string(k_lo + pk.window) + ")");
    std::vector<std::size_t> ks;
    for (std::size_t k = k_lo; k + pk.window <= a.n; k += a.stride) ks.push_back(k);

    struct Row {
        std::size_t string, trial;
        AlignmentRecord r;
    };
    std::vector<std::vector<Row>> per(a.strings * a.trials);
    for (std::size_t s = 0; s < a.strings; ++s) {
        Rng rx(derive_seed(c.seed, "message", s));
        const BitString x = random_bits(a.n, rx);
        const auto a2s = survey_anchors(x, ks, pk, ch, derive_seed(c.seed, "anchors", s));
        parallel_for(a.trials, c.workers, [&](std::size_t t) {
            Rng rng(derive_seed(c.seed, "trace", s * a.trials + t));
            const TraceRecord rec = apply_channel(x, ch, rng);
            for (const auto& r : survey_trace(x, rec, ks, a2s, pk)) per[s * a.trials + t].push_back({s, t, r});
        });
    }
    std::size_t finite = 0, spurious = 0, fine_true = 0;
    double d2_sum = 0.0;
    std::string rows = "string,trial,k,tau1,tau2,d_tau1,d_tau2,spurious_flag,fine_true\n";
    for (const auto& v : per)
        for (const auto& [s, t, r] : v) {
            finite += r.tau1.has_value();
            spurious += r.spurious;
            if (r.fine_true) {
                ++fine_true;
                d2_sum += static_cast<double>(r.d_tau2);
            }
            rows += std::to_string(s) + "," + std::to_string(t) + "," + std::to_string(r.k) + "," + fmt(r.tau1) + "," +
                    fmt(r.tau2) + "," + (r.tau1 ? std::to_string(r.d_tau1) : "NA") + "," +
                    (r.tau2 ? std::to_string(r.d_tau2) : "NA") + "," + (r.spurious ? "1" : "0") + "," +
                    (r.fine_true ? "1" : "0") + "\n";
        }
    std::string head = csv_header(sub);
    head += "# pack: ell_c=" + std::to_string(pk.coarse.ell) + " lambda_c=" + std::to_string(pk.coarse.lambda) +
            " ell_f=" + std::to_string(pk.fine.ell) + " lambda_f=" + std::to_string(pk.fine.lambda) +
            " window=" + std::to_string(pk.window) + "\n";
    head += "# tau1_finite=" + std::to_string(finite) + " spurious=" + std::to_string(spurious) +
            " fine_true=" + std::to_string(fine_true) +
            " mean_d_tau2_true=" + (fine_true ? fmt(d2_sum / static_cast<double>(fine_true)) : "NA") + "\n";
    return head + rows;
}

inline std::string run_identity(const CLI::App& sub, const IdentityArgs& a, const Common& c) {
    const ChannelParams ch = channel_from(a.q, a.qp);
    require_field(a.z0.size() == 2, "z0", "expects two values: real,imag");
    require_field(a.n >= 1, "n", "must be >= 1");
    require_field(a.l <= 10, "l", "must be <= 10");
    require_field(a.traces >= 2, "traces", "must be >= 2");
    require_field(a.shift_max < a.n, "shift-max", "must be smaller than n");
    const Complex z0(a.z0[0], a.z0[1]);
    require_field(std::abs(z0) < 1.0, "z0", "must lie inside the unit disk");
    Rng rx(derive_seed(c.seed, "message", 0));
    const BitString x = random_bits(a.n, rx);
    const auto shift = ShiftSpec::uniform(0, a.shift_max);
    const auto point = EvalPoint::equal_mode(z0, Complex(a.zrest, 0.0), a.l);
    const SamplePool pool = make_sample_pool(x, shift, ch, 0.0, {}, a.traces, derive_seed(c.seed, "pool", 0), c.workers);
    const GEstimate lhs = estimate_g_simple(pool, point, ch, shift);
    const Complex rhs = expected_simple_estimate(x, point, shift);
    Json j = json_header(sub);
    j["x"] = x.str();
    j["lhs_mean"] = complex_json(lhs.value);
    j["lhs_stderr"] = lhs.stderr_;
    j["rhs_exact"] = complex_json(rhs);
    Json zp;
    zp["z0"] = complex_json(z0);
    Json zs = Json::array();
    for (auto z : point.z) zs.push_back(complex_json(z));
    zp["zs"] = zs;
    j["z_point"] = zp;
    j["n_traces"] = a.traces;
    j["deviation_in_stderr"] = std::abs(lhs.value - rhs) / lhs.stderr_;
    j["pass"] = std::abs(lhs.value - rhs) <= 4.0 * lhs.stderr_;
    return j.dump(2) + "\n";
}

inline std::string run_littlewood_scan(const CLI::App& sub, const ScanArgs& a, const Common&) {
    require_field(a.grid >= 1000, "grid", "must be >= 1000");
    std::string rows = "a,max_unit_circle,fitted_c5,fitted_C6,r,r_star,split,lambda_a,lambda_tilde,status\n";
    for (double av : a.a) {
        require_field(av > 0.0 && av < 1.0, "a", "values must lie in (0,1)");
        try {
            const HPolynomial hp = build_h(av);
            const CircleScan cs = scan_unit_circle(hp, a.grid);
            rows += fmt(av) + "," + fmt(cs.max_abs) + "," + fmt(cs.fitted_c5) + "," + fmt(cs.fitted_C6) + "," +
                    std::to_string(hp.r) + "," + std::to_string(hp.r_star) + "," + fmt(hp.split) + "," +
                    fmt(hp.lambda_a) + "," + fmt(hp.lambda_tilde) + ",ok\n";
        } catch (const InvalidArgument&) {
            rows += fmt(av) + ",NA,NA,NA,NA,NA,NA,NA,NA,no_r_star\n";
        }
    }
    return csv_header(sub) + rows;
}

inline std::string run_arc_survey(const CLI::App& sub, const SurveyArgs& a, const Common& c) {
    require_field(a.mu > 0.0 && a.mu < 1.0, "mu", "must lie in (0,1)");
    require_field(a.grid >= 1, "grid", "must be >= 1");
    for (auto n : a.n) require_field(n >= 2, "n", "values must be >= 2");
    std::vector<std::string> lines(a.n.size() * a.draws);
    parallel_for(lines.size(), c.workers, [&](std::size_t idx) {
        const std::size_t n = a.n[idx / a.draws];
        Rng rng(derive_seed(c.seed, "arc-survey", idx));
        const LittlewoodPoly p = LittlewoodPoly::random(n, a.mu, rng);
        const double rho = clamped_rho(n);
        const double tmax = std::pow(static_cast<double>(n), -2.0 * a.mu);
        const ArcMax m = arc_max(p, rho, tmax, a.grid);
        const double la = std::log(m.value);
        const double ln = std::log(static_cast<double>(n));
        const double scale = std::pow(static_cast<double>(n), 0.2) * std::pow(ln, 5.0);
        lines[idx] = std::to_string(n) + "," + fmt(a.mu) + "," + fmt(m.value) + "," + fmt(la) + "," + fmt(-la / scale) +
                     "," + fmt(rho) + "," + fmt(tmax) + "\n";
    });
    std::string out = csv_header(sub) + "# fitted_C = -log(arc_max) / (n^(1/5) log^5 n)\n" +
                      "n,mu,arc_max,log_arc_max,fitted_C,rho,theta_max\n";
    for (const auto& s : lines) out += s;
    return out;
}

inline std::string run_reconstruct(const CLI::App& sub, const ReconArgs& a, const Common& c) {
    ChannelParams ch = channel_from(a.q, a.qp);
    AverageCaseConfig cfg;
    try {
        cfg.mode = parse_mode(a.mode);
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("--mode: ") + e.what());
    }
    require_field(a.n >= 1, "n", "must be >= 1");
    cfg.pack = practical_pack(std::max<std::size_t>(a.n, 2), a.C);
    cfg.continuation_bits = a.continuation_bits;
    cfg.skip_fine = a.skip_fine;
    cfg.seed = derive_seed(c.seed, "reconstruct", 0);
    cfg.workers = c.workers;

    BitString truth;
    std::vector<BitString> traces;
    std::size_t n = a.n;
    if (!a.pool_file.empty()) {
        std::ifstream f(a.pool_file);
        if (!f) throw InvalidArgument("--pool-file: cannot open '" + a.pool_file + "'");
        const SamplePool pool = read_pool(f);
        traces = pool.samples;
        // The pool header records its channel; explicit flags still take precedence.
        if (sub.count("--q") == 0 && sub.count("--qp") == 0) ch = pool.params;
        if (!a.truth.empty()) truth = BitString::parse(a.truth);
        if (!truth.empty()) require_field(truth.size() == n, "truth", "length must equal --n");
    } else {
        require_field(a.pool >= 2, "pool", "must be >= 2");
        Rng rx(derive_seed(c.seed, "message", 0));
        truth = random_bits(n, rx);
        traces = make_sample_pool(truth, ShiftSpec{}, ch, 0.0, {}, a.pool, derive_seed(c.seed, "pool", 0), c.workers)
                     .samples;
    }
    const AverageCaseResult res = average_case_reconstruct(traces, n, cfg, ch);

    Json j = json_header(sub);
    j["recovered"] = res.recovered.str();
    std::size_t correct = 0;
    if (!truth.empty()) {
        for (std::size_t i = 0; i < n; ++i) correct += res.recovered[i] == truth[i];
        j["truth"] = truth.str();
        j["bit_accuracy"] = static_cast<double>(correct) / static_cast<double>(n);
    } else {
        j["truth"] = nullptr;
        j["bit_accuracy"] = nullptr;
    }
    j["inconclusive_count"] = res.flagged;
    j["channel"] = {{"q", ch.q}, {"qp", ch.qp}};
    Json log = Json::array();
    for (const auto& e : res.log) {
        Json b;
        b["index"] = e.index;
        b["bit"] = e.bit;
        if (!truth.empty()) b["truth"] = static_cast<int>(truth[e.index]);
        b["flagged"] = e.flagged;
        b["bootstrap"] = e.bootstrap;
        b["pool"] = e.pool;
        b["a2"] = e.a2;
        b["note"] = e.note;
        log.push_back(b);
    }
    j["per_bit_log"] = log;
    return j.dump(2) + "\n";
}

/// Random polynomials sum_m c_m prod_d (z_d - center)^{m_d} with |c_m| <= 1 and
/// per-variable degree <= 2 n_deg, queried with uniform noise in [-delta, delta].
inline std::string run_interp_check(const CLI::App& sub, const InterpArgs& a, const Common& c) {
    require_field(a.l >= 1 && a.l <= 3, "l", "must lie in [1,3]");
    require_field(a.delta >= 0.0, "delta", "must be non-negative");
    require_field(a.c > 0.0, "c", "must be positive");
    for (int nd : a.n_deg) require_field(nd >= 1 && nd <= 40, "n-deg", "values must lie in [1,40]");
    std::string rows = "n_deg,trial,multi_index,true_coef,recovered,abs_error,error_bound,power_bound,within\n";
    std::size_t within = 0, total = 0;
    for (std::size_t u = 0; u < a.n_deg.size(); ++u) {
        const int nd = a.n_deg[u];
        const GridSpec grid{a.c, nd, 0.0};
        const std::size_t D = static_cast<std::size_t>(2 * nd + 1);
        std::vector<std::size_t> stride(a.l, 1);
        for (std::size_t d = 1; d < a.l; ++d) stride[d] = stride[d - 1] * D;
        const std::size_t terms = stride.back() * D;
        for (std::size_t t = 0; t < a.trials; ++t) {
            Rng rng(derive_seed(c.seed, "interp", u * a.trials + t));
            std::vector<double> coef(terms);
            for (auto& v : coef) v = 2.0 * uniform_open0(rng) - 1.0;
            std::vector<int> mi(a.l);
            std::size_t flat = 0;
            for (std::size_t d = a.l; d-- > 0;) {
                mi[d] = static_cast<int>(rng() % D);
                flat = flat * D + static_cast<std::size_t>(mi[d]);
            }
            Rng noise(derive_seed(c.seed, "interp-noise", u * a.trials + t));
            std::function<double(std::span<const double>)> oracle = [&](std::span<const double> z) {
                // Nested Horner; variable d has stride D^d in the flattened table.
                std::function<double(std::size_t, std::size_t)> eval = [&](std::size_t d, std::size_t base) {
                    double acc = 0.0;
                    for (std::size_t k = D; k-- > 0;)
                        acc = acc * (z[d] - grid.center) +
                              (d == 0 ? coef[base + k] : eval(d - 1, base + k * stride[d]));
                    return acc;
                };
                return eval(a.l - 1, 0) + a.delta * (2.0 * uniform_open0(noise) - 1.0);
            };
            const auto ex = extract_coefficient<double>(oracle, grid, mi, a.delta);
            const double err = std::abs(ex.value - coef[flat]);
            const bool ok = err <= ex.power_bound + 1e-12 * (1.0 + std::abs(coef[flat]));
            within += ok;
            ++total;
            std::string mis;
            for (std::size_t d = 0; d < a.l; ++d) mis += (d ? ":" : "") + std::to_string(mi[d]);
            rows += std::to_string(nd) + "," + std::to_string(t) + "," + mis + "," + fmt(coef[flat]) + "," +
                    fmt(ex.value) + "," + fmt(err) + "," + fmt(ex.error_bound) + "," + fmt(ex.power_bound) + "," +
                    (ok ? "1" : "0") + "\n";
        }
    }
    return csv_header(sub) + "# within_power_bound=" + std::to_string(within) + "/" + std::to_string(total) + "\n" +
           rows;
}

// ---------------------------------------------------------------------------

/// Parses argv, dispatches, and maps failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"tracelab: trace reconstruction experiments", "tracelab"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "key=value config file; [subcommand] sections, flags override");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    Common common;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--seed", common.seed, "master seed");
        s->add_option("--workers", common.workers, "worker threads (does not change results)")
            ->check(CLI::Range(1u, 1024u));
        s->add_option("--out", common.out, "output path; '-' or empty for stdout");
    };

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "write a pool file of traces of a random or given string");
    s_sim->add_option("--n", sim.n, "string length");
    s_sim->add_option("--q", sim.q, "deletion probability");
    s_sim->add_option("--qp", sim.qp, "insertion probability");
    s_sim->add_option("--pool", sim.pool, "number of samples");
    s_sim->add_option("--eps", sim.eps, "false-sample rate");
    s_sim->add_option("--shift-max", sim.shift_max, "shift uniform on {0..shift-max}");
    s_sim->add_option("--input", sim.input, "message bits (overrides --n)");
    add_common(s_sim);

    AlignArgs al;
    auto* s_al = app.add_subcommand("align", "coarse and fine alignment statistics on simulated traces");
    s_al->add_option("--q", al.q, "deletion probability");
    s_al->add_option("--qp", al.qp, "insertion probability");
    s_al->add_option("--n", al.n, "string length");
    s_al->add_option("--C", al.C, "parameter-pack constant");
    s_al->add_option("--trials", al.trials, "traces per string");
    s_al->add_option("--strings", al.strings, "random strings");
    s_al->add_option("--stride", al.stride, "spacing of the reported anchors k");
    add_common(s_al);

    IdentityArgs id;
    auto* s_id = app.add_subcommand("verify-identity", "Monte Carlo trace statistic against the exact message side");
    s_id->add_option("--q", id.q, "deletion probability");
    s_id->add_option("--qp", id.qp, "insertion probability");
    s_id->add_option("--l", id.l, "number of trailing variables");
    s_id->add_option("--n", id.n, "string length");
    s_id->add_option("--traces", id.traces, "pool size");
    s_id->add_option("--shift-max", id.shift_max, "shift uniform on {0..shift-max}");
    s_id->add_option("--z0", id.z0, "z0 as real,imag")->delimiter(',')->expected(2);
    s_id->add_option("--zrest", id.zrest, "common value of z_1..z_l");
    add_common(s_id);

    ScanArgs sc;
    auto* s_sc = app.add_subcommand("littlewood-scan", "build h for each a and scan it on the unit circle");
    s_sc->add_option("--a", sc.a, "values of a")->delimiter(',');
    s_sc->add_option("--grid", sc.grid, "unit-circle grid points");
    add_common(s_sc);

    SurveyArgs sv;
    auto* s_sv = app.add_subcommand("arc-survey", "arc maxima of random Littlewood-type polynomials");
    s_sv->add_option("--n", sv.n, "degrees")->delimiter(',');
    s_sv->add_option("--mu", sv.mu, "tail exponent");
    s_sv->add_option("--draws", sv.draws, "draws per degree");
    s_sv->add_option("--grid", sv.grid, "arc grid points");
    add_common(s_sv);

    ReconArgs rc;
    auto* s_rc = app.add_subcommand("reconstruct", "average-case reconstruction from traces");
    s_rc->add_option("--n", rc.n, "string length");
    s_rc->add_option("--q", rc.q, "deletion probability");
    s_rc->add_option("--qp", rc.qp, "insertion probability");
    s_rc->add_option("--pool", rc.pool, "number of simulated traces");
    s_rc->add_option("--pool-file", rc.pool_file, "read traces from a pool file instead of simulating");
    s_rc->add_option("--truth", rc.truth, "true string for a pool file, to score accuracy");
    s_rc->add_option("--mode", rc.mode, "sparse|dense|mean");
    s_rc->add_option("--C", rc.C, "parameter-pack constant");
    s_rc->add_option("--continuation-bits", rc.continuation_bits, "free bits after the target");
    s_rc->add_flag("--skip-fine", rc.skip_fine, "ablation: skip fine alignment");
    add_common(s_rc);

    InterpArgs ip;
    auto* s_ip = app.add_subcommand("interp-check", "coefficient extraction error against its bound");
    s_ip->add_option("--n-deg", ip.n_deg, "grid degree bounds")->delimiter(',');
    s_ip->add_option("--l", ip.l, "number of variables");
    s_ip->add_option("--trials", ip.trials, "random polynomials per degree bound");
    s_ip->add_option("--c", ip.c, "grid half-width");
    s_ip->add_option("--delta", ip.delta, "oracle noise amplitude");
    add_common(s_ip);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        std::string doc;
        if (name == "simulate") doc = run_simulate(*sub, sim, common);
        else if (name == "align") doc = run_align(*sub, al, common);
        else if (name == "verify-identity") doc = run_identity(*sub, id, common);
        else if (name == "littlewood-scan") doc = run_littlewood_scan(*sub, sc, common);
        else if (name == "arc-survey") doc = run_arc_survey(*sub, sv, common);
        else if (name == "reconstruct") doc = run_reconstruct(*sub, rc, common);
        else doc = run_interp_check(*sub, ip, common);
        write_output(common.out, doc, out);
    } catch (const InvalidArgument& e) {
        err << "error: invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"tracelab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tracelab::cli
