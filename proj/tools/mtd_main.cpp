// mtd: command-line toolkit around the library: model generation, synthesis,
// streaming autocorrelation, the closed-form and least-squares solvers, 2-D
// phase retrieval, and the evaluation harnesses.
//
// Artifacts are JSON (with .f64 payloads for bulk numeric data) and carry a
// format tag + version. Long-running commands drop a <out>.run.json manifest
// recording parameters and input/output fingerprints; manifests contain no
// timestamps, so identical runs produce identical bytes.
//
// Exit codes: 0 ok, 2 command-line errors, 3 artifact errors, 4 validation
// errors, 5 solver failures, 6 unimplemented combinations, 1 anything else.

#include "CLI11.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/mtd.hpp"
#include "png_writer.hpp"

using namespace mtd;

namespace {

struct cli_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Counts accept scientific notation ("1e7") as long as the value is integral.
std::int64_t parse_count(const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || !(v >= 0.0) || v > 9.0e18 || std::floor(v) != v)
        throw cli_error("'" + s + "' is not a nonnegative integer count");
    return static_cast<std::int64_t>(v);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw cli_error("empty list: '" + s + "'");
    return out;
}

std::vector<std::int64_t> parse_counts(const std::string& s) {
    std::vector<std::int64_t> out;
    for (const auto& item : split_commas(s)) out.push_back(parse_count(item));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_commas(s))
        out.push_back(static_cast<std::uint64_t>(parse_count(item)));
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (std::int64_t v : parse_counts(s)) {
        if (v > (1 << 30)) throw cli_error("value out of range in list");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_commas(s)) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size()) throw cli_error("'" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

void write_run_manifest(const std::string& primary_out, const std::string& tool,
                        const json& params, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    json j{{"format", "mtd.run"}, {"format_version", 1}, {"tool", tool},
           {"params", params}};
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = fnv1a64_file(p);
    for (const auto& p : outputs) out[p] = fnv1a64_file(p);
    j["inputs"] = in;
    j["outputs"] = out;
    write_text_file(primary_out + ".run.json", dump_json(j));
}

// ------------------------------------------------------------------ synth --

// Options shared by every command that walks a synthetic observation.
struct stream_opts {
    std::string model_path;
    std::string placement = "separated";  // separated | poisson | grid2d
    std::string n = "1e6";                // 1-D observation length
    std::string occurrences = "auto";     // separated placements only
    std::string segment_len = "1e7";
    std::string n_obs = "1";              // 2-D observation count
    int height = 0, width = 0;
    double mean_occ = 4.0;
    std::uint64_t seed = 1;

    void add_options(CLI::App* c, bool model_required) {
        auto* m = c->add_option("--model", model_path, "mixture model JSON");
        if (model_required) m->required();
        c->add_option("--placement", placement,
                      "separated, poisson, or grid2d (2-D models)");
        c->add_option("-N,--samples", n, "1-D observation length (counts allow 1e7)");
        c->add_option("--occurrences", occurrences,
                      "occurrence count for separated placements; 'auto' derives "
                      "it from the model densities");
        c->add_option("--segment-len", segment_len, "streaming segment length");
        c->add_option("--obs", n_obs, "2-D: number of observations");
        c->add_option("--height", height, "2-D: observation height");
        c->add_option("--width", width, "2-D: observation width");
        c->add_option("--mean-occ", mean_occ, "2-D: mean occurrences per observation");
        c->add_option("--seed", seed, "synthesis seed");
    }

    json params() const {
        return json{{"model", model_path},   {"placement", placement},
                    {"n", n},                {"occurrences", occurrences},
                    {"segment_len", segment_len}, {"obs", n_obs},
                    {"height", height},      {"width", width},
                    {"mean_occ", mean_occ},  {"seed", seed}};
    }
};

observation_stream make_stream(const stream_opts& o, mixture_model& model_out) {
    mixture_model m = load_model(o.model_path);
    model_out = m;
    if (o.placement == "grid2d" || m.dim() == 2) {
        if (m.dim() != 2) throw validation_error("grid2d placement needs a 2-D model");
        if (o.placement != "grid2d")
            throw validation_error("2-D models synthesize with --placement grid2d");
        if (o.height <= 0 || o.width <= 0)
            throw validation_error("--height and --width are required for 2-D synthesis");
        return observation_stream::grid_2d(m, o.height, o.width, parse_count(o.n_obs),
                                           o.mean_occ, o.seed);
    }
    placement_kind kind = placement_from_string(o.placement);
    std::int64_t n = parse_count(o.n);
    std::int64_t sl = parse_count(o.segment_len);
    if (kind == placement_kind::poisson)
        return observation_stream::poisson(m, n, o.seed, sl);
    std::int64_t occ =
        o.occurrences == "auto"
            ? std::llround(m.total_density() * static_cast<double>(n) / m.len())
            : parse_count(o.occurrences);
    return observation_stream::well_separated(m, n, occ, o.seed, sl);
}

void run_synth(const stream_opts& so, const std::string& out, const std::string& png) {
    mixture_model m;
    observation_stream ys = make_stream(so, m);
    std::ofstream f(out, std::ios::binary);
    if (!f) throw artifact_error("cannot open for writing: " + out);
    std::vector<double> buf;
    for (std::int64_t j = 0; j < ys.segment_count(); ++j) {
        ys.render_segment(j, buf);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(double)));
        if (!f) throw artifact_error("write failed: " + out);
        if (j == 0 && !png.empty()) {
            if (ys.dim() != 2)
                throw validation_error("--png previews are for 2-D observations");
            write_png_gray(png, buf, ys.h(), ys.w());
        }
    }
    f.close();
    json side{{"format", "mtd.observation"},
              {"format_version", 1},
              {"dim", ys.dim()},
              {"n", ys.n()},
              {"placement", ys.dim() == 2 ? "grid2d" : to_string(ys.kind())},
              {"seed", ys.seed()},
              {"segment_len", ys.segment_len()},
              {"signal_len", m.len()},
              {"noise_sigma", m.noise_sigma},
              {"occurrences", static_cast<std::int64_t>(ys.manifest().size())}};
    if (ys.dim() == 2) {
        side["h"] = ys.h();
        side["w"] = ys.w();
        side["n_obs"] = ys.n_obs();
    }
    write_text_file(out + ".json", dump_json(side));
    std::vector<std::string> outputs{out, out + ".json"};
    if (!png.empty()) outputs.push_back(png);
    write_run_manifest(out, "synth", so.params(), {so.model_path}, outputs);
    std::cout << "synth: " << ys.n() << " samples, "
              << ys.manifest().size() << " occurrences -> " << out << "\n";
}

// --------------------------------------------------------------------- ac --

struct ac_opts {
    std::string in;        // observation payload; empty = synthesize on the fly
    std::string out;
    int order = 0;         // 0 = 3 for 1-D, 2 for 2-D
    int len = 0;           // 0 = the model / sidecar signal length
    std::string junction = "exact";
    int threads = 1;
};

void run_ac(const ac_opts& ao, const stream_opts& so) {
    junction_policy pol = junction_from_string(ao.junction);
    autocorr_set ac;
    std::vector<std::string> inputs;
    if (ao.in.empty()) {
        if (so.model_path.empty())
            throw cli_error("ac needs either --in or --model");
        mixture_model m;
        observation_stream ys = make_stream(so, m);
        int ord = ao.order > 0 ? ao.order : (ys.dim() == 2 ? 2 : 3);
        if (ao.len > 0 && ao.len != m.len())
            throw validation_error("--len must match the model signal length here");
        ac = accumulate_stream(ys, ord, pol, ao.threads);
        inputs.push_back(so.model_path);
    } else {
        json side = parse_json_file(ao.in + ".json");
        expect_format(side, "mtd.observation", ao.in + ".json");
        int dim = side.at("dim").get<int>();
        int l = ao.len > 0 ? ao.len : side.at("signal_len").get<int>();
        int ord = ao.order > 0 ? ao.order : (dim == 2 ? 2 : 3);
        std::ifstream f(ao.in, std::ios::binary);
        if (!f) throw artifact_error("cannot open: " + ao.in);
        auto read_chunk = [&](std::vector<double>& buf, std::int64_t count) {
            buf.resize(static_cast<std::size_t>(count));
            f.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(count * sizeof(double)));
            if (f.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
                throw artifact_error(ao.in + ": truncated observation payload");
        };
        std::vector<double> buf;
        if (dim == 1) {
            std::int64_t n = side.at("n").get<std::int64_t>();
            std::int64_t sl = side.at("segment_len").get<std::int64_t>();
            // Chunk exactly like the synthesis segmentation (short remainder
            // merges into the final chunk) so this path reproduces the
            // streamed accumulation bit for bit.
            std::int64_t nseg = n / sl;
            std::int64_t rem = n % sl;
            if (nseg == 0 || rem >= l) nseg += 1;
            accumulator acc(l, ord, pol);
            for (std::int64_t j = 0; j < nseg; ++j) {
                std::int64_t cnt = j == nseg - 1 ? n - j * sl : sl;
                read_chunk(buf, cnt);
                acc.accumulate_segment(buf);
            }
            ac = acc.finalize();
        } else {
            int h = side.at("h").get<int>(), w = side.at("w").get<int>();
            std::int64_t n_obs = side.at("n_obs").get<std::int64_t>();
            accumulator2d acc(l, ord);
            for (std::int64_t ob = 0; ob < n_obs; ++ob) {
                read_chunk(buf, static_cast<std::int64_t>(h) * w);
                acc.accumulate_observation(buf.data(), h, w);
            }
            ac = acc.finalize();
        }
        inputs.push_back(ao.in);
        inputs.push_back(ao.in + ".json");
    }
    save_autocorr(ac, ao.out);
    json params{{"in", ao.in},     {"order", ac.order}, {"len", ac.len},
                {"junction", ao.junction}, {"threads", ao.threads}};
    if (ao.in.empty()) params["stream"] = so.params();
    write_run_manifest(ao.out, "ac", params, inputs,
                       {ao.out, payload_path_for(ao.out)});
    std::cout << "ac: order " << ac.order << ", L=" << ac.len << ", "
              << ac.n_samples << " samples -> " << ao.out << "\n";
}

// ------------------------------------------------------------ solve-homo --

void run_solve_homo(const std::string& ac_path, const std::string& placement,
                    std::optional<double> sigma2, const std::string& out) {
    autocorr_set ac = load_autocorr(ac_path);
    homo_result res = solve_homo(ac, placement_from_string(placement), sigma2);
    write_text_file(out, dump_json(json(res)));
    json params{{"ac", ac_path}, {"placement", placement}};
    params["sigma2"] = sigma2 ? json(*sigma2) : json(nullptr);
    write_run_manifest(out, "solve-homo", params, {ac_path, payload_path_for(ac_path)},
                       {out});
    std::cout << std::setprecision(12) << "solve-homo: gamma=" << res.gamma
              << " sigma2=" << res.sigma2 << " L_eff=" << res.x.len << " ("
              << res.method << ") -> " << out << "\n";
}

// ---------------------------------------------------------- solve-hetero --

struct hetero_cli {
    std::string ac_path, out, truth_path, gammas, placement = "separated";
    int k = 1;
    std::optional<double> sigma2;
    int starts = 10;
    std::uint64_t seed = 1;
    int stage1_window = 0;
    int max_iter = 5000;
    double gtol = 1e-10;
    int max_shift = 0;
    int threads = 1;
};

void run_solve_hetero(const hetero_cli& hc) {
    autocorr_set ac = load_autocorr(hc.ac_path);
    hetero_options opt;
    opt.starts = hc.starts;
    opt.seed = hc.seed;
    opt.sigma2 = hc.sigma2;
    opt.kind = placement_from_string(hc.placement);
    opt.stage1_window = hc.stage1_window;
    opt.threads = hc.threads;
    opt.tr.max_iter = hc.max_iter;
    opt.tr.gtol = hc.gtol;
    if (!hc.gammas.empty()) opt.fixed_gammas = parse_double_list(hc.gammas);
    solve_report rep = solve_hetero(ac, hc.k, opt);
    std::vector<std::string> inputs{hc.ac_path, payload_path_for(hc.ac_path)};
    double worst_aligned = -1.0;
    if (!hc.truth_path.empty()) {
        mixture_model truth = load_model(hc.truth_path);
        alignment_result al =
            aligned_error(rep.estimates.signals, truth.signals, hc.max_shift);
        rep.aligned_errors = al.per_signal;
        worst_aligned = al.max_rel_error;
        inputs.push_back(hc.truth_path);
    }
    write_text_file(hc.out, dump_json(json(rep)));
    json params{{"ac", hc.ac_path},   {"k", hc.k},
                {"placement", hc.placement}, {"starts", hc.starts},
                {"seed", hc.seed},    {"stage1_window", hc.stage1_window},
                {"max_iter", hc.max_iter}, {"gtol", hc.gtol},
                {"gammas", hc.gammas}, {"truth", hc.truth_path},
                {"max_shift", hc.max_shift}};
    params["sigma2"] = hc.sigma2 ? json(*hc.sigma2) : json(nullptr);
    write_run_manifest(hc.out, "solve-hetero", params, inputs, {hc.out});
    std::cout << std::setprecision(12);
    std::cout << "solve-hetero: best cost " << rep.best_cost << " (start "
              << rep.best_start << "/" << hc.starts << ")";
    std::cout << ", gamma =";
    for (double g : rep.estimates.densities) std::cout << ' ' << g;
    if (worst_aligned >= 0.0) std::cout << ", aligned error " << worst_aligned;
    std::cout << " -> " << hc.out << "\n";
}

// -------------------------------------------------------------- solve-2d --

struct solve2d_cli {
    std::string ac_path, model_path, out, truth_path, png;
    double gamma = 0.0;
    double sigma2 = 0.0;
    std::string iters = "1e5";
    double beta = 0.5;
    int restart_window = 1000;
    double target_residual = 1e-12;
    std::uint64_t seed = 0;
};

void run_solve_2d(const solve2d_cli& sc) {
    std::vector<double> grid;
    int w = 0;
    std::vector<std::string> inputs;
    if (!sc.model_path.empty()) {
        mixture_model m = load_model(sc.model_path);
        if (m.dim() != 2 || m.k() != 1)
            throw validation_error("exact 2-D retrieval expects a single 2-D signal");
        grid = signal_ac_2d(m.signals[0]);
        w = m.len();
        inputs.push_back(sc.model_path);
    } else if (!sc.ac_path.empty()) {
        autocorr_set ac = load_autocorr(sc.ac_path);
        if (sc.gamma <= 0.0)
            throw validation_error("--gamma is required with observed autocorrelations");
        grid = extract_image_ac2(ac, sc.gamma, sc.sigma2);
        w = ac.len;
        inputs.push_back(sc.ac_path);
        inputs.push_back(payload_path_for(sc.ac_path));
    } else {
        throw cli_error("solve-2d needs either --ac or --model");
    }
    phase_problem prob = make_phase_problem(grid, w);
    rrr_options opt;
    opt.beta = sc.beta;
    opt.max_iter = static_cast<int>(parse_count(sc.iters));
    opt.restart_window = sc.restart_window;
    opt.target_residual = sc.target_residual;
    opt.seed = sc.seed;
    rrr_result res = rrr_phase_retrieval(prob, opt);
    json j{{"format", "mtd.solve2d"}, {"format_version", 1},
           {"estimate", res.x},       {"residual", res.residual},
           {"iterations", res.iterations}, {"restarts", res.restarts}};
    double aligned = -1.0;
    if (!sc.truth_path.empty()) {
        mixture_model truth = load_model(sc.truth_path);
        if (truth.dim() != 2 || truth.k() != 1)
            throw validation_error("--truth must hold a single 2-D signal");
        align2d_result al = align_2d(res.x, truth.signals[0]);
        j["aligned_error"] = al.rel_error;
        j["sign"] = al.sign;
        j["reflected"] = al.reflected;
        aligned = al.rel_error;
        inputs.push_back(sc.truth_path);
    }
    write_text_file(sc.out, dump_json(j));
    std::vector<std::string> outputs{sc.out};
    if (!sc.png.empty()) {
        write_png_gray(sc.png, res.x.values, w, w);
        outputs.push_back(sc.png);
    }
    json params{{"ac", sc.ac_path},       {"model", sc.model_path},
                {"gamma", sc.gamma},      {"sigma2", sc.sigma2},
                {"iters", sc.iters},      {"beta", sc.beta},
                {"restart_window", sc.restart_window},
                {"target_residual", sc.target_residual},
                {"seed", sc.seed},        {"truth", sc.truth_path}};
    write_run_manifest(sc.out, "solve-2d", params, inputs, outputs);
    std::cout << std::setprecision(12) << "solve-2d: residual " << res.residual
              << " after " << res.iterations << " iterations, " << res.restarts
              << " restarts";
    if (aligned >= 0.0) std::cout << ", aligned error " << aligned;
    std::cout << " -> " << sc.out << "\n";
}

// ------------------------------------------------------------------ eval --

void run_eval_equations(int l) {
    for (bool known : {true, false}) {
        std::int64_t n = count_equations(l, known);
        std::cout << "L=" << l << " sigma " << (known ? "known" : "unknown")
                  << ": " << n << " equations, K bound " << k_bound(l, known)
                  << "\n";
    }
}

// The --est side accepts either a model artifact or a solver report, so the
// solve tools compose with eval directly; reports are unwrapped to the
// estimated model they carry.
mixture_model load_estimate(const std::string& path) {
    json j = parse_json_file(path);
    std::string fm = j.contains("format") ? j["format"].get<std::string>() : "";
    if (fm == "mtd.model") return j.get<mixture_model>();
    if (fm == "mtd.solve_report") return j.at("estimates").get<mixture_model>();
    if (fm == "mtd.homo") {
        mixture_model m;
        m.signals.push_back(j.at("x").get<signal>());
        m.densities.push_back(j.at("gamma").get<double>());
        m.noise_sigma = std::sqrt(std::max(0.0, j.at("sigma2").get<double>()));
        return m;
    }
    throw artifact_error("not a model or solver report: " + path);
}

void run_eval(const std::string& est_path, const std::string& truth_path,
              int max_shift, const std::string& out) {
    mixture_model est = load_estimate(est_path);
    mixture_model truth = load_model(truth_path);
    alignment_result al = aligned_error(est.signals, truth.signals, max_shift);
    json j{{"format", "mtd.eval"}, {"format_version", 1},
           {"max_rel_error", al.max_rel_error},
           {"per_signal", al.per_signal},
           {"permutation", al.permutation},
           {"shifts", al.shifts}};
    std::vector<double> density_err;
    for (std::size_t i = 0; i < al.permutation.size(); ++i) {
        double t = truth.densities[static_cast<std::size_t>(al.permutation[i])];
        density_err.push_back(std::abs(est.densities[i] - t) / t);
    }
    j["density_rel_errors"] = density_err;
    j["noise_sigma_est"] = est.noise_sigma;
    j["noise_sigma_truth"] = truth.noise_sigma;
    if (!out.empty()) {
        write_text_file(out, dump_json(j));
        write_run_manifest(out, "eval",
                           json{{"est", est_path}, {"truth", truth_path},
                                {"max_shift", max_shift}},
                           {est_path, truth_path}, {out});
    }
    std::cout << std::setprecision(12) << "eval: max aligned error "
              << al.max_rel_error << "\n";
}

// ------------------------------------------------------------- gen-model --

struct genmodel_cli {
    std::string out, densities;
    int k = 1, len = 11, dim = 1;
    double density = 0.3, sigma = 1.0, endpoint_min = 0.0;
    bool mean_zero = false;
    std::uint64_t seed = 1;
};

void run_gen_model(const genmodel_cli& gc) {
    mixture_model m;
    m.noise_sigma = gc.sigma;
    std::vector<double> gam;
    if (!gc.densities.empty()) {
        gam = parse_double_list(gc.densities);
        if (static_cast<int>(gam.size()) != gc.k)
            throw validation_error("--densities must list one value per component");
    } else {
        gam.assign(static_cast<std::size_t>(gc.k), gc.density / gc.k);
    }
    for (int c = 0; c < gc.k; ++c) {
        m.signals.push_back(make_random_signal(gc.dim, gc.len, gc.seed, c,
                                               gc.mean_zero, gc.endpoint_min));
        m.densities.push_back(gam[static_cast<std::size_t>(c)]);
    }
    save_model(m, gc.out);
    std::cout << "gen-model: k=" << gc.k << " L=" << gc.len << " dim=" << gc.dim
              << " -> " << gc.out << "\n";
}

// ---------------------------------------------------------- phase-diagram --

struct phase_cli {
    std::string ks, ls, out, json_out;
    int starts = 50;
    std::uint64_t seed = 1;
    double success_cost = 1e-16;
    int max_iter = 5000;
    int threads = 1;
};

void run_phase_diagram(const phase_cli& pc) {
    phase_diagram_options opt;
    opt.starts = pc.starts;
    opt.seed = pc.seed;
    opt.success_cost = pc.success_cost;
    opt.threads = pc.threads;
    opt.tr.max_iter = pc.max_iter;
    std::vector<phase_cell> cells =
        phase_diagram(parse_int_list(pc.ks), parse_int_list(pc.ls), opt);
    write_text_file(pc.out, phase_diagram_csv(cells));
    std::vector<std::string> outputs{pc.out};
    if (!pc.json_out.empty()) {
        json arr = json::array();
        for (const phase_cell& c : cells)
            arr.push_back(json{{"k", c.k},
                               {"l", c.l},
                               {"success_rate", c.success_rate},
                               {"worst_error", c.worst_error},
                               {"median_log10_time", c.median_log10_time}});
        write_text_file(pc.json_out,
                        dump_json(json{{"format", "mtd.phase_diagram"},
                                       {"format_version", 1},
                                       {"cells", arr}}));
        outputs.push_back(pc.json_out);
    }
    write_run_manifest(pc.out, "phase-diagram",
                       json{{"ks", pc.ks}, {"ls", pc.ls}, {"starts", pc.starts},
                            {"seed", pc.seed}, {"success_cost", pc.success_cost}},
                       {}, outputs);
    std::cout << "phase-diagram: " << cells.size() << " cells -> " << pc.out << "\n";
}

// ------------------------------------------------------------------ exp1 --

struct exp1_cli {
    std::string model_path, checkpoints, seeds, gammas, out, json_out;
    std::string placement = "separated";
    std::string segment_len = "1e7";
    int starts = 10;
    std::uint64_t solver_seed = 1;
    int max_shift = 0;
    int threads = 1;
};

void run_exp1(const exp1_cli& ec) {
    exp1_config cfg;
    cfg.model = load_model(ec.model_path);
    cfg.kind = placement_from_string(ec.placement);
    cfg.checkpoints = parse_counts(ec.checkpoints);
    cfg.seeds = parse_seed_list(ec.seeds);
    if (!ec.gammas.empty()) cfg.fixed_gammas = parse_double_list(ec.gammas);
    cfg.starts = ec.starts;
    cfg.solver_seed = ec.solver_seed;
    cfg.segment_len = parse_count(ec.segment_len);
    cfg.max_shift = ec.max_shift;
    cfg.threads = ec.threads;
    exp1_result res = experiment1(cfg);
    write_text_file(ec.out, res.csv());
    std::vector<std::string> outputs{ec.out};
    if (!ec.json_out.empty()) {
        json rows = json::array();
        for (const exp1_row& r : res.rows)
            rows.push_back(json{{"seed", r.seed},
                                {"n", r.n},
                                {"max_rel_error", r.max_rel_error},
                                {"per_signal", r.per_signal},
                                {"best_cost", r.best_cost},
                                {"seconds", r.seconds}});
        write_text_file(
            ec.json_out,
            dump_json(json{{"format", "mtd.exp1"},
                           {"format_version", 1},
                           {"checkpoints", res.checkpoints},
                           {"median_error", res.median_error},
                           {"rows", rows}}));
        outputs.push_back(ec.json_out);
    }
    write_run_manifest(ec.out, "exp1",
                       json{{"model", ec.model_path},
                            {"checkpoints", ec.checkpoints},
                            {"seeds", ec.seeds},
                            {"placement", ec.placement},
                            {"starts", ec.starts},
                            {"solver_seed", ec.solver_seed},
                            {"segment_len", ec.segment_len},
                            {"gammas", ec.gammas},
                            {"max_shift", ec.max_shift}},
                       {ec.model_path}, outputs);
    std::cout << std::setprecision(6) << "exp1: medians";
    for (std::size_t c = 0; c < res.checkpoints.size(); ++c)
        std::cout << " " << res.checkpoints[c] << ":" << res.median_error[c];
    if (res.checkpoints.size() >= 2)
        std::cout << ", endpoint slope "
                  << log_log_endpoint_slope(res.checkpoints, res.median_error);
    std::cout << " -> " << ec.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-target detection toolkit"};
    app.require_subcommand(1);

    genmodel_cli gc;
    auto* c_gen = app.add_subcommand("gen-model", "generate a random mixture model");
    c_gen->add_option("--out", gc.out, "output model JSON")->required();
    c_gen->add_option("-k,--components", gc.k, "number of signal classes");
    c_gen->add_option("-L,--len", gc.len, "signal length (side length for 2-D)");
    c_gen->add_option("--dim", gc.dim, "1 or 2")->check(CLI::IsMember({1, 2}));
    c_gen->add_option("--density", gc.density, "total density, split equally");
    c_gen->add_option("--densities", gc.densities, "explicit per-class densities");
    c_gen->add_option("--sigma", gc.sigma, "noise standard deviation");
    c_gen->add_option("--seed", gc.seed, "signal seed");
    c_gen->add_flag("--mean-zero", gc.mean_zero, "recentre each signal to zero mean");
    c_gen->add_option("--endpoint-min", gc.endpoint_min,
                      "push 1-D signal endpoints at least this far from zero");

    stream_opts synth_so;
    std::string synth_out, synth_png;
    auto* c_synth = app.add_subcommand("synth", "synthesize an observation stream");
    synth_so.add_options(c_synth, true);
    c_synth->add_option("--out", synth_out, "output payload (.f64; sidecar JSON added)")
        ->required();
    c_synth->add_option("--png", synth_png, "grayscale preview (2-D only)");

    ac_opts ao;
    stream_opts ac_so;
    ac_so.model_path.clear();
    auto* c_ac = app.add_subcommand(
        "ac", "accumulate empirical autocorrelations (from a file or streamed)");
    c_ac->add_option("--in", ao.in, "observation payload written by synth");
    ac_so.add_options(c_ac, false);
    c_ac->add_option("--out", ao.out, "output autocorrelation JSON")->required();
    c_ac->add_option("--order", ao.order, "highest order (default 3, 2 for 2-D)");
    c_ac->add_option("--len", ao.len, "window length L (default: signal length)");
    c_ac->add_option("--junction", ao.junction, "exact or truncate");
    c_ac->add_option("--threads", ao.threads, "worker threads");

    std::string sh_ac, sh_placement = "separated", sh_out;
    std::optional<double> sh_sigma2;
    auto* c_homo = app.add_subcommand("solve-homo", "closed-form single-class recovery");
    c_homo->add_option("--ac", sh_ac, "autocorrelation JSON")->required();
    c_homo->add_option("--placement", sh_placement, "separated or poisson");
    c_homo->add_option("--sigma2", sh_sigma2, "known noise variance");
    c_homo->add_option("--out", sh_out, "output JSON")->required();

    hetero_cli hc;
    auto* c_het = app.add_subcommand("solve-hetero",
                                     "multi-start least-squares mixture recovery");
    c_het->add_option("--ac", hc.ac_path, "autocorrelation JSON")->required();
    c_het->add_option("-k,--components", hc.k, "number of signal classes")->required();
    c_het->add_option("--placement", hc.placement, "separated or poisson");
    c_het->add_option("--sigma2", hc.sigma2, "known noise variance");
    c_het->add_option("--gammas", hc.gammas, "fix densities to this list");
    c_het->add_option("--starts", hc.starts, "number of random starts");
    c_het->add_option("--seed", hc.seed, "start seed");
    c_het->add_option("--stage1-window", hc.stage1_window,
                      "wide window width (default 2L-1)");
    c_het->add_option("--max-iter", hc.max_iter, "iteration cap per stage");
    c_het->add_option("--gtol", hc.gtol, "gradient-norm stopping tolerance");
    c_het->add_option("--truth", hc.truth_path, "model JSON for aligned errors");
    c_het->add_option("--max-shift", hc.max_shift, "alignment shift range");
    c_het->add_option("--threads", hc.threads, "worker threads");
    c_het->add_option("--out", hc.out, "output report JSON")->required();

    solve2d_cli sc;
    auto* c_2d = app.add_subcommand("solve-2d", "2-D recovery by phase retrieval");
    c_2d->add_option("--ac", sc.ac_path, "observed 2-D autocorrelation JSON");
    c_2d->add_option("--model", sc.model_path, "exact targets from this 2-D model");
    c_2d->add_option("--gamma", sc.gamma, "density (with --ac)");
    c_2d->add_option("--sigma2", sc.sigma2, "noise variance (with --ac)");
    c_2d->add_option("--iters", sc.iters, "iteration cap");
    c_2d->add_option("--beta", sc.beta, "relaxation parameter");
    c_2d->add_option("--restart-window", sc.restart_window,
                     "plateau length before reseeding");
    c_2d->add_option("--target-residual", sc.target_residual, "early-stop residual");
    c_2d->add_option("--seed", sc.seed, "retrieval seed");
    c_2d->add_option("--truth", sc.truth_path, "model JSON for the aligned error");
    c_2d->add_option("--png", sc.png, "grayscale preview of the estimate");
    c_2d->add_option("--out", sc.out, "output JSON")->required();

    std::string ev_est, ev_truth, ev_out;
    int ev_shift = 0, ev_equations = 0;
    auto* c_eval = app.add_subcommand("eval", "compare an estimate against a truth model");
    c_eval->add_option("--est", ev_est, "estimated model JSON");
    c_eval->add_option("--truth", ev_truth, "ground-truth model JSON");
    c_eval->add_option("--max-shift", ev_shift, "alignment shift range");
    c_eval->add_option("--out", ev_out, "optional report JSON");
    c_eval->add_option("--equations", ev_equations,
                       "print equation counts and the K bound for this L");

    phase_cli pc;
    auto* c_pd = app.add_subcommand("phase-diagram",
                                    "success-rate grid over (K, L) on exact moments");
    c_pd->add_option("--ks", pc.ks, "comma-separated K values")->required();
    c_pd->add_option("--ls", pc.ls, "comma-separated L values")->required();
    c_pd->add_option("--starts", pc.starts, "starts per cell");
    c_pd->add_option("--seed", pc.seed, "cell seed");
    c_pd->add_option("--success-cost", pc.success_cost, "success threshold on cost");
    c_pd->add_option("--max-iter", pc.max_iter, "iteration cap per stage");
    c_pd->add_option("--threads", pc.threads, "worker threads");
    c_pd->add_option("--out", pc.out, "output CSV")->required();
    c_pd->add_option("--json", pc.json_out, "optional JSON copy");

    exp1_cli ec;
    auto* c_e1 = app.add_subcommand("exp1", "error versus sample size study");
    c_e1->add_option("--model", ec.model_path, "mixture model JSON")->required();
    c_e1->add_option("--checkpoints", ec.checkpoints, "ascending lengths, e.g. 1e6,1e7")
        ->required();
    c_e1->add_option("--seeds", ec.seeds, "comma-separated synthesis seeds")->required();
    c_e1->add_option("--placement", ec.placement, "separated or poisson");
    c_e1->add_option("--gammas", ec.gammas, "fix densities to this list");
    c_e1->add_option("--starts", ec.starts, "starts per solve");
    c_e1->add_option("--solver-seed", ec.solver_seed, "start seed");
    c_e1->add_option("--segment-len", ec.segment_len, "streaming segment length");
    c_e1->add_option("--max-shift", ec.max_shift, "alignment shift range");
    c_e1->add_option("--threads", ec.threads, "worker threads");
    c_e1->add_option("--out", ec.out, "output CSV")->required();
    c_e1->add_option("--json", ec.json_out, "optional JSON copy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*c_gen) run_gen_model(gc);
        if (*c_synth) run_synth(synth_so, synth_out, synth_png);
        if (*c_ac) run_ac(ao, ac_so);
        if (*c_homo) run_solve_homo(sh_ac, sh_placement, sh_sigma2, sh_out);
        if (*c_het) run_solve_hetero(hc);
        if (*c_2d) run_solve_2d(sc);
        if (*c_eval) {
            if (ev_equations > 0)
                run_eval_equations(ev_equations);
            else if (!ev_est.empty() && !ev_truth.empty())
                run_eval(ev_est, ev_truth, ev_shift, ev_out);
            else
                throw cli_error("eval needs --est and --truth, or --equations L");
        }
        if (*c_pd) run_phase_diagram(pc);
        if (*c_e1) run_exp1(ec);
    } catch (const cli_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const artifact_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const solve_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const unimplemented_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
