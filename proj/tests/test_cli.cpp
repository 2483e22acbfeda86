// End-to-end checks of the command-line tool: every subcommand runs against
// real artifacts in a temporary directory, and the documented exit codes are
// verified. Invoked as: test_cli <path-to-mtd-binary>.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/core.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_tool;
fs::path g_dir;
int g_failures = 0;
int g_step = 0;

#define CHECK(cond)                                                              \
    do {                                                                         \
        if (!(cond)) {                                                           \
            ++g_failures;                                                        \
            std::cerr << "FAIL " << __FILE__ << ":" << __LINE__ << ": " << #cond \
                      << "\n";                                                   \
        }                                                                        \
    } while (0)

int run(const std::string& args, std::string* output = nullptr) {
    fs::path log = g_dir / ("log_" + std::to_string(g_step++) + ".txt");
    std::string cmd = g_tool + " " + args + " > " + log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    if (output) *output = ss.str();
    return code;
}

void expect_exit(const std::string& args, int want) {
    std::string out;
    int got = run(args, &out);
    if (got != want) {
        ++g_failures;
        std::cerr << "FAIL: `" << args << "` exited " << got << ", wanted " << want
                  << "\n--- output ---\n"
                  << out << "--------------\n";
    }
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(f),
                             std::istreambuf_iterator<char>());
}

mtd::json load(const fs::path& p) { return mtd::parse_json_file(p.string()); }

std::string q(const fs::path& p) { return p.string(); }

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <mtd binary>\n";
        return 2;
    }
    g_tool = argv[1];
    char tmpl[] = "/tmp/mtd_cli_XXXXXX";
    if (!mkdtemp(tmpl)) {
        std::cerr << "mkdtemp failed\n";
        return 2;
    }
    g_dir = tmpl;

    // ---- model generation -------------------------------------------------
    fs::path model = g_dir / "model.json";
    expect_exit("gen-model --out " + q(model) +
                    " -k 1 -L 7 --density 0.3 --sigma 0.5 --seed 3 --endpoint-min 0.3",
                0);
    {
        mtd::mixture_model m = mtd::load_model(model.string());
        CHECK(m.k() == 1);
        CHECK(m.len() == 7);
        CHECK(m.dim() == 1);
        CHECK(m.noise_sigma == 0.5);
        CHECK(m.densities == std::vector<double>{0.3});
    }

    // ---- synthesis: payload, sidecar, run manifest, determinism -----------
    fs::path obs = g_dir / "obs.f64";
    std::string synth_args = " --model " + q(model) +
                             " -N 50000 --segment-len 20000 --seed 5 --out ";
    expect_exit("synth" + synth_args + q(obs), 0);
    CHECK(fs::file_size(obs) == 50000 * sizeof(double));
    {
        mtd::json side = load(obs.string() + ".json");
        CHECK(side.at("format") == "mtd.observation");
        CHECK(side.at("n").get<std::int64_t>() == 50000);
        CHECK(side.at("signal_len").get<int>() == 7);
        mtd::json manifest = load(obs.string() + ".run.json");
        CHECK(manifest.at("format") == "mtd.run");
        CHECK(manifest.at("tool") == "synth");
        CHECK(manifest.at("outputs").contains(obs.string()));
    }
    fs::path obs2 = g_dir / "obs_again.f64";
    expect_exit("synth" + synth_args + q(obs2), 0);
    CHECK(slurp(obs) == slurp(obs2));

    // ---- autocorrelation: file path vs streamed model path ----------------
    fs::path ac_a = g_dir / "ac_a.json", ac_b = g_dir / "ac_b.json";
    expect_exit("ac --in " + q(obs) + " --out " + q(ac_a), 0);
    expect_exit("ac --model " + q(model) +
                    " -N 50000 --segment-len 20000 --seed 5 --out " + q(ac_b),
                0);
    {
        mtd::autocorr_set a = mtd::load_autocorr(ac_a.string());
        CHECK(a.len == 7);
        CHECK(a.order == 3);
        CHECK(a.n_samples == 50000);
        // The two accumulation routes are defined to agree bit for bit.
        CHECK(slurp(g_dir / "ac_a.f64") == slurp(g_dir / "ac_b.f64"));
    }

    // ---- homogeneous solve ------------------------------------------------
    fs::path homo = g_dir / "homo.json";
    expect_exit("solve-homo --ac " + q(ac_a) + " --sigma2 0.25 --out " + q(homo), 0);
    {
        mtd::json r = load(homo);
        CHECK(r.at("format") == "mtd.homo");
        double gamma = r.at("gamma").get<double>();
        CHECK(std::isfinite(gamma));
        CHECK(gamma > 0.0);
        CHECK(r.at("x").at("len").get<int>() >= 2);
    }

    // ---- heterogeneous solve with truth alignment -------------------------
    fs::path het = g_dir / "het.json";
    expect_exit("solve-hetero --ac " + q(ac_a) +
                    " -k 1 --gammas 0.3 --starts 3 --seed 2 --truth " + q(model) +
                    " --out " + q(het),
                0);
    {
        mtd::json r = load(het);
        CHECK(r.at("format") == "mtd.solve_report");
        CHECK(r.at("per_start").size() == 3);
        CHECK(r.at("best_cost").get<double>() >= 0.0);
        CHECK(r.at("aligned_errors").is_array());
        CHECK(r.at("aligned_errors").size() == 1);
        CHECK(r.at("estimates").at("signals").size() == 1);
    }

    // ---- 2-D: model, synthesis with preview, accumulation, retrieval ------
    fs::path m2 = g_dir / "m2.json";
    expect_exit("gen-model --out " + q(m2) +
                    " -k 1 -L 5 --dim 2 --mean-zero --density 0.05 --sigma 1 --seed 9",
                0);
    fs::path obs2d = g_dir / "obs2d.f64", png = g_dir / "obs.png";
    expect_exit("synth --model " + q(m2) +
                    " --placement grid2d --height 40 --width 40 --obs 2 --mean-occ 2"
                    " --seed 4 --out " +
                    q(obs2d) + " --png " + q(png),
                0);
    CHECK(fs::file_size(obs2d) == 2 * 40 * 40 * sizeof(double));
    CHECK(fs::exists(png));
    CHECK(fs::file_size(png) > 8);
    fs::path ac2d = g_dir / "ac2d.json";
    expect_exit("ac --in " + q(obs2d) + " --out " + q(ac2d), 0);
    {
        mtd::autocorr_set a = mtd::load_autocorr(ac2d.string());
        CHECK(a.dim == 2);
        CHECK(a.order == 2);
        CHECK(a.len == 5);
        CHECK(a.src_h == 40);
    }
    fs::path s2 = g_dir / "solve2d.json", est_png = g_dir / "est.png";
    expect_exit("solve-2d --model " + q(m2) + " --iters 50000 --seed 0 --truth " +
                    q(m2) + " --png " + q(est_png) + " --out " + q(s2),
                0);
    {
        mtd::json r = load(s2);
        CHECK(r.at("format") == "mtd.solve2d");
        CHECK(r.at("estimate").at("dim").get<int>() == 2);
        CHECK(std::isfinite(r.at("residual").get<double>()));
        CHECK(r.contains("aligned_error"));
        if (r.at("residual").get<double>() < 1e-8)
            CHECK(r.at("aligned_error").get<double>() < 1e-3);
        CHECK(fs::exists(est_png));
    }

    // ---- eval -------------------------------------------------------------
    {
        std::string out;
        CHECK(run("eval --equations 7", &out) == 0);
        CHECK(out.find("equations") != std::string::npos);
    }
    fs::path ev = g_dir / "eval.json";
    expect_exit("eval --est " + q(model) + " --truth " + q(model) + " --out " + q(ev), 0);
    {
        mtd::json r = load(ev);
        CHECK(r.at("max_rel_error").get<double>() < 1e-14);
    }
    // Solver reports feed eval directly: the estimate inside is unwrapped.
    fs::path evh = g_dir / "eval_homo.json";
    expect_exit("eval --est " + q(homo) + " --truth " + q(model) + " --out " + q(evh), 0);
    fs::path evr = g_dir / "eval_het.json";
    expect_exit("eval --est " + q(het) + " --truth " + q(model) + " --out " + q(evr), 0);
    {
        mtd::json rh = load(evh), rr = load(evr);
        CHECK(std::isfinite(rh.at("max_rel_error").get<double>()));
        CHECK(std::isfinite(rr.at("max_rel_error").get<double>()));
        CHECK(rh.at("noise_sigma_est").get<double>() >= 0.0);
    }

    // ---- study harnesses --------------------------------------------------
    fs::path e1csv = g_dir / "exp1.csv";
    expect_exit("exp1 --model " + q(model) +
                    " --checkpoints 20000,40000 --seeds 1,2 --gammas 0.3"
                    " --starts 2 --segment-len 20000 --out " + q(e1csv),
                0);
    {
        auto v = slurp(e1csv);
        std::string csv(v.begin(), v.end());
        CHECK(csv.rfind("seed,n,max_rel_error", 0) == 0);
        CHECK(csv.find("\nmedian,") != std::string::npos);
    }
    fs::path pdcsv = g_dir / "pd.csv";
    expect_exit("phase-diagram --ks 1 --ls 4 --starts 3 --seed 2 --max-iter 2000"
                " --out " + q(pdcsv),
                0);
    {
        auto v = slurp(pdcsv);
        std::string csv(v.begin(), v.end());
        CHECK(csv.rfind("k,l,success_rate", 0) == 0);
        CHECK(csv.find("\n1,4,") != std::string::npos);
    }

    // ---- documented exit codes -------------------------------------------
    expect_exit("", 2);                       // missing subcommand
    expect_exit("no-such-command", 2);        // unknown subcommand
    expect_exit("gen-model", 2);              // missing required option
    expect_exit("ac --in " + q(g_dir / "nope.f64") + " --out " + q(g_dir / "x.json"),
                3);                           // missing artifact
    expect_exit("synth --model " + q(model) + " --placement bogus --out " +
                    q(g_dir / "y.f64"),
                4);                           // invalid placement
    expect_exit("solve-hetero --ac " + q(ac_a) + " -k 0 --out " + q(g_dir / "z.json"),
                4);                           // invalid component count

    if (g_failures == 0) {
        std::cout << "test_cli: all checks passed\n";
        std::error_code ec;
        fs::remove_all(g_dir, ec);
        return 0;
    }
    std::cerr << "test_cli: " << g_failures << " failure(s); artifacts kept in "
              << g_dir << "\n";
    return 1;
}
