#pragma once
// Core types shared by every module: signals and mixture models, empirical
// autocorrelation sets with their canonical (nonredundant) storage, solver
// reports, validation, and artifact serialization.
//
// Third-order values are stored on the triangle 0 <= l2 <= l1 <= L-1. The
// full signed tensor is redundant under
//   a3[l1,l2] = a3[l2,l1] = a3[-l1,l2-l1],
// i.e. the entry depends only on the multiset of gaps in the index triple
// (0, l1, l2). Canonicalization shifts that triple so its minimum is 0 and
// sorts it; the surviving pair (max, mid) is the stored cell.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace mtd {

static_assert(std::endian::native == std::endian::little,
              "artifact payloads are little-endian float64");

using json = nlohmann::json;

// Error taxonomy; the CLI maps each to a distinct exit code.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct artifact_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct solve_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct unimplemented_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- signals --

struct signal {
    int dim = 1;
    int len = 0;                 // length (1-D) or side length (2-D, square)
    std::vector<double> values;  // len entries, or len*len row-major

    double at2(int r, int c) const { return values[static_cast<size_t>(r) * len + c]; }
    double& at2(int r, int c) { return values[static_cast<size_t>(r) * len + c]; }
    size_t expected_size() const {
        return dim == 2 ? static_cast<size_t>(len) * len : static_cast<size_t>(len);
    }
};

struct mixture_model {
    std::vector<signal> signals;    // K components, equal dim and len
    std::vector<double> densities;  // gamma_k > 0
    double noise_sigma = 0.0;

    int k() const { return static_cast<int>(signals.size()); }
    int len() const { return signals.empty() ? 0 : signals[0].len; }
    int dim() const { return signals.empty() ? 1 : signals[0].dim; }
    double total_density() const {
        double g = 0.0;
        for (double d : densities) g += d;
        return g;
    }
    std::vector<double> mixing_weights() const {
        double g = total_density();
        std::vector<double> pi(densities.size());
        for (size_t i = 0; i < pi.size(); ++i) pi[i] = densities[i] / g;
        return pi;
    }
};

enum class placement_kind { well_separated, poisson };

inline std::string to_string(placement_kind k) {
    return k == placement_kind::well_separated ? "well_separated" : "poisson";
}
inline placement_kind placement_from_string(const std::string& s) {
    if (s == "well_separated" || s == "separated") return placement_kind::well_separated;
    if (s == "poisson") return placement_kind::poisson;
    throw validation_error("unknown placement kind: " + s);
}

// Density cap for well-separated streams: occurrences use L samples out of
// every 2L-1, so gamma = |occurrences|*L/N can be at most L/(2L-1).
inline double separated_density_cap(int len) {
    return len <= 1 ? 1.0 : static_cast<double>(len) / (2.0 * len - 1.0);
}

inline std::vector<std::string> validate(const mixture_model& m, placement_kind kind) {
    std::vector<std::string> bad;
    if (m.signals.empty()) bad.push_back("model has no signal components");
    if (m.densities.size() != m.signals.size())
        bad.push_back("densities count does not match signal count");
    int len = m.len(), dim = m.dim();
    if (dim != 1 && dim != 2) bad.push_back("signal dim must be 1 or 2");
    if (len < 1) bad.push_back("signal length must be >= 1");
    for (size_t i = 0; i < m.signals.size(); ++i) {
        const signal& s = m.signals[i];
        if (s.len != len || s.dim != dim)
            bad.push_back("component " + std::to_string(i) + " has mismatched shape");
        if (s.values.size() != s.expected_size())
            bad.push_back("component " + std::to_string(i) + " has wrong value count");
        for (double v : s.values)
            if (!std::isfinite(v)) {
                bad.push_back("component " + std::to_string(i) + " has non-finite values");
                break;
            }
    }
    for (size_t i = 0; i < m.densities.size(); ++i)
        if (!(m.densities[i] > 0.0) || !std::isfinite(m.densities[i]))
            bad.push_back("density " + std::to_string(i) + " must be finite and > 0");
    if (!(m.noise_sigma >= 0.0) || !std::isfinite(m.noise_sigma))
        bad.push_back("noise sigma must be finite and >= 0");
    if (kind == placement_kind::well_separated && !m.signals.empty()) {
        double cap = separated_density_cap(len);
        double g = m.total_density();
        if (g > cap + 1e-12)
            bad.push_back("total density " + std::to_string(g) +
                          " exceeds the well-separated cap L/(2L-1) = " + std::to_string(cap));
    }
    return bad;
}

inline void validate_or_throw(const mixture_model& m, placement_kind kind) {
    auto bad = validate(m, kind);
    if (bad.empty()) return;
    std::string msg = "model validation failed:";
    for (auto& b : bad) msg += "\n  - " + b;
    throw validation_error(msg);
}

// --------------------------------------------------------- autocorr sets --

struct autocorr_set {
    int dim = 1;
    int len = 0;    // shifts run over |l| <= len-1
    int order = 3;  // highest accumulated order (2-D: at most 2)
    double a1 = 0.0;
    std::vector<double> a2;  // 1-D: len entries l=0..len-1; 2-D: half-plane
    std::vector<double> a3;  // 1-D triangle, empty unless dim==1 && order==3
    std::uint64_t n_samples = 0;
    std::uint64_t n_segments = 0;  // 2-D: number of observations
    std::string junction = "";     // accumulation policy note, "" if n/a
    int src_h = 0, src_w = 0;      // 2-D: observation shape

    static int tri_size(int l) { return l * (l + 1) / 2; }
    static int tri_index(int l1, int l2) { return l1 * (l1 + 1) / 2 + l2; }

    // Canonical representative of a signed shift pair (see header comment).
    // Throws std::out_of_range if the index triple spans more than len-1.
    std::pair<int, int> canonical_pair(int l1, int l2) const {
        int lo = std::min(0, std::min(l1, l2));
        int hi = std::max(0, std::max(l1, l2));
        int b = hi - lo;
        if (b > len - 1)
            throw std::out_of_range("a3 shift pair (" + std::to_string(l1) + "," +
                                    std::to_string(l2) + ") spans beyond len-1");
        int a = 0 - lo + l1 - lo + l2 - lo - 0 - b;  // middle element of the shifted triple
        return {b, a};
    }

    double a2_at(int l) const {
        int a = std::abs(l);
        if (a > len - 1) throw std::out_of_range("a2 shift out of range");
        return a2[a];
    }
    double a3_at(int l1, int l2) const {
        auto [b, a] = canonical_pair(l1, l2);
        return a3[tri_index(b, a)];
    }

    // 2-D second-order storage: the grid is centrally symmetric
    // (a2[lr,lc] = a2[-lr,-lc]), so only the half-plane {lr>0} plus the ray
    // {lr=0, lc>=0} is kept: row 0 holds lc = 0..len-1, rows 1..len-1 hold
    // lc = -(len-1)..len-1.
    static size_t a2_grid_size(int l) {
        return static_cast<size_t>(l) + static_cast<size_t>(l - 1) * (2 * l - 1);
    }
    static size_t a2_index_2d(int len, int lr, int lc) {
        if (lr < 0 || (lr == 0 && lc < 0)) { lr = -lr; lc = -lc; }
        if (lr > len - 1 || std::abs(lc) > len - 1)
            throw std::out_of_range("2-D a2 shift out of range");
        if (lr == 0) return static_cast<size_t>(lc);
        return static_cast<size_t>(len) + static_cast<size_t>(lr - 1) * (2 * len - 1) +
               (lc + len - 1);
    }
    double a2_at_2d(int lr, int lc) const { return a2[a2_index_2d(len, lr, lc)]; }

    static autocorr_set make_1d(int len, int order) {
        autocorr_set ac;
        ac.dim = 1;
        ac.len = len;
        ac.order = order;
        ac.a2.assign(len, 0.0);
        if (order >= 3) ac.a3.assign(tri_size(len), 0.0);
        return ac;
    }
    static autocorr_set make_2d(int len) {
        autocorr_set ac;
        ac.dim = 2;
        ac.len = len;
        ac.order = 2;
        ac.a2.assign(a2_grid_size(len), 0.0);
        return ac;
    }
};

// ------------------------------------------------------------- reports ----

struct start_record {
    double final_cost = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct solve_report {
    mixture_model estimates;
    std::vector<start_record> per_start;
    std::vector<mixture_model> per_start_estimates;  // kept in memory, not serialized
    std::vector<double> per_start_seconds;           // kept in memory, not serialized
    double best_cost = 0.0;
    int best_start = -1;
    std::vector<double> aligned_errors;  // empty when no ground truth given
};

// ------------------------------------------------------------ JSON forms --

inline void to_json(json& j, const signal& s) {
    j = json{{"dim", s.dim}, {"len", s.len}, {"values", s.values}};
}
inline void from_json(const json& j, signal& s) {
    s.dim = j.value("dim", 1);
    s.len = j.at("len").get<int>();
    s.values = j.at("values").get<std::vector<double>>();
    if (s.values.size() != s.expected_size())
        throw artifact_error("signal value count does not match len/dim");
}

inline void to_json(json& j, const mixture_model& m) {
    j = json{{"format", "mtd.model"},
             {"format_version", 1},
             {"signals", m.signals},
             {"densities", m.densities},
             {"noise_sigma", m.noise_sigma}};
}
inline void from_json(const json& j, mixture_model& m) {
    m.signals = j.at("signals").get<std::vector<signal>>();
    m.densities = j.at("densities").get<std::vector<double>>();
    m.noise_sigma = j.at("noise_sigma").get<double>();
}

inline void to_json(json& j, const start_record& r) {
    j = json{{"final_cost", r.final_cost},
             {"grad_norm", r.grad_norm},
             {"iterations", r.iterations},
             {"converged", r.converged}};
}
inline void from_json(const json& j, start_record& r) {
    r.final_cost = j.at("final_cost").get<double>();
    r.grad_norm = j.at("grad_norm").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
}

inline void to_json(json& j, const solve_report& r) {
    j = json{{"format", "mtd.solve_report"},
             {"format_version", 1},
             {"estimates", r.estimates},
             {"per_start", r.per_start},
             {"best_cost", r.best_cost},
             {"best_start", r.best_start}};
    if (r.aligned_errors.empty())
        j["aligned_errors"] = nullptr;
    else
        j["aligned_errors"] = r.aligned_errors;
}
inline void from_json(const json& j, solve_report& r) {
    r.estimates = j.at("estimates").get<mixture_model>();
    r.per_start = j.at("per_start").get<std::vector<start_record>>();
    r.best_cost = j.at("best_cost").get<double>();
    r.best_start = j.at("best_start").get<int>();
    r.aligned_errors.clear();
    if (!j.at("aligned_errors").is_null())
        r.aligned_errors = j.at("aligned_errors").get<std::vector<double>>();
}

// ------------------------------------------------------------- artifacts --

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open for writing: " + path);
    f << text;
    if (!f) throw artifact_error("write failed: " + path);
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open: " + path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw artifact_error("not valid JSON: " + path);
    return j;
}

inline void expect_format(const json& j, const std::string& format, const std::string& path) {
    if (j.value("format", "") != format)
        throw artifact_error(path + ": expected format '" + format + "', found '" +
                             j.value("format", "<missing>") + "'");
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        throw artifact_error(path + ": missing integer format_version");
    if (j["format_version"].get<int>() != 1)
        throw artifact_error(path + ": unsupported format_version");
}

inline void write_f64(const std::string& path, const std::vector<double>& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!f) throw artifact_error("write failed: " + path);
}

inline std::vector<double> read_f64(const std::string& path, size_t expect_count) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw artifact_error("cannot open: " + path);
    auto bytes = static_cast<size_t>(f.tellg());
    if (bytes != expect_count * sizeof(double))
        throw artifact_error(path + ": expected " + std::to_string(expect_count) +
                             " float64 values, file holds " +
                             std::to_string(bytes / sizeof(double)));
    f.seekg(0);
    std::vector<double> v(expect_count);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw artifact_error("short read: " + path);
    return v;
}

// Autocorrelation artifact = JSON metadata + flat float64 payload
// [a1][a2][a3] living next to it. The layout table gives (offset, count)
// in float64 units for each block.
inline std::string payload_path_for(const std::string& json_path) {
    std::filesystem::path p(json_path);
    p.replace_extension(".f64");
    return p.string();
}

inline void save_autocorr(const autocorr_set& ac, const std::string& json_path) {
    std::string payload = payload_path_for(json_path);
    std::vector<double> flat;
    flat.reserve(1 + ac.a2.size() + ac.a3.size());
    flat.push_back(ac.a1);
    flat.insert(flat.end(), ac.a2.begin(), ac.a2.end());
    flat.insert(flat.end(), ac.a3.begin(), ac.a3.end());
    json j{{"format", "mtd.autocorr"},
           {"format_version", 1},
           {"dim", ac.dim},
           {"len", ac.len},
           {"order", ac.order},
           {"n_samples", ac.n_samples},
           {"n_segments", ac.n_segments},
           {"payload", std::filesystem::path(payload).filename().string()},
           {"layout",
            {{"a1", {0, 1}},
             {"a2", {1, ac.a2.size()}},
             {"a3", {1 + ac.a2.size(), ac.a3.size()}}}}};
    if (!ac.junction.empty()) j["junction"] = ac.junction;
    if (ac.dim == 2) j["source"] = {{"h", ac.src_h}, {"w", ac.src_w}};
    write_f64(payload, flat);
    write_text_file(json_path, dump_json(j));
}

inline autocorr_set load_autocorr(const std::string& json_path) {
    json j = parse_json_file(json_path);
    expect_format(j, "mtd.autocorr", json_path);
    autocorr_set ac;
    ac.dim = j.at("dim").get<int>();
    ac.len = j.at("len").get<int>();
    ac.order = j.at("order").get<int>();
    ac.n_samples = j.at("n_samples").get<std::uint64_t>();
    ac.n_segments = j.at("n_segments").get<std::uint64_t>();
    ac.junction = j.value("junction", "");
    if (j.contains("source")) {
        ac.src_h = j["source"].value("h", 0);
        ac.src_w = j["source"].value("w", 0);
    }
    size_t n2 = j.at("layout").at("a2").at(1).get<size_t>();
    size_t n3 = j.at("layout").at("a3").at(1).get<size_t>();
    size_t want2 = ac.dim == 2 ? autocorr_set::a2_grid_size(ac.len)
                               : static_cast<size_t>(ac.len);
    size_t want3 = (ac.dim == 1 && ac.order >= 3)
                       ? static_cast<size_t>(autocorr_set::tri_size(ac.len))
                       : 0;
    if (n2 != want2 || n3 != want3)
        throw artifact_error(json_path + ": layout inconsistent with dim/len/order");
    auto payload = std::filesystem::path(json_path).parent_path() /
                   j.at("payload").get<std::string>();
    std::vector<double> flat = read_f64(payload.string(), 1 + n2 + n3);
    ac.a1 = flat[0];
    ac.a2.assign(flat.begin() + 1, flat.begin() + 1 + n2);
    ac.a3.assign(flat.begin() + 1 + n2, flat.end());
    return ac;
}

inline mixture_model load_model(const std::string& path) {
    json j = parse_json_file(path);
    expect_format(j, "mtd.model", path);
    return j.get<mixture_model>();
}
inline void save_model(const mixture_model& m, const std::string& path) {
    write_text_file(path, dump_json(json(m)));
}

// FNV-1a 64-bit digest of a file, for run manifests.
inline std::string fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot open: " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
        if (!f) break;
    }
    char out[19];
    std::snprintf(out, sizeof out, "0x%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace mtd
