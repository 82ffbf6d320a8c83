#include "tscc/batch.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tscc/bytes.h"
#include "tscc/lattice.h"
#include "tscc/model.h"
#include "tscc/parallel.h"

namespace tscc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string fmt(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        out.push_back(trim(cur));
    }
    if (!s.empty() && s.back() == sep) {
        out.push_back("");
    }
    return out;
}

std::string read_file(const fs::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_atomic(const fs::path &path, const std::string &content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << content;
        f.flush();
        if (!f) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string hex64(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

template <class T>
T parse_number(const std::string &value, const std::string &key, int line) {
    T out{};
    const char *b = value.data();
    const char *e = b + value.size();
    auto res = std::from_chars(b, e, out);
    if (value.empty() || res.ec != std::errc() || res.ptr != e) {
        throw ConfigError("line " + std::to_string(line) + ": invalid value '" + value + "' for " + key);
    }
    return out;
}

}  // namespace

void RunConfig::validate() const {
    auto fail = [&](const std::string &what) {
        throw ConfigError("config '" + (name.empty() ? cell_name() : name) + "': " + what);
    };
    if (!(p >= 0 && p < 0.75)) {
        fail("p must lie in [0, 0.75) (got " + fmt(p) + ")");
    }
    if (L < 3 || L % 3 != 0) {
        fail("L must be a multiple of 3 and at least 3 (got " + std::to_string(L) + ")");
    }
    if (n_samples < 1) {
        fail("n_samples must be at least 1");
    }
    if (b < 0 || b > 40) {
        fail("b must lie in [0, 40] (got " + std::to_string(b) + ")");
    }
    if (cap_extra < 0 || b + cap_extra > 44) {
        fail("cap_extra must be non-negative with b + cap_extra <= 44");
    }
    if (!(T_min > 0) || !std::isfinite(T_max)) {
        fail("T_min must be positive");
    }
    if (N_T < 1) {
        fail("N_T must be at least 1");
    }
    if (N_T == 1 ? T_max != T_min : !(T_max > T_min)) {
        fail("need T_max > T_min for several temperatures (T_max = T_min for one)");
    }
    if (measurement_interval < 1) {
        fail("measurement_interval must be positive");
    }
}

double RunConfig::estimated_sweeps() const {
    return static_cast<double>(n_samples) * N_T * 2.0 * std::ldexp(1.0, b);
}

TemperatureLadder RunConfig::ladder() const {
    return TemperatureLadder::geometric(T_min, T_max, N_T);
}

RunSettings RunConfig::settings() const {
    RunSettings s;
    s.b = b;
    s.measurement_interval = measurement_interval;
    s.cap_extra = cap_extra;
    return s;
}

std::string RunConfig::cell_name() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "p%.4f_L%d", p, L);
    return buf;
}

namespace {

const std::set<std::string> kRunKeys{"name", "p",    "L",    "n_samples", "b", "T_min", "T_max",
                                     "N_T",  "seed", "measurement_interval", "cap_extra"};
const std::set<std::string> kGlobalKeys{"workers", "out", "seed", "description"};

struct RunBlock {
    int line = 0;
    std::map<std::string, std::string> values;
};

}  // namespace

BatchConfig parse_config(const std::string &text) {
    BatchConfig cfg;
    std::map<std::string, std::string> globals;
    std::vector<RunBlock> blocks;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        std::string s = trim(raw.substr(0, raw.find('#')));
        if (s.empty()) {
            continue;
        }
        if (s.front() == '[') {
            if (s != "[run]") {
                throw ConfigError("line " + std::to_string(line) + ": unknown section " + s);
            }
            blocks.push_back({line, {}});
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        auto &target = blocks.empty() ? globals : blocks.back().values;
        const auto &allowed = blocks.empty() ? kGlobalKeys : kRunKeys;
        if (!allowed.count(key)) {
            throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'" +
                              (blocks.empty() ? " outside [run]" : " in [run]"));
        }
        if (target.count(key)) {
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
        }
        target[key] = value + "\n" + std::to_string(line);
    }
    auto value_of = [](const std::string &packed) { return packed.substr(0, packed.find('\n')); };
    auto line_of = [](const std::string &packed) { return std::stoi(packed.substr(packed.find('\n') + 1)); };

    uint64_t default_seed = 1;
    if (globals.count("seed")) {
        default_seed = parse_number<uint64_t>(value_of(globals["seed"]), "seed", line_of(globals["seed"]));
    }
    if (globals.count("workers")) {
        cfg.workers = parse_number<uint32_t>(value_of(globals["workers"]), "workers", line_of(globals["workers"]));
        if (*cfg.workers == 0) {
            throw ConfigError("line " + std::to_string(line_of(globals["workers"])) + ": workers must be positive");
        }
    }
    if (globals.count("out")) {
        cfg.out_dir = value_of(globals["out"]);
    }
    if (globals.count("description")) {
        cfg.description = value_of(globals["description"]);
    }
    if (blocks.empty()) {
        throw ConfigError("config has no [run] block");
    }
    for (const RunBlock &blk : blocks) {
        for (const char *req : {"p", "L", "n_samples", "b", "T_min", "T_max", "N_T"}) {
            if (!blk.values.count(req)) {
                throw ConfigError("[run] block at line " + std::to_string(blk.line) + " is missing '" + req + "'");
            }
        }
        RunConfig base;
        base.seed = default_seed;
        std::vector<double> ps;
        std::vector<int> Ls;
        for (const auto &[key, packed] : blk.values) {
            std::string v = value_of(packed);
            int ln = line_of(packed);
            if (key == "name") {
                base.name = v;
            } else if (key == "p") {
                for (const std::string &item : split(v, ',')) {
                    ps.push_back(parse_number<double>(item, key, ln));
                }
            } else if (key == "L") {
                for (const std::string &item : split(v, ',')) {
                    Ls.push_back(parse_number<int>(item, key, ln));
                }
            } else if (key == "n_samples") {
                base.n_samples = parse_number<uint32_t>(v, key, ln);
            } else if (key == "b") {
                base.b = parse_number<int>(v, key, ln);
            } else if (key == "T_min") {
                base.T_min = parse_number<double>(v, key, ln);
            } else if (key == "T_max") {
                base.T_max = parse_number<double>(v, key, ln);
            } else if (key == "N_T") {
                base.N_T = parse_number<uint32_t>(v, key, ln);
            } else if (key == "seed") {
                base.seed = parse_number<uint64_t>(v, key, ln);
            } else if (key == "measurement_interval") {
                base.measurement_interval = parse_number<uint32_t>(v, key, ln);
            } else if (key == "cap_extra") {
                base.cap_extra = parse_number<int>(v, key, ln);
            }
        }
        for (double p : ps) {
            for (int L : Ls) {
                RunConfig rc = base;
                rc.p = p;
                rc.L = L;
                try {
                    rc.validate();
                } catch (const ConfigError &e) {
                    throw ConfigError("[run] block at line " + std::to_string(blk.line) + ": " + e.what());
                }
                cfg.runs.push_back(rc);
            }
        }
    }
    return cfg;
}

BatchConfig load_config(const fs::path &path) {
    return parse_config(read_file(path));
}

std::string format_config(const BatchConfig &cfg) {
    std::ostringstream os;
    if (!cfg.description.empty()) {
        os << "description = " << cfg.description << "\n";
    }
    if (cfg.workers) {
        os << "workers = " << *cfg.workers << "\n";
    }
    if (cfg.out_dir) {
        os << "out = " << *cfg.out_dir << "\n";
    }
    for (const RunConfig &r : cfg.runs) {
        os << "\n[run]\n";
        if (!r.name.empty()) {
            os << "name = " << r.name << "\n";
        }
        os << "p = " << fmt(r.p) << "\nL = " << r.L << "\nn_samples = " << r.n_samples << "\nb = " << r.b
           << "\nT_min = " << fmt(r.T_min) << "\nT_max = " << fmt(r.T_max) << "\nN_T = " << r.N_T
           << "\nseed = " << r.seed << "\nmeasurement_interval = " << r.measurement_interval
           << "\ncap_extra = " << r.cap_extra << "\n";
    }
    return os.str();
}

namespace {

struct TableRow {
    int L;
    uint32_t n_samples;
    int b;
    uint32_t N_T;
};

struct Regime {
    const char *name;
    std::vector<double> ps;
    double T_min, T_max;
    std::vector<TableRow> rows;
};

const std::vector<Regime> &table1() {
    static const std::vector<Regime> regimes{
        {"table1-low-p", {0.0, 0.01, 0.02}, 1.40, 2.50, {{9, 3200, 17, 24}, {12, 3200, 17, 24}, {18, 1600, 18, 24}, {24, 400, 19, 28}}},
        {"table1-mid-p", {0.03, 0.035, 0.04}, 1.25, 2.40, {{9, 4800, 18, 28}, {12, 4800, 18, 28}, {18, 2400, 19, 28}, {24, 800, 20, 32}}},
        {"table1-high-p",
         {0.045, 0.048, 0.05, 0.052, 0.055, 0.058, 0.06},
         0.9,
         2.20,
         {{9, 9600, 19, 32}, {12, 9600, 19, 32}, {18, 4800, 21, 36}, {24, 2400, 24, 48}}},
    };
    return regimes;
}

constexpr uint64_t kPresetSeed = 20120417;

std::vector<RunConfig> regime_runs(const Regime &reg) {
    std::vector<RunConfig> out;
    for (double p : reg.ps) {
        for (const TableRow &row : reg.rows) {
            RunConfig rc;
            rc.name = reg.name;
            rc.p = p;
            rc.L = row.L;
            rc.n_samples = row.n_samples;
            rc.b = row.b;
            rc.T_min = reg.T_min;
            rc.T_max = reg.T_max;
            rc.N_T = row.N_T;
            rc.seed = kPresetSeed;
            out.push_back(rc);
        }
    }
    return out;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"table1-low-p", "table1-mid-p", "table1-high-p", "desk-scale"};
}

Preset preset(const std::string &name) {
    for (const Regime &reg : table1()) {
        if (name == reg.name) {
            std::ostringstream d;
            d << "Table I rows for p in {";
            for (size_t k = 0; k < reg.ps.size(); ++k) {
                d << (k ? ", " : "") << fmt(reg.ps[k]);
            }
            d << "}, T in [" << fmt(reg.T_min) << ", " << fmt(reg.T_max) << "]; cluster scale";
            return {name, d.str(), regime_runs(reg)};
        }
    }
    if (name == "desk-scale") {
        Preset pr;
        pr.name = name;
        pr.description =
            "Desk-scale runs: p = 0 with L in {9, 12, 18} (8 independent thermal samples, b = 14) and p = 0.048 "
            "with L in {9, 12} (200 disorder samples, b = 13). Sample counts and b are shrunk so every cell needs "
            "at most 1% of the sweeps of its Table I row.";
        for (int L : {9, 12, 18}) {
            RunConfig rc;
            rc.name = "desk-p0";
            rc.p = 0;
            rc.L = L;
            rc.n_samples = 8;
            rc.b = 14;
            rc.T_min = 1.40;
            rc.T_max = 2.50;
            rc.N_T = 24;
            rc.seed = kPresetSeed;
            pr.runs.push_back(rc);
        }
        for (int L : {9, 12}) {
            RunConfig rc;
            rc.name = "desk-p0.048";
            rc.p = 0.048;
            rc.L = L;
            rc.n_samples = 200;
            rc.b = 13;
            rc.T_min = 0.9;
            rc.T_max = 2.20;
            rc.N_T = 32;
            rc.seed = kPresetSeed;
            pr.runs.push_back(rc);
        }
        return pr;
    }
    std::string known;
    for (const std::string &n : preset_names()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

std::optional<RunConfig> table1_counterpart(const RunConfig &cfg) {
    for (const Regime &reg : table1()) {
        double lo = reg.ps.front() - 1e-12, hi = reg.ps.back() + 1e-12;
        if (cfg.p < lo || cfg.p > hi) {
            continue;
        }
        for (const RunConfig &rc : regime_runs(reg)) {
            if (rc.L == cfg.L && rc.p == reg.ps.front()) {
                RunConfig out = rc;
                out.p = cfg.p;
                return out;
            }
        }
    }
    return std::nullopt;
}

uint64_t sample_seed(uint64_t master, double p, int L, uint32_t index) {
    return hash_words({master, double_bits(p), static_cast<uint64_t>(L), index});
}

std::string sample_json(const RunConfig &cfg, uint32_t index, uint64_t seed, const SampleResult &r) {
    ojson j;
    j["format"] = "tscc-sample";
    j["version"] = 1;
    j["p"] = cfg.p;
    j["L"] = cfg.L;
    j["sample"] = index;
    j["seed"] = seed;
    j["status"] = status_name(r.status);
    j["equilibration_sweeps"] = r.equilibration_sweeps;
    j["total_sweeps"] = r.total_sweeps;
    j["class_size"] = r.class_size;
    j["temperatures"] = r.temperatures;
    j["swap_acceptance"] = r.swap_acceptance;
    ojson rungs = ojson::array();
    for (size_t k = 0; k < r.rungs.size(); ++k) {
        const RungSums &s = r.rungs[k];
        double n = s.count ? static_cast<double>(s.count) : 1.0;
        ojson rj;
        rj["T"] = r.temperatures[k];
        rj["measurements"] = s.count;
        rj["energy"] = s.energy / n;
        rj["energy_sq"] = s.energy_sq / n;
        std::array<double, 3> m, m2, chi0, chik;
        for (int c = 0; c < 3; ++c) {
            m[c] = s.m[c] / n;
            m2[c] = s.m2[c] / n;
            chi0[c] = s.count ? s.chi0(c, r.class_size[c]) : 0.0;
            chik[c] = s.count ? s.chik(c, r.class_size[c]) : 0.0;
        }
        rj["m"] = m;
        rj["m2"] = m2;
        rj["chi0"] = chi0;
        rj["chik"] = chik;
        rungs.push_back(rj);
    }
    j["rungs"] = rungs;
    ojson bins = ojson::array();
    for (const auto &obs : r.tracker_bins) {
        ojson o = ojson::array();
        for (const auto &[mean, err] : obs) {
            o.push_back({mean, err});
        }
        bins.push_back(o);
    }
    j["tracker_bins"] = bins;
    return j.dump(1) + "\n";
}

namespace {

struct Cell {
    size_t config;
    uint32_t index;
    uint64_t seed;
    fs::path file;
    fs::path checkpoint;
    std::string relative;
};

struct CellOutcome {
    std::string status = "pending";
    std::string error;
    uint64_t hash = 0;
};

struct PreparedConfig {
    Lattice lattice;
    InteractionTable table;
};

std::map<std::string, std::pair<std::string, std::string>> read_manifest_cells(const fs::path &manifest) {
    std::map<std::string, std::pair<std::string, std::string>> out;
    if (!fs::exists(manifest)) {
        return out;
    }
    try {
        ojson j = ojson::parse(read_file(manifest));
        for (const auto &c : j.at("cells")) {
            out[c.at("file").get<std::string>()] = {c.at("status").get<std::string>(),
                                                    c.value("fnv1a64", std::string())};
        }
    } catch (const std::exception &) {
        out.clear();
    }
    return out;
}

SampleObservables sample_from_json(const ojson &j, uint32_t &index) {
    SampleObservables s;
    index = j.at("sample").get<uint32_t>();
    s.index = index;
    for (const auto &r : j.at("rungs")) {
        s.chi0.push_back(r.at("chi0").get<std::array<double, 3>>());
        s.chik.push_back(r.at("chik").get<std::array<double, 3>>());
        s.m2.push_back(r.at("m2").get<std::array<double, 3>>());
        s.energy.push_back(r.at("energy").get<double>());
    }
    return s;
}

}  // namespace

void write_observables_csv(const fs::path &path, const DisorderEnsemble &ens) {
    std::ostringstream os;
    os << "# excluded_samples=" << ens.excluded << "\n";
    os << "p,L,T,sample,energy,chi0_A,chi0_B,chi0_C,chik_A,chik_B,chik_C,m2_A,m2_B,m2_C,chi0,chik\n";
    for (const SampleObservables &s : ens.samples) {
        for (size_t t = 0; t < ens.temperatures.size(); ++t) {
            os << fmt(ens.p) << "," << ens.L << "," << fmt(ens.temperatures[t]) << "," << s.index << ","
               << fmt(s.energy[t]);
            for (const auto *arr : {&s.chi0[t], &s.chik[t], &s.m2[t]}) {
                for (double v : *arr) {
                    os << "," << fmt(v);
                }
            }
            os << "," << fmt((s.chi0[t][0] + s.chi0[t][1] + s.chi0[t][2]) / 3.0) << ","
               << fmt((s.chik[t][0] + s.chik[t][1] + s.chik[t][2]) / 3.0) << "\n";
        }
    }
    write_atomic(path, os.str());
}

BatchSummary run_batch(const std::vector<RunConfig> &configs, const BatchOptions &opt) {
    std::map<std::string, size_t> by_cell;
    for (size_t k = 0; k < configs.size(); ++k) {
        configs[k].validate();
        std::string cn = configs[k].cell_name();
        if (by_cell.count(cn) && !(configs[by_cell[cn]] == configs[k])) {
            throw ConfigError("two different configs write to cell " + cn);
        }
        by_cell.emplace(cn, k);
    }
    if (opt.workers == 0) {
        throw ConfigError("workers must be positive");
    }
    std::vector<size_t> unique_configs;
    for (const auto &[cn, k] : by_cell) {
        unique_configs.push_back(k);
    }

    fs::create_directories(opt.out_dir);
    fs::path manifest_path = opt.out_dir / "manifest.json";
    auto previous = read_manifest_cells(manifest_path);

    std::vector<PreparedConfig> prepared(configs.size());
    std::vector<Cell> cells;
    for (size_t k : unique_configs) {
        const RunConfig &rc = configs[k];
        prepared[k].lattice = build_lattice(LatticeSpec::square(rc.L));
        prepared[k].table = compile_interactions(prepared[k].lattice);
        fs::path dir = opt.out_dir / rc.cell_name();
        fs::create_directories(dir);
        for (uint32_t i = 0; i < rc.n_samples; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%06u", i);
            Cell c{k, i, sample_seed(rc.seed, rc.p, rc.L, i), dir / (std::string(name) + ".json"),
                   dir / (std::string(name) + ".ckpt"), rc.cell_name() + "/" + name + ".json"};
            cells.push_back(c);
        }
    }

    BatchSummary summary;
    summary.cells = static_cast<uint32_t>(cells.size());
    std::vector<CellOutcome> outcomes(cells.size());
    std::vector<char> skip(cells.size(), 0);
    for (size_t c = 0; c < cells.size(); ++c) {
        auto it = previous.find(cells[c].relative);
        if (it != previous.end() && (it->second.first == "done" || it->second.first == "unequilibrated") &&
            fs::exists(cells[c].file) && hex64(fnv1a64(read_file(cells[c].file))) == it->second.second) {
            skip[c] = 1;
            outcomes[c].status = it->second.first;
            outcomes[c].hash = fnv1a64(read_file(cells[c].file));
            summary.skipped++;
        }
    }

    auto run_cell = [&](size_t c) {
        const Cell &cell = cells[c];
        const RunConfig &rc = configs[cell.config];
        const PreparedConfig &pc = prepared[cell.config];
        CellOutcome &out = outcomes[c];
        try {
            DisorderRealization disorder = sample_disorder(pc.lattice, rc.p, cell.seed);
            SampleRunner runner(pc.lattice, pc.table, disorder, rc.ladder(), rc.settings(), cell.seed);
            if (fs::exists(cell.checkpoint)) {
                if (opt.resume) {
                    runner.load_checkpoint(cell.checkpoint.string());
                } else {
                    fs::remove(cell.checkpoint);
                }
            }
            uint64_t budget = opt.sweep_budget.value_or(UINT64_MAX);
            uint64_t used = 0;
            while (!runner.finished()) {
                if (used >= budget || (opt.stop && opt.stop->load())) {
                    runner.save_checkpoint(cell.checkpoint.string());
                    out.status = "pending";
                    return;
                }
                uint64_t chunk = std::min(opt.checkpoint_interval, budget - used);
                used += runner.advance(chunk);
                if (!runner.finished() && opt.checkpoint_interval > 0) {
                    runner.save_checkpoint(cell.checkpoint.string());
                }
            }
            std::string text = sample_json(rc, cell.index, cell.seed, runner.result());
            write_atomic(cell.file, text);
            fs::remove(cell.checkpoint);
            out.status = status_name(runner.status());
            out.hash = fnv1a64(text);
        } catch (const std::exception &e) {
            out.status = "failed";
            out.error = e.what();
        }
    };

    std::vector<size_t> todo;
    for (size_t c = 0; c < cells.size(); ++c) {
        if (!skip[c]) {
            todo.push_back(c);
        }
    }
    int64_t nt = static_cast<int64_t>(todo.size());
    int nw = static_cast<int>(opt.workers);
    if (nw > 1) {
        TSCC_OMP(parallel for schedule(dynamic, 1) num_threads(nw))
        for (int64_t k = 0; k < nt; ++k) {
            run_cell(todo[k]);
        }
    } else {
        for (int64_t k = 0; k < nt; ++k) {
            run_cell(todo[k]);
        }
    }

    // Aggregation and manifest: single-threaded, fixed order.
    ojson manifest;
    manifest["format"] = "tscc-manifest";
    manifest["version"] = 1;
    manifest["code_version"] = kCodeVersion;
    manifest["interpretation"] =
        "t_eq = 2^b equilibration sweeps (extended by the log-bin criterion up to 2^(b+cap_extra)), followed by "
        "a measurement phase of equal length";
    ojson cfgs = ojson::array();
    for (size_t k : unique_configs) {
        const RunConfig &rc = configs[k];
        cfgs.push_back({{"cell", rc.cell_name()},
                        {"name", rc.name},
                        {"p", rc.p},
                        {"L", rc.L},
                        {"n_samples", rc.n_samples},
                        {"b", rc.b},
                        {"T_min", rc.T_min},
                        {"T_max", rc.T_max},
                        {"N_T", rc.N_T},
                        {"seed", rc.seed},
                        {"measurement_interval", rc.measurement_interval},
                        {"cap_extra", rc.cap_extra}});
    }
    manifest["configs"] = cfgs;
    ojson cells_json = ojson::array();
    for (size_t c = 0; c < cells.size(); ++c) {
        const CellOutcome &o = outcomes[c];
        ojson cj{{"file", cells[c].relative},
                 {"sample", cells[c].index},
                 {"seed", cells[c].seed},
                 {"status", o.status}};
        if (o.status == "done" || o.status == "unequilibrated") {
            cj["fnv1a64"] = hex64(o.hash);
        }
        if (!o.error.empty()) {
            cj["error"] = o.error;
        }
        cells_json.push_back(cj);
        if (o.status == "done") {
            summary.done++;
        } else if (o.status == "unequilibrated") {
            summary.unequilibrated++;
        } else if (o.status == "failed") {
            summary.failed++;
        } else {
            summary.pending++;
        }
    }
    manifest["cells"] = cells_json;

    ojson files = ojson::array();
    for (size_t k : unique_configs) {
        const RunConfig &rc = configs[k];
        DisorderEnsemble ens;
        ens.p = rc.p;
        ens.L = rc.L;
        ens.temperatures = rc.ladder().temperatures;
        for (size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].config != k) {
                continue;
            }
            if (outcomes[c].status == "unequilibrated") {
                ens.excluded++;
            } else if (outcomes[c].status == "done") {
                uint32_t idx = 0;
                ens.samples.push_back(sample_from_json(ojson::parse(read_file(cells[c].file)), idx));
            }
        }
        fs::path csv = opt.out_dir / rc.cell_name() / "observables.csv";
        write_observables_csv(csv, ens);
        files.push_back({{"file", rc.cell_name() + "/observables.csv"}, {"fnv1a64", hex64(fnv1a64(read_file(csv)))}});
    }
    manifest["aggregates"] = files;

    // Cells of other configs recorded by earlier invocations stay in the manifest, so a batch run
    // in pieces ends with the same manifest as one run in full.
    if (fs::exists(manifest_path)) {
        try {
            ojson old = ojson::parse(read_file(manifest_path));
            auto cell_of = [](const std::string &file) { return file.substr(0, file.find('/')); };
            auto keep = [&](const char *section, const char *key, bool path) {
                for (const auto &e : old.at(section)) {
                    std::string k = e.at(key).get<std::string>();
                    if (!by_cell.count(path ? cell_of(k) : k)) {
                        manifest[section].push_back(e);
                    }
                }
            };
            keep("configs", "cell", false);
            keep("cells", "file", true);
            keep("aggregates", "file", true);
        } catch (const std::exception &) {
            // Unreadable manifest: only this invocation's cells are recorded.
        }
    }
    auto sort_by = [&](const char *section, const char *key) {
        auto &arr = manifest[section];
        std::vector<ojson> items(arr.begin(), arr.end());
        std::stable_sort(items.begin(), items.end(), [&](const ojson &a, const ojson &b) {
            return a.at(key).get<std::string>() < b.at(key).get<std::string>();
        });
        arr = ojson(items);
    };
    sort_by("configs", "cell");
    sort_by("cells", "file");
    sort_by("aggregates", "file");
    write_atomic(manifest_path, manifest.dump(1) + "\n");
    return summary;
}

std::vector<DisorderEnsemble> load_ensembles(const fs::path &dir) {
    std::vector<fs::path> csvs;
    if (fs::exists(dir)) {
        for (const auto &entry : fs::recursive_directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().filename() == "observables.csv") {
                csvs.push_back(entry.path());
            }
        }
    }
    std::sort(csvs.begin(), csvs.end());
    std::map<std::pair<double, int>, DisorderEnsemble> groups;
    for (const fs::path &path : csvs) {
        std::istringstream is(read_file(path));
        std::string line;
        uint32_t excluded = 0;
        std::map<std::pair<double, int>, std::map<uint64_t, std::vector<std::pair<double, SampleObservables>>>> rows;
        int ln = 0;
        std::vector<std::string> header;
        while (std::getline(is, line)) {
            ++ln;
            if (line.empty()) {
                continue;
            }
            if (line[0] == '#') {
                auto pos = line.find("excluded_samples=");
                if (pos != std::string::npos) {
                    excluded = static_cast<uint32_t>(std::stoul(line.substr(pos + 17)));
                }
                continue;
            }
            auto f = split(line, ',');
            if (header.empty()) {
                header = f;
                if (header.size() < 14 || header[0] != "p") {
                    throw AnalysisError(path.string() + ": unexpected header");
                }
                continue;
            }
            if (f.size() != header.size()) {
                throw AnalysisError(path.string() + ":" + std::to_string(ln) + ": wrong column count");
            }
            auto num = [&](size_t k) { return parse_number<double>(f[k], header[k], ln); };
            double p = num(0);
            int L = parse_number<int>(f[1], "L", ln);
            double T = num(2);
            uint64_t sample = parse_number<uint64_t>(f[3], "sample", ln);
            SampleObservables s;
            s.index = sample;
            s.energy = {num(4)};
            s.chi0 = {{num(5), num(6), num(7)}};
            s.chik = {{num(8), num(9), num(10)}};
            s.m2 = {{num(11), num(12), num(13)}};
            rows[{p, L}][sample].emplace_back(T, s);
        }
        for (auto &[key, samples] : rows) {
            DisorderEnsemble &ens = groups[key];
            ens.p = key.first;
            ens.L = key.second;
            ens.excluded += excluded;
            for (auto &[idx, per_t] : samples) {
                std::sort(per_t.begin(), per_t.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
                std::vector<double> temps;
                SampleObservables s;
                s.index = idx;
                for (auto &[T, row] : per_t) {
                    temps.push_back(T);
                    s.energy.push_back(row.energy[0]);
                    s.chi0.push_back(row.chi0[0]);
                    s.chik.push_back(row.chik[0]);
                    s.m2.push_back(row.m2[0]);
                }
                if (ens.temperatures.empty()) {
                    ens.temperatures = temps;
                } else if (temps != ens.temperatures) {
                    throw AnalysisError(path.string() + ": sample " + std::to_string(idx) +
                                        " has a different temperature set");
                }
                ens.samples.push_back(std::move(s));
            }
        }
        if (rows.empty()) {
            // Header only: a cell with no usable samples yet.
            auto name = path.parent_path().filename().string();
            double p = 0;
            int L = 0;
            if (std::sscanf(name.c_str(), "p%lf_L%d", &p, &L) == 2) {
                DisorderEnsemble &ens = groups[{p, L}];
                ens.p = p;
                ens.L = L;
                ens.excluded += excluded;
            }
        }
    }
    std::vector<DisorderEnsemble> out;
    for (auto &[key, ens] : groups) {
        out.push_back(std::move(ens));
    }
    return out;
}

AnalyzeReport analyze(const fs::path &dir, const AnalyzeOptions &opt) {
    AnalyzeReport rep;
    std::vector<DisorderEnsemble> all = load_ensembles(dir);
    if (all.empty()) {
        rep.gaps.push_back("no observables.csv under " + dir.string() + " (batch not finished?)");
    }

    fs::path manifest = dir / "manifest.json";
    for (const auto &[file, status] : read_manifest_cells(manifest)) {
        if (status.first != "done") {
            rep.gaps.push_back(file + ": " + status.first);
        }
    }

    std::map<double, std::vector<DisorderEnsemble>> by_p;
    for (DisorderEnsemble &e : all) {
        if (e.samples.size() < 2) {
            rep.gaps.push_back("p=" + fmt(e.p) + " L=" + std::to_string(e.L) + ": " + std::to_string(e.samples.size()) +
                               " usable sample(s), at least 2 needed");
            continue;
        }
        by_p[e.p].push_back(std::move(e));
    }

    std::ostringstream crossings_csv, sens_csv;
    crossings_csv << "p,status,T_c,sigma_Tc,found_fraction,sizes,largest_L1,largest_L2,largest_T,largest_sigma,nu,note\n";
    sens_csv << "p,sublattice,status,T_c,sigma_Tc\n";
    for (auto &[p, ensembles] : by_p) {
        if (ensembles.size() < 2) {
            rep.gaps.push_back("p=" + fmt(p) + ": only L=" + std::to_string(ensembles[0].L) +
                               "; no crossing attempted");
            continue;
        }
        CrossingOptions co;
        co.n_resample = opt.n_resample;
        co.seed = hash_words({opt.seed, double_bits(p)});
        CrossingEstimate est;
        try {
            est = find_crossing(ensembles, co);
        } catch (const AnalysisError &e) {
            rep.gaps.push_back("p=" + fmt(p) + ": " + e.what());
            continue;
        }
        std::vector<Curve> curves;
        for (const DisorderEnsemble &e : ensembles) {
            curves.push_back(xi_over_L_curve(e, Sublattice::Average, opt.n_resample, co.seed));
        }
        if (curves.size() >= 3 && est.status != CrossingStatus::NoCrossing) {
            CollapseResult cr = scaling_collapse(curves, est.Tc);
            if (cr.status == CollapseStatus::Ok) {
                est.nu = cr.nu;
            }
        }
        std::string sizes;
        for (const DisorderEnsemble &e : ensembles) {
            sizes += (sizes.empty() ? "" : " ") + std::to_string(e.L);
        }
        std::string note;
        if (est.status == CrossingStatus::NoCrossing) {
            note = "disordered at all simulated T in [" + fmt(ensembles[0].temperatures.front()) + " " +
                   fmt(ensembles[0].temperatures.back()) + "]";
        }
        const PairCrossing &lp = *est.largest_pair;
        crossings_csv << fmt(p) << "," << crossing_status_name(est.status) << "," << fmt(est.Tc) << ","
                      << fmt(est.sigma_Tc) << "," << fmt(est.found_fraction) << "," << sizes << "," << lp.L1 << ","
                      << lp.L2 << "," << fmt(lp.T) << "," << fmt(lp.sigma) << ","
                      << (est.nu ? fmt(*est.nu) : std::string("nan")) << "," << note << "\n";
        rep.crossings.push_back(est);
        if (opt.sensitivity) {
            SensitivityReport sr = sublattice_sensitivity(ensembles, co);
            for (Sublattice m : {Sublattice::Average, Sublattice::A, Sublattice::B, Sublattice::C}) {
                const CrossingEstimate &e = sr.estimates[static_cast<int>(m)];
                sens_csv << fmt(p) << "," << sublattice_name(m) << "," << crossing_status_name(e.status) << ","
                         << fmt(e.Tc) << "," << fmt(e.sigma_Tc) << "\n";
            }
            sens_csv << "# p=" << fmt(p) << " max_pull=" << fmt(sr.max_pull)
                     << (sr.consistent ? " consistent" : " inconsistent") << "\n";
        }
        if (opt.svg) {
            char name[64];
            std::snprintf(name, sizeof(name), "crossing_p%.4f.svg", p);
            write_atomic(dir / name, crossing_svg(curves, est, "xi_L/L at p = " + fmt(p)));
        }
    }
    write_atomic(dir / "crossings.csv", crossings_csv.str());
    if (opt.sensitivity) {
        write_atomic(dir / "sensitivity.csv", sens_csv.str());
    }

    ojson tj;
    std::ostringstream boundary_csv;
    boundary_csv << "p,T_c,sigma\n";
    try {
        rep.boundary = build_phase_boundary(rep.crossings);
        for (const BoundaryKnot &k : rep.boundary->knots()) {
            boundary_csv << fmt(k.p) << "," << fmt(k.Tc) << "," << fmt(k.sigma) << "\n";
        }
        rep.threshold = intersect_nishimori(*rep.boundary, opt.n_resample, opt.seed);
        rep.threshold_status = "ok";
        tj["p_c"] = rep.threshold->p_c;
        tj["sigma"] = rep.threshold->sigma;
        tj["bracket"] = {rep.threshold->p_lo, rep.threshold->p_hi};
        tj["resamples"] = rep.threshold->resamples;
        tj["resamples_bracketed"] = rep.threshold->resamples_bracketed;
    } catch (const AnalysisError &e) {
        rep.threshold_status = e.what();
    }
    tj["status"] = rep.threshold_status;
    ojson knots = ojson::array();
    if (rep.boundary) {
        for (const BoundaryKnot &k : rep.boundary->knots()) {
            knots.push_back({{"p", k.p}, {"T_c", k.Tc}, {"sigma", k.sigma}});
        }
    }
    tj["boundary"] = knots;
    write_atomic(dir / "boundary.csv", boundary_csv.str());
    write_atomic(dir / "threshold.json", tj.dump(1) + "\n");
    if (opt.svg && rep.boundary) {
        write_atomic(dir / "phase_diagram.svg",
                     phase_diagram_svg(*rep.boundary, rep.threshold ? &*rep.threshold : nullptr));
    }
    std::ostringstream gaps;
    for (const std::string &g : rep.gaps) {
        gaps << g << "\n";
    }
    write_atomic(dir / "gaps.txt", gaps.str());
    return rep;
}

std::string batch_report(const fs::path &dir) {
    fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) {
        throw std::runtime_error("no manifest.json in " + dir.string());
    }
    ojson j = ojson::parse(read_file(manifest));
    std::ostringstream os;
    os << j.value("code_version", std::string("?")) << "\n";
    std::map<std::string, std::map<std::string, int>> counts;
    std::vector<std::string> errors;
    for (const auto &c : j.at("cells")) {
        std::string file = c.at("file").get<std::string>();
        std::string cell = file.substr(0, file.find('/'));
        counts[cell][c.at("status").get<std::string>()]++;
        if (c.contains("error")) {
            errors.push_back(file + ": " + c.at("error").get<std::string>());
        }
    }
    for (const auto &[cell, st] : counts) {
        os << cell << ":";
        for (const auto &[s, n] : st) {
            os << " " << s << "=" << n;
        }
        os << "\n";
    }
    for (const std::string &e : errors) {
        os << "error " << e << "\n";
    }
    return os.str();
}

}  // namespace tscc
