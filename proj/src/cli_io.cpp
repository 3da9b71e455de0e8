#include "cmc/cli_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmc/errors.hpp"
#include "cmc/hash.hpp"
#include "cmc/portfolio_opt.hpp"
#include "cmc/ratings_core.hpp"
#include "cmc/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

int parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": '" + s + "' is not an integer");
    }
}

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Short tag for file names and JSON keys (0.9 -> "0.9").
std::string format_alpha(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

std::map<std::string, int> sp6_clubbing() {
    return {{"AAA", 1}, {"AA", 1}, {"A", 2},  {"BBB", 3}, {"BB", 4},
            {"B", 4},   {"CCC", 5}, {"CC", 5}, {"C", 5},   {"D", 6}};
}

std::map<std::string, int> identity_clubbing(int m_nondefault) {
    std::map<std::string, int> out;
    for (int c = 1; c <= m_nondefault + 1; ++c)
        out[std::to_string(c)] = c;
    return out;
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

RatingPanel ingest(const std::string& csv_path, const std::map<std::string, int>& clubbing,
                   const std::map<std::string, int>& sector_map, int n_sectors,
                   IngestReport* report) {
    if (clubbing.empty())
        throw DataError("ingest: empty clubbing map");
    int n_classes = 0;
    for (const auto& [label, cls] : clubbing) {
        if (cls < 1)
            throw DataError("ingest: clubbing maps '" + label + "' to class " +
                            std::to_string(cls) + " < 1");
        n_classes = std::max(n_classes, cls);
    }
    if (n_classes < 2)
        throw DataError("ingest: clubbing must define at least two classes");

    std::ifstream in(csv_path);
    if (!in)
        throw DataError("ingest: cannot open '" + csv_path + "'");

    std::string line;
    if (!std::getline(in, line))
        throw DataError("ingest: '" + csv_path + "' is empty");
    {
        const auto header = split_csv_line(line);
        if (header.size() != 4 || header[0] != "firm_id" || header[1] != "sector" ||
            header[2] != "year" || header[3] != "rating")
            throw DataError("ingest: line 1: expected header firm_id,sector,year,rating");
    }

    struct Record {
        int sector;
        int year;
        int rating;
        int line_no;
    };
    std::map<std::string, std::vector<Record>> by_firm; // lexicographic firm order
    int min_year = 0, max_year = 0;
    bool any = false;
    int line_no = 1;
    int max_sector = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto fields = split_csv_line(line);
        const std::string where = "ingest: line " + std::to_string(line_no);
        if (fields.size() != 4)
            throw DataError(where + ": expected 4 fields, got " +
                            std::to_string(fields.size()));
        const std::string& firm = fields[0];
        if (firm.empty())
            throw DataError(where + ": empty firm_id");
        int sector;
        if (auto it = sector_map.find(fields[1]); it != sector_map.end())
            sector = it->second;
        else
            sector = parse_int(fields[1], where + ": sector");
        if (sector < 1)
            throw DataError(where + ": sector " + std::to_string(sector) + " < 1");
        const int year = parse_int(fields[2], where + ": year");
        const auto club = clubbing.find(fields[3]);
        if (club == clubbing.end())
            throw DataError(where + ": unknown rating label '" + fields[3] + "'");
        by_firm[firm].push_back({sector, year, club->second, line_no});
        max_sector = std::max(max_sector, sector);
        if (!any) {
            min_year = max_year = year;
            any = true;
        } else {
            min_year = std::min(min_year, year);
            max_year = std::max(max_year, year);
        }
    }
    if (!any)
        throw DataError("ingest: '" + csv_path + "' has no records");
    if (n_sectors == 0)
        n_sectors = max_sector;
    if (max_sector > n_sectors)
        throw DataError("ingest: sector " + std::to_string(max_sector) + " exceeds S = " +
                        std::to_string(n_sectors));

    RatingPanel panel;
    panel.n_firms = static_cast<int>(by_firm.size());
    panel.n_periods = max_year - min_year + 1;
    panel.m_nondefault = n_classes - 1;
    panel.n_sectors = n_sectors;
    panel.ratings.assign(static_cast<std::size_t>(panel.n_firms) * panel.n_periods, 0);
    panel.sectors.resize(panel.n_firms);
    panel.firm_ids.reserve(panel.n_firms);

    int f = 0;
    for (const auto& [firm, records] : by_firm) {
        panel.firm_ids.push_back(firm);
        panel.sectors[f] = records.front().sector;
        for (const auto& rec : records) {
            const std::string where = "ingest: line " + std::to_string(rec.line_no);
            if (rec.sector != panel.sectors[f])
                throw DataError(where + ": firm '" + firm + "' changes sector");
            const int t = rec.year - min_year + 1;
            if (panel.at(f, t) != 0)
                throw DataError(where + ": duplicate observation for firm '" + firm +
                                "', year " + std::to_string(rec.year));
            panel.set(f, t, rec.rating);
        }
        ++f;
    }

    const auto violations = validate_panel(panel);
    if (!violations.empty())
        throw DataError("ingest: '" + csv_path + "': " + violations.front());

    if (report) {
        report->firms = panel.n_firms;
        report->periods = panel.n_periods;
        report->transitions = 0;
        report->masked_cells = 0;
        for (int i = 0; i < panel.n_firms; ++i)
            for (int t = 1; t <= panel.n_periods; ++t) {
                if (panel.masked(i, t))
                    ++report->masked_cells;
                if (t > 1 && !panel.masked(i, t) && !panel.masked(i, t - 1) &&
                    panel.at(i, t - 1) != panel.m_nondefault + 1)
                    ++report->transitions;
            }
    }
    return panel;
}

void export_panel_csv(const RatingPanel& panel, std::ostream& out) {
    out << "firm_id,sector,year,rating\n";
    for (int f = 0; f < panel.n_firms; ++f) {
        const std::string id =
            panel.firm_ids.empty() ? "F" + std::to_string(f) : panel.firm_ids[f];
        for (int t = 1; t <= panel.n_periods; ++t) {
            if (panel.masked(f, t))
                continue;
            out << id << ',' << panel.sectors[f] << ',' << t << ',' << panel.at(f, t) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::vector<FirmState> load_initial_csv(const std::string& path,
                                        std::vector<std::string>* ids) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open initial-state file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        split_csv_line(line) != std::vector<std::string>{"firm_id", "sector", "rating"})
        throw DataError("initial states '" + path + "': expected header firm_id,sector,rating");
    std::vector<FirmState> states;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto fields = split_csv_line(line);
        const std::string where = "initial states '" + path + "' line " +
                                  std::to_string(line_no);
        if (fields.size() != 3)
            throw DataError(where + ": expected 3 fields");
        if (ids)
            ids->push_back(fields[0]);
        states.push_back({parse_int(fields[2], where + ": rating"),
                          parse_int(fields[1], where + ": sector")});
    }
    return states;
}

std::map<std::string, int> parse_label_map(const json& node, const char* what) {
    std::map<std::string, int> out;
    if (!node.is_object())
        throw ConfigError(std::string("config: ") + what + " must be an object");
    for (const auto& [key, value] : node.items())
        out[key] = value.get<int>();
    return out;
}

RateCurve parse_curve(const json& node) {
    RateCurve curve;
    if (node.contains("rates")) {
        curve.rates = node.at("rates").get<std::vector<double>>();
        if (node.contains("discounts")) {
            curve.discounts = node.at("discounts").get<std::vector<double>>();
        } else {
            double acc = 1.0;
            for (double r : curve.rates) {
                acc /= 1.0 + r;
                curve.discounts.push_back(acc);
            }
        }
    } else {
        const double rate = node.at("flat_rate").get<double>();
        const double disc = node.value("discount_rate", rate);
        const int horizon = node.at("horizon").get<int>();
        curve = RateCurve::flat(rate, disc, horizon);
    }
    const auto report = validate_curve(curve);
    if (!report.empty())
        throw ConfigError("config: rate_curve: " + report.front());
    return curve;
}

} // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }

    RunConfig cfg;
    cfg.config_fingerprint = fnv1a64(text);
    try {
        cfg.output_dir = j.value("output_dir", cfg.output_dir);

        if (j.contains("data")) {
            const auto& d = j["data"];
            cfg.ratings_csv = d.value("ratings_csv", "");
            if (d.contains("clubbing")) {
                if (d["clubbing"].is_string()) {
                    const std::string preset = d["clubbing"].get<std::string>();
                    if (preset != "sp6")
                        throw ConfigError("config: unknown clubbing preset '" + preset + "'");
                    cfg.clubbing = sp6_clubbing();
                } else {
                    cfg.clubbing = parse_label_map(d["clubbing"], "data.clubbing");
                }
            }
            if (d.contains("sectors"))
                cfg.sector_map = parse_label_map(d["sectors"], "data.sectors");
            cfg.n_sectors = d.value("n_sectors", 0);
        }

        if (j.contains("model"))
            cfg.params_file = j["model"].value("params_file", "");

        if (j.contains("optimizer")) {
            const auto& o = j["optimizer"];
            cfg.optimizer.population = o.value("population", cfg.optimizer.population);
            cfg.optimizer.iterations = o.value("iterations", cfg.optimizer.iterations);
            cfg.optimizer.restarts = o.value("restarts", cfg.optimizer.restarts);
            cfg.optimizer.seed = o.value("seed", cfg.optimizer.seed);
            cfg.optimizer.penalty_weight = o.value("penalty_weight", cfg.optimizer.penalty_weight);
            cfg.optimizer.tolerance = o.value("tolerance", cfg.optimizer.tolerance);
        }

        if (j.contains("simulation")) {
            const auto& s = j["simulation"];
            cfg.sim_seed = s.value("seed", cfg.sim_seed);
            cfg.horizon = s.value("horizon", cfg.horizon);
            cfg.n_scenarios = s.value("n_scenarios", cfg.n_scenarios);
            cfg.scenario_file = s.value("scenario_file", "");
            cfg.export_csv = s.value("export_csv", false);
            if (s.contains("initial")) {
                if (s["initial"].is_string()) {
                    cfg.initial = load_initial_csv(s["initial"].get<std::string>(),
                                                   &cfg.initial_ids);
                } else {
                    for (const auto& firm : s["initial"]) {
                        cfg.initial.push_back({firm.at("rating").get<int>(),
                                               firm.at("sector").get<int>()});
                        cfg.initial_ids.push_back(firm.value("id", ""));
                    }
                }
            }
        }

        if (j.contains("rate_curve"))
            cfg.curve = parse_curve(j["rate_curve"]);

        if (j.contains("tranches")) {
            for (const auto& tj : j["tranches"]) {
                TrancheConfig tc;
                tc.tranche.name = tj.value("name", "tranche" +
                                                       std::to_string(cfg.tranches.size()));
                tc.tranche.attach = tj.at("attach").get<double>();
                tc.tranche.detach = tj.at("detach").get<double>();
                tc.tranche.maturity = tj.at("maturity").get<int>();
                tc.tranche.recovery = tj.at("recovery").get<double>();
                tc.tranche.notional0 = tj.value("notional", 1.0);
                tc.tranche.upfront = tj.value("upfront", 0.0);
                if (tj.contains("spread")) {
                    tc.tranche.spread = tj["spread"].get<double>();
                    tc.spread_given = true;
                }
                if (tj.contains("members") && !tj["members"].is_string())
                    tc.tranche.members = tj["members"].get<std::vector<int>>();
                cfg.tranches.push_back(std::move(tc));
            }
        }

        if (j.contains("portfolio")) {
            const auto& p = j["portfolio"];
            cfg.target_mean = p.value("target_mean", 0.0);
            if (p.contains("alphas"))
                cfg.alphas = p["alphas"].get<std::vector<double>>();
            if (p.contains("bounds")) {
                const auto b = p["bounds"].get<std::vector<double>>();
                if (b.size() != 2)
                    throw ConfigError("config: portfolio.bounds must be [lo, hi]");
                cfg.bound_lo = b[0];
                cfg.bound_hi = b[1];
            }
            if (p.contains("frontier_grid"))
                cfg.frontier_grid = p["frontier_grid"].get<std::vector<double>>();
        }

        if (j.contains("tolerances")) {
            const auto& t = j["tolerances"];
            cfg.spread_tol = t.value("spread_tol", cfg.spread_tol);
            cfg.marginal_tol = t.value("marginal_tol", cfg.marginal_tol);
            cfg.histogram_bins = t.value("histogram_bins", cfg.histogram_bins);
        }
    } catch (const json::exception& e) {
        throw ConfigError("config: '" + path + "': " + e.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

json artifact_header(const RunConfig& cfg, std::uint64_t seed) {
    json j;
    j["config_fingerprint"] = to_hex(cfg.config_fingerprint);
    j["seed"] = seed;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw DataError("write to '" + path.string() + "' failed");
}

ModelParams load_params_checked(const RunConfig& cfg) {
    if (cfg.params_file.empty())
        throw ConfigError("config: model.params_file is required for this command");
    std::ifstream in(cfg.params_file);
    if (!in)
        throw ConfigError("config: cannot open params file '" + cfg.params_file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ModelParams params;
    try {
        params = params_from_json(buf.str());
    } catch (const std::exception& e) {
        throw DataError("params file '" + cfg.params_file + "': " + e.what());
    }
    const auto report = validate(params, cfg.marginal_tol);
    if (!report.empty())
        throw DataError("params file '" + cfg.params_file + "': " + report.front());
    return params;
}

ScenarioSet load_set(const RunConfig& cfg) {
    const std::string path = cfg.scenario_file.empty()
                                 ? (fs::path(cfg.output_dir) / "scenarios.cmcs").string()
                                 : cfg.scenario_file;
    return load_scenarios(path);
}

CdxTranche resolve_tranche(const TrancheConfig& tc, int n_firms) {
    CdxTranche tranche = tc.tranche;
    if (tranche.members.empty()) {
        tranche.members.resize(n_firms);
        for (int f = 0; f < n_firms; ++f)
            tranche.members[f] = f;
    }
    const auto report = validate_tranche(tranche, n_firms);
    if (!report.empty())
        throw ConfigError("config: " + report.front());
    return tranche;
}

void cmd_estimate(const RunConfig& cfg) {
    if (cfg.ratings_csv.empty())
        throw ConfigError("config: data.ratings_csv is required for estimate");
    const auto clubbing = cfg.clubbing.empty() ? sp6_clubbing() : cfg.clubbing;
    IngestReport report;
    const RatingPanel panel =
        ingest(cfg.ratings_csv, clubbing, cfg.sector_map, cfg.n_sectors, &report);
    const TransitionCounts counts = count_transitions(panel);
    const TransitionMatrix p = estimate_transition_matrix(counts);
    const EstimationResult result = estimate_parameters(panel, p, cfg.optimizer);

    json out = json::parse(estimation_result_to_json(result));
    out.update(artifact_header(cfg, cfg.optimizer.seed));
    out["P"] = result.params.p.data();
    out["ingest"] = {{"firms", report.firms},
                     {"periods", report.periods},
                     {"transitions", report.transitions},
                     {"masked_cells", report.masked_cells}};
    write_text(fs::path(cfg.output_dir) / "estimation.json", out.dump(2) + "\n");
    write_text(fs::path(cfg.output_dir) / "model.json", params_to_json(result.params) + "\n");
}

void cmd_simulate(const RunConfig& cfg) {
    const ModelParams params = load_params_checked(cfg);
    if (cfg.initial.empty())
        throw ConfigError("config: simulation.initial is required for simulate");
    for (const auto& st : cfg.initial)
        if (st.rating < 1 || st.rating > params.m() + 1 || st.sector < 1 ||
            st.sector > params.sectors())
            throw ConfigError("config: initial state outside the model's class/sector range");

    ScenarioSet set = simulate(params, cfg.initial, cfg.horizon, cfg.n_scenarios, cfg.sim_seed);
    set.firm_ids = cfg.initial_ids;
    if (!set.firm_ids.empty() && set.firm_ids.size() != set.firms.size())
        set.firm_ids.clear();

    const std::string path = cfg.scenario_file.empty()
                                 ? (fs::path(cfg.output_dir) / "scenarios.cmcs").string()
                                 : cfg.scenario_file;
    save_scenarios(set, path);

    json meta = artifact_header(cfg, cfg.sim_seed);
    meta["n_scenarios"] = set.n_scenarios;
    meta["T"] = set.horizon;
    meta["M"] = set.m_nondefault;
    meta["n_firms"] = set.n_firms();
    meta["params_fingerprint"] = to_hex(set.params_fingerprint);
    meta["file"] = path;
    write_text(fs::path(cfg.output_dir) / "scenarios.meta.json", meta.dump(2) + "\n");

    if (cfg.export_csv) {
        std::ofstream csv(fs::path(cfg.output_dir) / "scenarios.csv", std::ios::binary);
        export_scenarios_csv(set, csv);
    }
}

void cmd_price(const RunConfig& cfg) {
    if (cfg.tranches.empty())
        throw ConfigError("config: no tranches configured");
    if (cfg.curve.horizon() == 0)
        throw ConfigError("config: rate_curve is required for price");
    const ScenarioSet set = load_set(cfg);
    for (const auto& tc : cfg.tranches)
        if (tc.tranche.maturity > cfg.curve.horizon())
            throw ConfigError("config: tranche '" + tc.tranche.name +
                              "' matures beyond the rate curve");

    json out = artifact_header(cfg, set.seed);
    out["params_fingerprint"] = to_hex(set.params_fingerprint);
    json tranches = json::array();
    std::ostringstream csv;
    csv << "name,fair_spread,spread_used,mean_return\n";
    for (const auto& tc : cfg.tranches) {
        CdxTranche tranche = resolve_tranche(tc, set.n_firms());
        const double fair = fair_spread(tranche, set, cfg.curve, cfg.spread_tol);
        tranche.spread = tc.spread_given ? tranche.spread : fair;
        const ReturnDistribution dist = scenario_returns(tranche, set, cfg.curve);
        const double mean_ret =
            std::accumulate(dist.returns.begin(), dist.returns.end(), 0.0) /
            dist.returns.size();

        json tj;
        tj["name"] = tranche.name;
        tj["attach"] = tranche.attach;
        tj["detach"] = tranche.detach;
        tj["maturity"] = tranche.maturity;
        tj["fair_spread"] = fair;
        tj["spread_used"] = tranche.spread;
        tj["mean_return"] = mean_ret;
        for (double alpha : cfg.alphas) {
            const RiskStats stats = risk_stats(dist, alpha, cfg.histogram_bins);
            tj["stats"][format_alpha(alpha)] = {{"mean_loss", stats.mean},
                                                 {"var", stats.var},
                                                 {"cvar", stats.cvar}};
        }
        tranches.push_back(tj);

        const RiskStats stats = risk_stats(dist, cfg.alphas.front(), cfg.histogram_bins);
        std::ostringstream hist;
        hist << "# config_fingerprint=" << to_hex(cfg.config_fingerprint) << ",seed="
             << set.seed << "\n";
        write_histogram_csv(stats, hist);
        write_text(fs::path(cfg.output_dir) / ("hist_" + sanitize(tranche.name) + ".csv"),
                   hist.str());

        csv << tranche.name << ',' << format_double(fair) << ','
            << format_double(tranche.spread) << ',' << format_double(mean_ret) << '\n';
    }
    out["tranches"] = tranches;
    write_text(fs::path(cfg.output_dir) / "spreads.json", out.dump(2) + "\n");
    write_text(fs::path(cfg.output_dir) / "spreads.csv",
               "# config_fingerprint=" + to_hex(cfg.config_fingerprint) + ",seed=" +
                   std::to_string(set.seed) + "\n" + csv.str());
}

// Return matrix for the configured tranche menu; tranches without a
// configured spread are priced fair first.
CvarProblem build_problem(const RunConfig& cfg, const ScenarioSet& set,
                          std::vector<std::string>* names) {
    if (cfg.tranches.empty())
        throw ConfigError("config: no tranches configured");
    if (cfg.curve.horizon() == 0)
        throw ConfigError("config: rate_curve is required");
    CvarProblem problem;
    problem.n_scenarios = set.n_scenarios;
    problem.n_assets = static_cast<int>(cfg.tranches.size());
    problem.returns.resize(static_cast<std::size_t>(set.n_scenarios) * cfg.tranches.size());
    problem.target_mean = cfg.target_mean;
    problem.lower.assign(problem.n_assets, cfg.bound_lo);
    problem.upper.assign(problem.n_assets, cfg.bound_hi);
    problem.alpha = cfg.alphas.front();
    for (std::size_t i = 0; i < cfg.tranches.size(); ++i) {
        CdxTranche tranche = resolve_tranche(cfg.tranches[i], set.n_firms());
        if (tranche.maturity > cfg.curve.horizon())
            throw ConfigError("config: tranche '" + tranche.name +
                              "' matures beyond the rate curve");
        if (!cfg.tranches[i].spread_given)
            tranche.spread = fair_spread(tranche, set, cfg.curve, cfg.spread_tol);
        if (names)
            names->push_back(tranche.name);
        const ReturnDistribution dist = scenario_returns(tranche, set, cfg.curve);
        for (int s = 0; s < set.n_scenarios; ++s)
            problem.returns[static_cast<std::size_t>(s) * problem.n_assets + i] =
                dist.returns[s];
    }
    return problem;
}

json solution_json(const CvarSolution& sol, const std::vector<std::string>& names,
                   double alpha, double target_mean) {
    json j;
    j["alpha"] = alpha;
    j["target_mean"] = target_mean;
    j["status"] = sol.status;
    j["achieved_mean"] = sol.achieved_mean;
    j["var"] = sol.var;
    j["cvar"] = sol.cvar;
    j["lp_objective"] = sol.lp_objective;
    j["optimality_gap"] = sol.optimality_gap;
    json weights = json::array();
    for (std::size_t i = 0; i < sol.weights.size(); ++i)
        weights.push_back({{"asset", i}, {"name", names[i]}, {"weight", sol.weights[i]}});
    j["weights"] = weights;
    return j;
}

void cmd_optimize(const RunConfig& cfg) {
    const ScenarioSet set = load_set(cfg);
    std::vector<std::string> names;
    CvarProblem problem = build_problem(cfg, set, &names);

    for (double alpha : cfg.alphas) {
        problem.alpha = alpha;
        const CvarSolution sol = optimize_portfolio(problem);

        json out = artifact_header(cfg, set.seed);
        out.update(solution_json(sol, names, alpha, cfg.target_mean));
        const std::string tag = format_alpha(alpha);
        write_text(fs::path(cfg.output_dir) / ("portfolio_alpha_" + tag + ".json"),
                   out.dump(2) + "\n");

        std::ostringstream wcsv;
        wcsv << "# config_fingerprint=" << to_hex(cfg.config_fingerprint) << ",seed="
             << set.seed << "\nasset,name,weight\n";
        for (std::size_t i = 0; i < sol.weights.size(); ++i)
            wcsv << i << ',' << names[i] << ',' << format_double(sol.weights[i]) << '\n';
        write_text(fs::path(cfg.output_dir) / ("weights_alpha_" + tag + ".csv"), wcsv.str());

        // Loss histogram of the optimized portfolio.
        ReturnDistribution port;
        port.returns.resize(problem.n_scenarios);
        for (int s = 0; s < problem.n_scenarios; ++s) {
            double r = 0.0;
            for (int i = 0; i < problem.n_assets; ++i)
                r += sol.weights[i] * problem.ret(s, i);
            port.returns[s] = r;
        }
        const RiskStats stats = risk_stats(port, alpha, cfg.histogram_bins);
        std::ostringstream hist;
        hist << "# config_fingerprint=" << to_hex(cfg.config_fingerprint) << ",seed="
             << set.seed << "\n";
        write_histogram_csv(stats, hist);
        write_text(fs::path(cfg.output_dir) / ("portfolio_hist_alpha_" + tag + ".csv"),
                   hist.str());
    }
}

void cmd_frontier(const RunConfig& cfg) {
    const ScenarioSet set = load_set(cfg);
    std::vector<std::string> names;
    CvarProblem problem = build_problem(cfg, set, &names);

    std::vector<double> grid = cfg.frontier_grid;
    if (grid.empty()) {
        // Default sweep between the lowest and highest single-asset mean.
        std::vector<double> mu(problem.n_assets, 0.0);
        for (int s = 0; s < problem.n_scenarios; ++s)
            for (int i = 0; i < problem.n_assets; ++i)
                mu[i] += problem.ret(s, i);
        for (double& v : mu)
            v /= problem.n_scenarios;
        const auto [lo, hi] = std::minmax_element(mu.begin(), mu.end());
        for (int k = 0; k < 9; ++k)
            grid.push_back(*lo + (*hi - *lo) * k / 8.0);
    }

    const auto frontier = efficient_frontier(problem, grid);

    json out = artifact_header(cfg, set.seed);
    out["alpha"] = problem.alpha;
    json points = json::array();
    std::ostringstream csv;
    csv << "# config_fingerprint=" << to_hex(cfg.config_fingerprint) << ",seed=" << set.seed
        << "\ntarget_mean,feasible,cvar,var,achieved_mean\n";
    for (const auto& point : frontier) {
        json pj;
        pj["target_mean"] = point.target_mean;
        pj["feasible"] = point.feasible;
        if (point.feasible)
            pj["solution"] = solution_json(point.solution, names, problem.alpha,
                                           point.target_mean);
        else
            pj["note"] = point.note;
        points.push_back(pj);
        csv << format_double(point.target_mean) << ',' << (point.feasible ? 1 : 0) << ',';
        if (point.feasible)
            csv << format_double(point.solution.cvar) << ','
                << format_double(point.solution.var) << ','
                << format_double(point.solution.achieved_mean);
        else
            csv << ",,";
        csv << '\n';
    }
    out["points"] = points;
    write_text(fs::path(cfg.output_dir) / "frontier.json", out.dump(2) + "\n");
    write_text(fs::path(cfg.output_dir) / "frontier.csv", csv.str());
}

} // namespace

int run(const std::string& command, const RunConfig& config) {
    try {
        fs::create_directories(config.output_dir);
        if (command == "estimate")
            cmd_estimate(config);
        else if (command == "simulate")
            cmd_simulate(config);
        else if (command == "price")
            cmd_price(config);
        else if (command == "optimize")
            cmd_optimize(config);
        else if (command == "frontier")
            cmd_frontier(config);
        else
            throw ConfigError("unknown command '" + command + "'");
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "CONFIG_ERROR: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "DATA_ERROR: " << e.what() << "\n";
        return 3;
    } catch (const EmptyRow& e) {
        std::cerr << "DATA_ERROR: " << e.what() << "\n";
        return 3;
    } catch (const UnknownFirm& e) {
        std::cerr << "DATA_ERROR: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "NUMERIC_ERROR: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "INTERNAL_ERROR: " << e.what() << "\n";
        return 4;
    }
}

} // namespace cmc
