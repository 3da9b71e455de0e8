#pragma once

// Data ingestion, run configuration and the file-based pipeline
// estimate -> simulate -> price -> optimize -> frontier.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cmc/cdx_pricing.hpp"
#include "cmc/estimation.hpp"

namespace cmc {

struct IngestReport {
    int firms = 0;
    int periods = 0;
    int transitions = 0;
    int masked_cells = 0;
};

// S&P-style preset: AAA,AA -> 1; A -> 2; BBB -> 3; BB,B -> 4;
// CCC,CC,C -> 5; D -> 6 (M = 5).
std::map<std::string, int> sp6_clubbing();
// "1" -> 1, ..., "M+1" -> M+1, for panels that store class indices.
std::map<std::string, int> identity_clubbing(int m_nondefault);

// Reads a rating-history CSV with header firm_id,sector,year,rating into a
// panel. Firms are ordered lexicographically by id; unrated firm-years are
// masked. Unknown rating labels, duplicate or contradictory records fail
// with the offending line number. n_sectors = 0 derives S from the data.
RatingPanel ingest(const std::string& csv_path, const std::map<std::string, int>& clubbing,
                   const std::map<std::string, int>& sector_map = {}, int n_sectors = 0,
                   IngestReport* report = nullptr);

// Writes a panel in the ingest format (ratings as class indices, years
// 1..T). Re-ingesting with an identity clubbing map restores the panel.
void export_panel_csv(const RatingPanel& panel, std::ostream& out);

// One tranche as configured: empty members means the whole universe, and a
// missing spread means "price it fair first".
struct TrancheConfig {
    CdxTranche tranche;
    bool spread_given = false;
};

struct RunConfig {
    std::string output_dir = "out";
    std::uint64_t config_fingerprint = 0;

    // data
    std::string ratings_csv;
    std::map<std::string, int> clubbing; // empty -> sp6 preset
    std::map<std::string, int> sector_map;
    int n_sectors = 0; // 0 -> derived from the data

    // model input for simulate/price/optimize
    std::string params_file;

    OptimizerConfig optimizer;

    // simulation
    std::uint64_t sim_seed = 1;
    int horizon = 10;
    int n_scenarios = 10000;
    std::vector<FirmState> initial;
    std::vector<std::string> initial_ids;
    std::string scenario_file; // default <output_dir>/scenarios.cmcs
    bool export_csv = false;

    // pricing
    RateCurve curve;
    std::vector<TrancheConfig> tranches;
    double spread_tol = 1e-8;
    int histogram_bins = 50;

    // portfolio
    double target_mean = 0.0;
    std::vector<double> alphas{0.9};
    double bound_lo = -0.5;
    double bound_hi = 0.5;
    std::vector<double> frontier_grid;

    double marginal_tol = 1e-8;
};

RunConfig load_config(const std::string& path);

// Executes one subcommand (estimate, simulate, price, optimize, frontier),
// writing its artifacts under config.output_dir. Returns the process exit
// status: 0 success, 2 config error, 3 data error, 4 numerical failure.
// Failures print one line "CLASS: detail" to stderr.
int run(const std::string& command, const RunConfig& config);

} // namespace cmc
