#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cfdsim/common.hpp"
#include "cfdsim/contracts.hpp"
#include "cfdsim/csv.hpp"
#include "cfdsim/finance.hpp"
#include "cfdsim/riskmetrics.hpp"
#include "cfdsim/synth.hpp"
#include "cfdsim/timeseries.hpp"
#include "cfdsim/version.hpp"

namespace cfdsim {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct ParkFileConfig {
    std::string id;
    std::filesystem::path csv;
    double capacity_mw = 0.0;
    int commissioning_year = 0;
};

struct DataConfig {
    enum class Source { Synthetic, Csv };
    Source source = Source::Synthetic;
    SynthConfig synth;
    std::filesystem::path price_csv;
    std::filesystem::path fleet_csv;
    std::vector<ParkFileConfig> parks;
};

struct GridConfig {
    std::vector<double> capex_axis;  // €/kW
    std::vector<double> opex_axis;   // €/kW a
};

struct ScenarioConfig {
    std::string name;
    std::uint64_t seed = 0;
    DataConfig data;
    std::vector<ContractSpec> contracts;  // kept in canonical figure order
    CostParams costs;
    EquilibriumOptions solver;
    std::size_t min_valid_hours = 8000;
    std::string park_weighting = "simple";  // or "capacity"
    std::filesystem::path output_dir = "out";
    std::vector<std::string> formats = {"csv"};
    bool plots = false;
    std::optional<GridConfig> grid;

    json canonical;  // normalized parsed form, input to the config hash
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "' in " + where + ": " + e.what());
    }
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string now_iso_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

}  // namespace detail

inline SynthConfig parse_synth_config(const json& j) {
    detail::reject_unknown_keys(
        j,
        {"start_year", "years", "parks", "price_mean", "price_volatility", "negative_price_share",
         "year_price_sigma", "price_wind_coupling", "fleet_mean_cf", "fleet_cf_shape",
         "fleet_capacity_mw", "wind_year_sigma", "park_capacity_min_mw", "park_capacity_max_mw",
         "park_correlation"},
        "data.synthetic");
    SynthConfig c;
    c.start_year = detail::get_or<int>(j, "start_year", c.start_year);
    c.n_years = detail::get_or<int>(j, "years", c.n_years);
    c.n_parks = detail::get_or<int>(j, "parks", c.n_parks);
    c.price_mean = detail::get_or<double>(j, "price_mean", c.price_mean);
    c.price_volatility = detail::get_or<double>(j, "price_volatility", c.price_volatility);
    c.negative_price_share =
        detail::get_or<double>(j, "negative_price_share", c.negative_price_share);
    c.year_price_sigma = detail::get_or<double>(j, "year_price_sigma", c.year_price_sigma);
    c.price_wind_coupling = detail::get_or<double>(j, "price_wind_coupling", c.price_wind_coupling);
    c.fleet_mean_cf = detail::get_or<double>(j, "fleet_mean_cf", c.fleet_mean_cf);
    c.fleet_cf_shape = detail::get_or<double>(j, "fleet_cf_shape", c.fleet_cf_shape);
    c.fleet_capacity_mw = detail::get_or<double>(j, "fleet_capacity_mw", c.fleet_capacity_mw);
    c.wind_year_sigma = detail::get_or<double>(j, "wind_year_sigma", c.wind_year_sigma);
    c.park_capacity_min_mw =
        detail::get_or<double>(j, "park_capacity_min_mw", c.park_capacity_min_mw);
    c.park_capacity_max_mw =
        detail::get_or<double>(j, "park_capacity_max_mw", c.park_capacity_max_mw);
    c.park_correlation =
        detail::get_or<std::vector<double>>(j, "park_correlation", c.park_correlation);
    c.validate();
    return c;
}

inline ScenarioConfig parse_scenario_config(const json& root,
                                            const std::filesystem::path& base_dir = {}) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    detail::reject_unknown_keys(root,
                                {"schema_version", "name", "seed", "data", "contracts", "costs",
                                 "solver", "min_valid_hours", "park_weighting", "output_dir",
                                 "formats", "plots", "grid"},
                                "config");
    const int version = detail::get_required<int>(root, "schema_version", "config");
    if (version != 1) {
        throw ConfigError("unsupported schema_version " + std::to_string(version));
    }

    ScenarioConfig cfg;
    cfg.name = detail::get_required<std::string>(root, "name", "config");
    if (cfg.name.empty()) throw ConfigError("scenario name must not be empty");
    cfg.seed = detail::get_or<std::uint64_t>(root, "seed", 0);

    const json& jdata = root.at("data");
    detail::reject_unknown_keys(jdata, {"source", "synthetic", "price_csv", "fleet_csv", "parks"},
                                "data");
    const std::string source = detail::get_required<std::string>(jdata, "source", "data");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() || base_dir.empty() ? fp : base_dir / fp;
    };
    if (source == "synthetic") {
        cfg.data.source = DataConfig::Source::Synthetic;
        cfg.data.synth = parse_synth_config(jdata.contains("synthetic") ? jdata.at("synthetic")
                                                                        : json::object());
    } else if (source == "csv") {
        cfg.data.source = DataConfig::Source::Csv;
        cfg.data.price_csv = resolve(detail::get_required<std::string>(jdata, "price_csv", "data"));
        cfg.data.fleet_csv = resolve(detail::get_required<std::string>(jdata, "fleet_csv", "data"));
        if (!jdata.contains("parks") || !jdata.at("parks").is_array() || jdata.at("parks").empty()) {
            throw ConfigError("data.parks must be a non-empty array for csv sources");
        }
        for (const auto& jp : jdata.at("parks")) {
            detail::reject_unknown_keys(jp, {"id", "csv", "capacity_mw", "commissioning_year"},
                                        "data.parks[]");
            ParkFileConfig p;
            p.id = detail::get_required<std::string>(jp, "id", "data.parks[]");
            p.csv = resolve(detail::get_required<std::string>(jp, "csv", "data.parks[]"));
            p.capacity_mw = detail::get_required<double>(jp, "capacity_mw", "data.parks[]");
            p.commissioning_year = detail::get_or<int>(jp, "commissioning_year", 0);
            cfg.data.parks.push_back(std::move(p));
        }
    } else {
        throw ConfigError("data.source must be 'synthetic' or 'csv'");
    }

    const auto ids = detail::get_required<std::vector<std::string>>(root, "contracts", "config");
    if (ids.empty()) throw ConfigError("at least one contract is required");
    std::set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) throw ConfigError("duplicate contract id '" + id + "'");
        cfg.contracts.push_back(parse_contract_id(id));
    }
    std::stable_sort(cfg.contracts.begin(), cfg.contracts.end(),
                     [](const ContractSpec& a, const ContractSpec& b) {
                         return canonical_order(a.id()) < canonical_order(b.id());
                     });

    if (root.contains("costs")) {
        const json& jc = root.at("costs");
        detail::reject_unknown_keys(jc,
                                    {"capex_eur_per_kw", "opex_eur_per_kw_a", "cost_of_debt",
                                     "cost_of_equity", "lifetime_years"},
                                    "costs");
        cfg.costs.capex_eur_per_kw =
            detail::get_or<double>(jc, "capex_eur_per_kw", cfg.costs.capex_eur_per_kw);
        cfg.costs.opex_eur_per_kw_a =
            detail::get_or<double>(jc, "opex_eur_per_kw_a", cfg.costs.opex_eur_per_kw_a);
        cfg.costs.cost_of_debt = detail::get_or<double>(jc, "cost_of_debt", cfg.costs.cost_of_debt);
        cfg.costs.cost_of_equity =
            detail::get_or<double>(jc, "cost_of_equity", cfg.costs.cost_of_equity);
        cfg.costs.lifetime_years =
            detail::get_or<int>(jc, "lifetime_years", cfg.costs.lifetime_years);
    }
    cfg.costs.validate();

    if (root.contains("solver")) {
        const json& js = root.at("solver");
        detail::reject_unknown_keys(js,
                                    {"bracket_lo", "bracket_hi", "width_tol", "gap_rel_tol",
                                     "alpha_max", "alpha_tol"},
                                    "solver");
        cfg.solver.bracket_lo = detail::get_or<double>(js, "bracket_lo", cfg.solver.bracket_lo);
        cfg.solver.bracket_hi = detail::get_or<double>(js, "bracket_hi", cfg.solver.bracket_hi);
        cfg.solver.width_tol = detail::get_or<double>(js, "width_tol", cfg.solver.width_tol);
        cfg.solver.gap_rel_tol = detail::get_or<double>(js, "gap_rel_tol", cfg.solver.gap_rel_tol);
        cfg.solver.alpha_max = detail::get_or<double>(js, "alpha_max", cfg.solver.alpha_max);
        cfg.solver.alpha_tol = detail::get_or<double>(js, "alpha_tol", cfg.solver.alpha_tol);
        if (cfg.solver.bracket_hi <= cfg.solver.bracket_lo) {
            throw ConfigError("solver bracket is empty");
        }
    }

    cfg.min_valid_hours = detail::get_or<std::size_t>(root, "min_valid_hours", cfg.min_valid_hours);
    cfg.park_weighting = detail::get_or<std::string>(root, "park_weighting", cfg.park_weighting);
    if (cfg.park_weighting != "simple" && cfg.park_weighting != "capacity") {
        throw ConfigError("park_weighting must be 'simple' or 'capacity'");
    }
    cfg.output_dir = detail::get_or<std::string>(root, "output_dir", cfg.output_dir.string());
    cfg.formats = detail::get_or<std::vector<std::string>>(root, "formats", cfg.formats);
    for (const auto& f : cfg.formats) {
        if (f != "csv" && f != "json") throw ConfigError("formats entries must be 'csv' or 'json'");
    }
    if (cfg.formats.empty()) throw ConfigError("at least one output format is required");
    cfg.plots = detail::get_or<bool>(root, "plots", cfg.plots);

    if (root.contains("grid")) {
        const json& jg = root.at("grid");
        detail::reject_unknown_keys(jg, {"capex_axis", "opex_axis"}, "grid");
        GridConfig g;
        g.capex_axis = detail::get_required<std::vector<double>>(jg, "capex_axis", "grid");
        g.opex_axis = detail::get_required<std::vector<double>>(jg, "opex_axis", "grid");
        auto strictly_increasing = [](const std::vector<double>& v) {
            for (std::size_t i = 1; i < v.size(); ++i) {
                if (v[i] <= v[i - 1]) return false;
            }
            return !v.empty();
        };
        if (!strictly_increasing(g.capex_axis) || !strictly_increasing(g.opex_axis)) {
            throw ConfigError("grid axes must be non-empty and strictly increasing");
        }
        cfg.grid = std::move(g);
    }

    cfg.canonical = root;
    return cfg;
}

inline ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_scenario_config(root, path.parent_path());
}

// Hash of the result-determining configuration. Where outputs land and in
// which formats does not change what is computed, so those keys are not part
// of the identity.
inline std::string config_hash(const ScenarioConfig& cfg) {
    json j = cfg.canonical.is_object() ? cfg.canonical : json::object();
    j.erase("output_dir");
    j.erase("formats");
    j.erase("plots");
    return detail::hex64(detail::fnv1a64(j.dump() + "#" + std::to_string(cfg.seed)));
}

// ---------------------------------------------------------------------------
// Dataset acquisition
// ---------------------------------------------------------------------------

inline MarketDataset build_dataset(const ScenarioConfig& cfg) {
    if (cfg.data.source == DataConfig::Source::Synthetic) {
        MarketDataset ds = synthesize_market(cfg.data.synth, cfg.seed);
        if (cfg.min_valid_hours != ds.min_valid_hours) {
            ds = align_dataset(ds.price, ds.fleet, ds.parks, cfg.min_valid_hours);
        }
        return ds;
    }
    PriceSeries price = load_price_series(cfg.data.price_csv);
    FleetSeries fleet = load_fleet_series(cfg.data.fleet_csv);
    std::vector<ParkSeries> parks;
    for (const auto& p : cfg.data.parks) {
        parks.push_back(load_park_series(p.csv, {p.id, p.capacity_mw, p.commissioning_year}));
    }
    return align_dataset(price, fleet, std::move(parks), cfg.min_valid_hours);
}

// ---------------------------------------------------------------------------
// Scenario evaluation
// ---------------------------------------------------------------------------

struct ParkContractResult {
    AnnualRevenueTable table;
    RiskSummary risk;
    FinanceResult finance;
    AchievedPrice achieved;
    GapDecomposition gap;
    double merchant_lcoe = 0.0;
};

struct ScenarioResults {
    std::vector<std::string> contract_ids;  // canonical order, as configured
    std::vector<std::string> park_ids;      // dataset order
    // contract-major: rows[c * parks + p]
    std::vector<ParkContractResult> rows;
    std::vector<double> park_capacity_mw;

    const ParkContractResult& at(std::size_t contract, std::size_t park) const {
        return rows[contract * park_ids.size() + park];
    }
};

// Runs the full pipeline for one cost assumption: resolve contract factors,
// solve every park x contract equilibrium, summarize risk, decompose the
// merchant gap. Pure function of (dataset, contracts, costs, options).
inline ScenarioResults evaluate_scenario(const MarketDataset& ds,
                                         const std::vector<ContractSpec>& contracts,
                                         const CostParams& costs,
                                         const EquilibriumOptions& opts = {}) {
    if (contracts.empty()) throw ConfigError("evaluate_scenario: no contracts");
    ScenarioResults res;
    for (const auto& c : contracts) res.contract_ids.push_back(c.id());
    for (const auto& p : ds.parks) {
        res.park_ids.push_back(p.park_id);
        res.park_capacity_mw.push_back(p.installed_capacity_mw);
    }

    // merchant leg is always needed for the decomposition
    std::vector<FinanceResult> merchant(ds.parks.size());
    std::vector<double> merchant_capture(ds.parks.size());
    for (std::size_t pi = 0; pi < ds.parks.size(); ++pi) {
        merchant[pi] =
            solve_equilibrium(ContractSpec::merchant(), ds, ds.parks[pi], costs, opts);
        AnnualRevenueTable mt;
        mt.years = merchant[pi].years;
        mt.revenue_per_mw = merchant[pi].revenue_per_mw;
        mt.generation_per_mw = merchant[pi].generation_per_mw;
        merchant_capture[pi] = achieved_price(std::span<const int>(mt.years),
                                              std::span<const double>(mt.revenue_per_mw),
                                              std::span<const double>(mt.generation_per_mw))
                                   .pooled;
    }

    // fleet-wide contract factor is shared by every park
    std::optional<double> fleet_alpha;
    for (const auto& c : contracts) {
        if (c.kind == ContractKind::Financial && c.alpha_mode == AlphaMode::FleetOptimal) {
            fleet_alpha = resolve_alpha(c, ds, ds.parks.front(), costs, opts, nullptr);
        }
    }

    for (const auto& spec : contracts) {
        for (std::size_t pi = 0; pi < ds.parks.size(); ++pi) {
            const ParkSeries& park = ds.parks[pi];
            ParkContractResult row;
            try {
                std::optional<double> resolved;
                if (spec.kind == ContractKind::Financial) {
                    if (spec.alpha_mode == AlphaMode::FleetOptimal) {
                        resolved = fleet_alpha;
                    } else {
                        resolved = resolve_alpha(spec, ds, park, costs, opts, nullptr);
                    }
                }
                row.finance = spec.kind == ContractKind::Merchant
                                  ? merchant[pi]
                                  : solve_equilibrium(spec, ds, park, costs, opts, resolved);
            } catch (const SolverError&) {
                throw;
            } catch (const std::exception& e) {
                throw DataError("stage finance: park " + park.park_id + ", contract " + spec.id() +
                                ": " + e.what());
            }
            row.table.park_id = park.park_id;
            row.table.contract_id = spec.id();
            row.table.years = row.finance.years;
            row.table.revenue_per_mw = row.finance.revenue_per_mw;
            row.table.generation_per_mw = row.finance.generation_per_mw;
            row.risk = risk_summary(row.table.revenue_per_mw);
            row.achieved = achieved_price(row.table);
            row.merchant_lcoe = merchant[pi].lcoe;
            row.gap = decompose_merchant_gap(merchant[pi].lcoe, merchant_capture[pi],
                                             row.finance.lcoe);
            res.rows.push_back(std::move(row));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Report tables
// ---------------------------------------------------------------------------

// A report cell is empty, text, an integer, or a real; the CSV and JSON
// emitters format the same value so both carry identical numbers.
using Cell = std::variant<std::monostate, std::string, std::int64_t, double>;

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

namespace detail {

inline std::string cell_csv(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return "";
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return format_double(std::get<double>(c));
}

inline json cell_json(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return nullptr;
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<double>(c);
}

inline std::string table_csv(const ReportTable& t) {
    csv::Writer w(t.columns);
    for (const auto& row : t.rows) {
        std::vector<std::string> fields;
        fields.reserve(row.size());
        for (const auto& c : row) fields.push_back(cell_csv(c));
        w.row(fields);
    }
    return w.str();
}

inline json table_json(const ReportTable& t) {
    json rows = json::array();
    for (const auto& row : t.rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = cell_json(row[i]);
        rows.push_back(std::move(obj));
    }
    return json{{"table", t.name}, {"rows", std::move(rows)}};
}

inline Cell opt_cell(const std::optional<double>& v) {
    return v ? Cell(*v) : Cell(std::monostate{});
}

}  // namespace detail

inline ReportTable risk_summary_table(const ScenarioResults& r) {
    ReportTable t;
    t.name = "risk_summary";
    t.columns = {"park_id", "contract_id", "mean", "std", "cov", "min", "p10", "p50", "p90"};
    for (const auto& row : r.rows) {
        t.rows.push_back({row.table.park_id, row.table.contract_id, row.risk.mean, row.risk.std,
                          detail::opt_cell(row.risk.cov), row.risk.min, row.risk.p10, row.risk.p50,
                          row.risk.p90});
    }
    return t;
}

inline ReportTable finance_table(const ScenarioResults& r) {
    ReportTable t;
    t.name = "finance";
    t.columns = {"park_id", "contract_id", "alpha",     "support_level", "debt",      "equity",
                 "leverage", "wacc",       "lcoe",      "min_dscr_year", "equity_gap"};
    for (const auto& row : r.rows) {
        const FinanceResult& f = row.finance;
        t.rows.push_back({f.park_id, f.contract_id, detail::opt_cell(f.alpha),
                          detail::opt_cell(f.support_level), f.structure.debt, f.structure.equity,
                          f.structure.leverage, f.wacc, f.lcoe,
                          static_cast<std::int64_t>(f.min_dscr_year), f.equity_gap});
    }
    return t;
}

inline ReportTable lcoe_table(const ScenarioResults& r) {
    ReportTable t;
    t.name = "lcoe";
    t.columns = {"park_id", "contract_id", "lcoe", "reduction_vs_merchant"};
    for (const auto& row : r.rows) {
        t.rows.push_back({row.table.park_id, row.table.contract_id, row.finance.lcoe,
                          row.merchant_lcoe - row.finance.lcoe});
    }
    return t;
}

inline ReportTable gap_table(const ScenarioResults& r) {
    ReportTable t;
    t.name = "gap_decomposition";
    t.columns = {"park_id", "contract_id", "merchant_gap", "derisking", "subsidy",
                 "viability_flag"};
    for (const auto& row : r.rows) {
        t.rows.push_back({row.table.park_id, row.table.contract_id, row.gap.merchant_gap,
                          row.gap.derisking, row.gap.subsidy,
                          static_cast<std::int64_t>(row.gap.viable_merchant ? 1 : 0)});
    }
    return t;
}

inline ReportTable annual_revenue_table(const ScenarioResults& r) {
    ReportTable t;
    t.name = "annual_revenues";
    t.columns = {"park_id", "contract_id", "year", "revenue_eur_per_mw", "generation_mwh_per_mw"};
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.table.size(); ++i) {
            t.rows.push_back({row.table.park_id, row.table.contract_id,
                              static_cast<std::int64_t>(row.table.years[i]),
                              row.table.revenue_per_mw[i], row.table.generation_per_mw[i]});
        }
    }
    return t;
}

// Mean with the configured park weighting; whisker bounds are plain
// percentiles across parks.
inline double fleet_mean(const std::vector<double>& values, const std::vector<double>& weights) {
    if (weights.empty()) return mean_of(values);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        num += values[i] * weights[i];
        den += weights[i];
    }
    return num / den;
}

// Per-contract mean and p10/p90 across parks for every numeric column of the
// per-park tables, in a long format.
inline ReportTable aggregates_table(const ScenarioResults& r,
                                    const std::vector<ReportTable>& tables,
                                    const std::string& weighting) {
    ReportTable t;
    t.name = "aggregates";
    t.columns = {"table", "contract_id", "column", "stat", "value"};
    const std::size_t n_parks = r.park_ids.size();
    for (const auto& src : tables) {
        if (src.name == "annual_revenues") continue;
        for (std::size_t ci = 0; ci < r.contract_ids.size(); ++ci) {
            for (std::size_t col = 2; col < src.columns.size(); ++col) {
                std::vector<double> values;
                std::vector<double> weights;
                for (std::size_t pi = 0; pi < n_parks; ++pi) {
                    const Cell& c = src.rows[ci * n_parks + pi][col];
                    if (const auto* d = std::get_if<double>(&c)) {
                        values.push_back(*d);
                        if (weighting == "capacity") weights.push_back(r.park_capacity_mw[pi]);
                    } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
                        values.push_back(static_cast<double>(*i));
                        if (weighting == "capacity") weights.push_back(r.park_capacity_mw[pi]);
                    }
                }
                auto push = [&](const char* stat, Cell value) {
                    t.rows.push_back({src.name, r.contract_ids[ci], src.columns[col],
                                      std::string(stat), std::move(value)});
                };
                if (values.empty()) {
                    push("mean", std::monostate{});
                    push("p10", std::monostate{});
                    push("p90", std::monostate{});
                    continue;
                }
                push("mean", fleet_mean(values, weights));
                push("p10", percentile(values, 0.10));
                push("p90", percentile(values, 0.90));
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// SVG figures: mean bars with p10-p90 whiskers, and the sensitivity heatmap
// ---------------------------------------------------------------------------

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

inline std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace detail

inline std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                                 const std::vector<double>& means, const std::vector<double>& p10,
                                 const std::vector<double>& p90) {
    const double width = 900, height = 460;
    const double left = 70, right = 20, top = 50, bottom = 110;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    double vmax = 0.0, vmin = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        vmax = std::max({vmax, means[i], p90.empty() ? means[i] : p90[i]});
        vmin = std::min({vmin, means[i], p10.empty() ? means[i] : p10[i]});
    }
    if (vmax == vmin) vmax = vmin + 1.0;
    auto y_of = [&](double v) { return top + plot_h * (1.0 - (v - vmin) / (vmax - vmin)); };

    std::string s;
    s += "<svg xmlns='http://www.w3.org/2000/svg' width='" + detail::fmt_short(width) +
         "' height='" + detail::fmt_short(height) + "'>\n";
    s += "<rect width='100%' height='100%' fill='white'/>\n";
    s += "<text x='16' y='28' font-family='sans-serif' font-size='18'>" +
         detail::svg_escape(title) + "</text>\n";
    s += "<line x1='" + detail::fmt_short(left) + "' y1='" + detail::fmt_short(y_of(0.0)) +
         "' x2='" + detail::fmt_short(width - right) + "' y2='" + detail::fmt_short(y_of(0.0)) +
         "' stroke='#444'/>\n";
    const double n = static_cast<double>(labels.size());
    const double slot = plot_w / std::max(1.0, n);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double x0 = left + slot * static_cast<double>(i) + slot * 0.18;
        const double bw = slot * 0.64;
        const double yb = y_of(std::max(0.0, means[i]));
        const double hb = std::abs(y_of(means[i]) - y_of(0.0));
        s += "<rect x='" + detail::fmt_short(x0) + "' y='" + detail::fmt_short(yb) + "' width='" +
             detail::fmt_short(bw) + "' height='" + detail::fmt_short(hb) +
             "' fill='#4878a8'/>\n";
        if (!p10.empty()) {
            const double xc = x0 + bw / 2.0;
            s += "<line x1='" + detail::fmt_short(xc) + "' y1='" + detail::fmt_short(y_of(p10[i])) +
                 "' x2='" + detail::fmt_short(xc) + "' y2='" + detail::fmt_short(y_of(p90[i])) +
                 "' stroke='#222' stroke-width='2'/>\n";
        }
        s += "<text x='" + detail::fmt_short(x0 + bw / 2.0) + "' y='" +
             detail::fmt_short(height - bottom + 16) +
             "' font-family='sans-serif' font-size='11' text-anchor='end' transform='rotate(-45 " +
             detail::fmt_short(x0 + bw / 2.0) + " " + detail::fmt_short(height - bottom + 16) +
             ")'>" + detail::svg_escape(labels[i]) + "</text>\n";
        s += "<text x='" + detail::fmt_short(x0 + bw / 2.0) + "' y='" +
             detail::fmt_short(yb - 6.0) +
             "' font-family='sans-serif' font-size='10' text-anchor='middle'>" +
             detail::fmt_short(means[i]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline std::string svg_heatmap(const std::string& title, const std::vector<double>& xs,
                               const std::vector<double>& ys,
                               const std::vector<std::vector<std::optional<double>>>& z,
                               std::size_t baseline_x, std::size_t baseline_y) {
    const double cell = 64, left = 90, top = 60;
    const double width = left + cell * static_cast<double>(xs.size()) + 30;
    const double height = top + cell * static_cast<double>(ys.size()) + 60;
    double vmin = 1e300, vmax = -1e300;
    for (const auto& rowv : z) {
        for (const auto& v : rowv) {
            if (v) {
                vmin = std::min(vmin, *v);
                vmax = std::max(vmax, *v);
            }
        }
    }
    if (vmin > vmax) {
        vmin = 0.0;
        vmax = 1.0;
    }
    if (vmax == vmin) vmax = vmin + 1.0;
    std::string s;
    s += "<svg xmlns='http://www.w3.org/2000/svg' width='" + detail::fmt_short(width) +
         "' height='" + detail::fmt_short(height) + "'>\n";
    s += "<rect width='100%' height='100%' fill='white'/>\n";
    s += "<text x='16' y='28' font-family='sans-serif' font-size='16'>" +
         detail::svg_escape(title) + "</text>\n";
    for (std::size_t yi = 0; yi < ys.size(); ++yi) {
        for (std::size_t xi = 0; xi < xs.size(); ++xi) {
            const double x = left + cell * static_cast<double>(xi);
            const double y = top + cell * static_cast<double>(yi);
            std::string fill = "#dddddd";
            std::string label = "-";
            if (z[yi][xi]) {
                const double f = (*z[yi][xi] - vmin) / (vmax - vmin);
                const int r = static_cast<int>(255.0 * (1.0 - f));
                const int g = static_cast<int>(130.0 + 90.0 * f);
                const int b = static_cast<int>(255.0 * (1.0 - f) * 0.6 + 60.0);
                char col[10];
                std::snprintf(col, sizeof(col), "#%02x%02x%02x", r, g, b);
                fill = col;
                label = detail::fmt_short(*z[yi][xi]);
            }
            const bool is_base = xi == baseline_x && yi == baseline_y;
            s += "<rect x='" + detail::fmt_short(x) + "' y='" + detail::fmt_short(y) +
                 "' width='" + detail::fmt_short(cell - 2) + "' height='" +
                 detail::fmt_short(cell - 2) + "' fill='" + fill + "'" +
                 (is_base ? " stroke='#e07000' stroke-width='4'" : "") + "/>\n";
            s += "<text x='" + detail::fmt_short(x + cell / 2 - 1) + "' y='" +
                 detail::fmt_short(y + cell / 2 + 4) +
                 "' font-family='sans-serif' font-size='11' text-anchor='middle'>" + label +
                 "</text>\n";
        }
    }
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        s += "<text x='" + detail::fmt_short(left + cell * (static_cast<double>(xi) + 0.5)) +
             "' y='" + detail::fmt_short(top + cell * static_cast<double>(ys.size()) + 24) +
             "' font-family='sans-serif' font-size='12' text-anchor='middle'>" +
             detail::fmt_short(xs[xi]) + "</text>\n";
    }
    for (std::size_t yi = 0; yi < ys.size(); ++yi) {
        s += "<text x='" + detail::fmt_short(left - 8) + "' y='" +
             detail::fmt_short(top + cell * (static_cast<double>(yi) + 0.5) + 4) +
             "' font-family='sans-serif' font-size='12' text-anchor='end'>" +
             detail::fmt_short(ys[yi]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

// ---------------------------------------------------------------------------
// Run manifest and emission
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string scenario;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string artifact_version;
    std::string started_at;
    std::string finished_at;
    std::map<std::string, std::size_t> row_counts;

    json to_json() const {
        return json{{"scenario", scenario},
                    {"config_hash", config_hash},
                    {"seed", seed},
                    {"artifact_version", artifact_version},
                    {"started_at", started_at},
                    {"finished_at", finished_at},
                    {"row_counts", row_counts}};
    }
};

struct RunOutputs {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
    RunManifest manifest;
};

namespace detail {

class OutputStager {
public:
    explicit OutputStager(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void stage(const std::string& filename, std::string content) {
        staged_.emplace_back(filename, std::move(content));
    }

    std::vector<std::filesystem::path> commit() {
        std::vector<std::filesystem::path> written;
        try {
            for (const auto& [name, content] : staged_) {
                const auto path = dir_ / name;
                csv::write_file_atomic(path, content);
                written.push_back(path);
            }
        } catch (...) {
            for (const auto& p : written) {
                std::error_code ec;
                std::filesystem::remove(p, ec);
            }
            throw;
        }
        return written;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> staged_;
};

inline std::filesystem::path output_root(const ScenarioConfig& cfg) {
    if (const char* env = std::getenv("CFDSIM_OUTPUT_ROOT")) {
        if (*env) return std::filesystem::path(env);
    }
    return cfg.output_dir;
}

inline void stage_figures(OutputStager& stager, const ScenarioResults& res,
                          const ReportTable& aggregates) {
    auto agg = [&](const std::string& table, const std::string& column, const std::string& stat,
                   const std::string& contract) -> std::optional<double> {
        for (const auto& row : aggregates.rows) {
            if (std::get<std::string>(row[0]) == table &&
                std::get<std::string>(row[1]) == contract &&
                std::get<std::string>(row[2]) == column && std::get<std::string>(row[3]) == stat) {
                if (const auto* d = std::get_if<double>(&row[4])) return *d;
                return std::nullopt;
            }
        }
        return std::nullopt;
    };
    auto series = [&](const std::string& table, const std::string& column) {
        std::vector<std::string> labels;
        std::vector<double> means, p10, p90;
        for (const auto& c : res.contract_ids) {
            const auto m = agg(table, column, "mean", c);
            if (!m) continue;
            labels.push_back(c);
            means.push_back(*m);
            p10.push_back(agg(table, column, "p10", c).value_or(*m));
            p90.push_back(agg(table, column, "p90", c).value_or(*m));
        }
        return std::tuple(labels, means, p10, p90);
    };
    {
        auto [labels, means, p10, p90] = series("risk_summary", "cov");
        stager.stage("fig_cov.svg",
                     svg_bar_chart("Coefficient of variation of annual revenues", labels, means,
                                   p10, p90));
    }
    {
        auto [labels, means, p10, p90] = series("finance", "leverage");
        stager.stage("fig_leverage.svg",
                     svg_bar_chart("Equilibrium leverage ratio", labels, means, p10, p90));
    }
    {
        auto [labels, means, p10, p90] = series("lcoe", "lcoe");
        stager.stage("fig_lcoe.svg", svg_bar_chart("LCOE, EUR/MWh", labels, means, p10, p90));
    }
    {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& c : res.contract_ids) {
            const auto d = agg("gap_decomposition", "derisking", "mean", c);
            const auto s = agg("gap_decomposition", "subsidy", "mean", c);
            if (!d || !s) continue;
            labels.push_back(c + " derisking");
            values.push_back(*d);
            labels.push_back(c + " subsidy");
            values.push_back(*s);
        }
        stager.stage("fig_gap.svg",
                     svg_bar_chart("Merchant gap components, EUR/MWh", labels, values, {}, {}));
    }
}

}  // namespace detail

// Runs the configured scenario and writes the report bundle: the four report
// tables, the annual revenue table, fleet aggregates, the run manifest and
// (optionally) figures. All numeric content is deterministic for a fixed
// (config, seed); only manifest timestamps vary between reruns.
inline RunOutputs run_scenario(const ScenarioConfig& cfg) {
    RunManifest manifest;
    manifest.scenario = cfg.name;
    manifest.config_hash = config_hash(cfg);
    manifest.seed = cfg.seed;
    manifest.artifact_version = std::string(kVersion);
    manifest.started_at = detail::now_iso_utc();

    MarketDataset ds;
    try {
        ds = build_dataset(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(std::string("stage data: ") + e.what());
    }

    const ScenarioResults res = evaluate_scenario(ds, cfg.contracts, cfg.costs, cfg.solver);

    std::vector<ReportTable> tables;
    tables.push_back(risk_summary_table(res));
    tables.push_back(finance_table(res));
    tables.push_back(lcoe_table(res));
    tables.push_back(gap_table(res));
    const ReportTable aggregates = aggregates_table(res, tables, cfg.park_weighting);
    tables.push_back(annual_revenue_table(res));

    const std::filesystem::path dir = detail::output_root(cfg) / cfg.name;
    detail::OutputStager stager(dir);
    const bool want_csv = std::count(cfg.formats.begin(), cfg.formats.end(), "csv") > 0;
    const bool want_json = std::count(cfg.formats.begin(), cfg.formats.end(), "json") > 0;
    for (const auto& t : tables) {
        manifest.row_counts[t.name] = t.rows.size();
        if (want_csv) stager.stage(t.name + ".csv", detail::table_csv(t));
        if (want_json) stager.stage(t.name + ".json", detail::table_json(t).dump(2) + "\n");
    }
    manifest.row_counts[aggregates.name] = aggregates.rows.size();
    if (want_csv) stager.stage("aggregates.csv", detail::table_csv(aggregates));
    if (want_json) stager.stage("aggregates.json", detail::table_json(aggregates).dump(2) + "\n");
    if (cfg.plots) detail::stage_figures(stager, res, aggregates);

    manifest.finished_at = detail::now_iso_utc();
    stager.stage("manifest.json", manifest.to_json().dump(2) + "\n");

    RunOutputs out;
    out.dir = dir;
    out.files = stager.commit();
    out.manifest = manifest;
    return out;
}

// ---------------------------------------------------------------------------
// Sensitivity grid
// ---------------------------------------------------------------------------

struct GridCellResult {
    double capex = 0.0;
    double opex = 0.0;
    std::string contract_id;
    std::optional<double> fleet_avg_lcoe;
    std::optional<double> reduction_vs_merchant;
    bool baseline = false;
    bool failed = false;
};

struct GridOutputs {
    std::filesystem::path dir;
    std::vector<GridCellResult> cells;
    std::vector<std::filesystem::path> files;
};

// Re-solves every configured contract across the (capex, opex) grid and
// reports the fleet-average LCOE and its reduction against merchant
// exposure. Failed cells are recorded and skipped; the baseline cell
// reproduces the standalone run exactly.
inline GridOutputs sensitivity_grid(const ScenarioConfig& cfg) {
    if (!cfg.grid) throw ConfigError("sensitivity grid requires a 'grid' config section");
    const GridConfig& grid = *cfg.grid;
    const bool base_on_axis =
        std::count(grid.capex_axis.begin(), grid.capex_axis.end(), cfg.costs.capex_eur_per_kw) >
            0 &&
        std::count(grid.opex_axis.begin(), grid.opex_axis.end(), cfg.costs.opex_eur_per_kw_a) > 0;
    if (!base_on_axis) {
        throw ConfigError("grid axes must contain the baseline (capex, opex) cell");
    }

    const MarketDataset ds = build_dataset(cfg);

    std::vector<GridCellResult> cells;
    for (double opex : grid.opex_axis) {
        for (double capex : grid.capex_axis) {
            CostParams costs = cfg.costs;
            costs.capex_eur_per_kw = capex;
            costs.opex_eur_per_kw_a = opex;
            const bool baseline = capex == cfg.costs.capex_eur_per_kw &&
                                  opex == cfg.costs.opex_eur_per_kw_a;
            try {
                const ScenarioResults res =
                    evaluate_scenario(ds, cfg.contracts, costs, cfg.solver);
                const std::vector<double>* weights = nullptr;
                std::vector<double> capw = res.park_capacity_mw;
                if (cfg.park_weighting == "capacity") weights = &capw;
                for (std::size_t ci = 0; ci < res.contract_ids.size(); ++ci) {
                    std::vector<double> lcoes, reductions;
                    for (std::size_t pi = 0; pi < res.park_ids.size(); ++pi) {
                        const auto& row = res.at(ci, pi);
                        lcoes.push_back(row.finance.lcoe);
                        reductions.push_back(row.merchant_lcoe - row.finance.lcoe);
                    }
                    GridCellResult cell;
                    cell.capex = capex;
                    cell.opex = opex;
                    cell.contract_id = res.contract_ids[ci];
                    cell.fleet_avg_lcoe =
                        fleet_mean(lcoes, weights ? *weights : std::vector<double>{});
                    cell.reduction_vs_merchant =
                        fleet_mean(reductions, weights ? *weights : std::vector<double>{});
                    cell.baseline = baseline;
                    cells.push_back(std::move(cell));
                }
            } catch (const std::exception&) {
                for (const auto& spec : cfg.contracts) {
                    GridCellResult cell;
                    cell.capex = capex;
                    cell.opex = opex;
                    cell.contract_id = spec.id();
                    cell.baseline = baseline;
                    cell.failed = true;
                    cells.push_back(std::move(cell));
                }
            }
        }
    }

    ReportTable t;
    t.name = "grid";
    t.columns = {"capex_eur_per_kw", "opex_eur_per_kw_a", "contract_id",
                 "fleet_avg_lcoe",   "reduction_vs_merchant", "baseline", "status"};
    for (const auto& c : cells) {
        t.rows.push_back({c.capex, c.opex, c.contract_id, detail::opt_cell(c.fleet_avg_lcoe),
                          detail::opt_cell(c.reduction_vs_merchant),
                          static_cast<std::int64_t>(c.baseline ? 1 : 0),
                          std::string(c.failed ? "failed" : "ok")});
    }

    const std::filesystem::path dir = detail::output_root(cfg) / cfg.name;
    detail::OutputStager stager(dir);
    const bool want_csv = std::count(cfg.formats.begin(), cfg.formats.end(), "csv") > 0;
    const bool want_json = std::count(cfg.formats.begin(), cfg.formats.end(), "json") > 0;
    if (want_csv) stager.stage("grid.csv", detail::table_csv(t));
    if (want_json) stager.stage("grid.json", detail::table_json(t).dump(2) + "\n");
    if (cfg.plots) {
        for (const auto& spec : cfg.contracts) {
            if (spec.kind == ContractKind::Merchant) continue;
            std::vector<std::vector<std::optional<double>>> z(
                grid.opex_axis.size(),
                std::vector<std::optional<double>>(grid.capex_axis.size()));
            std::size_t bx = 0, by = 0;
            for (const auto& c : cells) {
                if (c.contract_id != spec.id()) continue;
                const std::size_t xi = static_cast<std::size_t>(
                    std::find(grid.capex_axis.begin(), grid.capex_axis.end(), c.capex) -
                    grid.capex_axis.begin());
                const std::size_t yi = static_cast<std::size_t>(
                    std::find(grid.opex_axis.begin(), grid.opex_axis.end(), c.opex) -
                    grid.opex_axis.begin());
                z[yi][xi] = c.reduction_vs_merchant;
                if (c.baseline) {
                    bx = xi;
                    by = yi;
                }
            }
            stager.stage("grid_" + spec.id() + ".svg",
                         svg_heatmap("LCOE reduction vs merchant: " + spec.id() +
                                         " (capex across, opex down)",
                                     grid.capex_axis, grid.opex_axis, z, bx, by));
        }
    }

    GridOutputs out;
    out.dir = dir;
    out.cells = std::move(cells);
    out.files = stager.commit();
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset export (same CSV schemas as ingestion)
// ---------------------------------------------------------------------------

inline RunOutputs export_synthetic_dataset(const ScenarioConfig& cfg) {
    if (cfg.data.source != DataConfig::Source::Synthetic) {
        throw ConfigError("synth export requires a synthetic data source");
    }
    const MarketDataset ds = build_dataset(cfg);

    const std::filesystem::path dir = detail::output_root(cfg) / cfg.name / "dataset";
    detail::OutputStager stager(dir);
    stager.stage("price.csv", price_series_csv(ds.price));
    stager.stage("fleet.csv", fleet_series_csv(ds.fleet));
    json parks_meta = json::array();
    for (const auto& p : ds.parks) {
        stager.stage("park_" + p.park_id + ".csv", park_series_csv(p));
        parks_meta.push_back(json{{"id", p.park_id},
                                  {"csv", "park_" + p.park_id + ".csv"},
                                  {"capacity_mw", p.installed_capacity_mw},
                                  {"commissioning_year", p.commissioning_year}});
    }
    stager.stage("parks.json", parks_meta.dump(2) + "\n");

    RunOutputs out;
    out.dir = dir;
    out.manifest.scenario = cfg.name;
    out.manifest.config_hash = config_hash(cfg);
    out.manifest.seed = cfg.seed;
    out.manifest.artifact_version = std::string(kVersion);
    out.files = stager.commit();
    return out;
}

}  // namespace cfdsim
