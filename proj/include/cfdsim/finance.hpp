#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cfdsim/common.hpp"
#include "cfdsim/contracts.hpp"
#include "cfdsim/riskmetrics.hpp"
#include "cfdsim/timeseries.hpp"

namespace cfdsim {

// Cost and lifetime assumptions of the financial model. Inputs are quoted
// per kW as usual; everything downstream works per MW.
struct CostParams {
    double capex_eur_per_kw = 1500.0;
    double opex_eur_per_kw_a = 50.0;
    double cost_of_debt = 0.0115;
    double cost_of_equity = 0.10;
    int lifetime_years = 30;

    double capex_per_mw() const { return capex_eur_per_kw * 1000.0; }
    double opex_per_mw() const { return opex_eur_per_kw_a * 1000.0; }

    void validate() const {
        if (capex_eur_per_kw <= 0.0) throw ConfigError("capex must be > 0");
        if (opex_eur_per_kw_a < 0.0) throw ConfigError("opex must be >= 0");
        if (cost_of_debt < 0.0 || cost_of_equity <= cost_of_debt) {
            throw ConfigError("required 0 <= cost_of_debt < cost_of_equity");
        }
        if (lifetime_years < 1) throw ConfigError("lifetime must be >= 1 year");
    }
};

// r(1+r)^Y / ((1+r)^Y - 1); the zero-rate limit is straight-line repayment.
inline double annuity_factor(double rate, int years) {
    if (years < 1) throw ConfigError("annuity_factor: years must be >= 1");
    if (rate < 0.0) throw ConfigError("annuity_factor: negative rate");
    if (rate == 0.0) return 1.0 / static_cast<double>(years);
    const double growth = std::pow(1.0 + rate, years);
    return rate * growth / (growth - 1.0);
}

// Constant annual payment of a fixed annuity loan.
inline double annuity_payment(double debt, double rate, int years) {
    if (debt < 0.0) throw ConfigError("annuity_payment: negative debt");
    if (debt == 0.0) return 0.0;
    return debt * annuity_factor(rate, years);
}

// Largest debt whose annuity is covered by the worst state-year's net cash
// flow (DSCR >= 1 in all states), capped by the investment volume.
inline double max_debt(std::span<const double> net_cash_flows, const CostParams& costs,
                       double investment_cap) {
    if (net_cash_flows.empty()) throw DataError("max_debt: no cash flow years");
    const double worst = *std::min_element(net_cash_flows.begin(), net_cash_flows.end());
    if (worst <= 0.0) return 0.0;
    const double unconstrained = worst / annuity_factor(costs.cost_of_debt, costs.lifetime_years);
    // rounding guard: an unconstrained level within 1e-9 of the cap is the cap
    if (unconstrained >= investment_cap * (1.0 - 1e-9)) return investment_cap;
    return unconstrained;
}

// Present value of a constant expected dividend over the project lifetime at
// the required return on equity.
inline double equity_npv(double expected_dividend, const CostParams& costs) {
    const double r = costs.cost_of_equity;
    const int y = costs.lifetime_years;
    if (r == 0.0) return expected_dividend * static_cast<double>(y);
    return expected_dividend * (1.0 - std::pow(1.0 + r, -y)) / r;
}

struct CapitalStructure {
    double total_investment = 0.0;  // €/MW
    double debt = 0.0;              // €/MW
    double equity = 0.0;            // €/MW
    double debt_service = 0.0;      // €/MW a
    double leverage = 0.0;          // debt / total_investment
};

inline double wacc(const CapitalStructure& s, const CostParams& costs) {
    if (s.equity == 0.0) return costs.cost_of_debt;
    if (s.debt == 0.0) return costs.cost_of_equity;
    return (s.debt * costs.cost_of_debt + s.equity * costs.cost_of_equity) / s.total_investment;
}

// Annualized capital cost plus O&M per MWh of expected generation. Debt and
// equity tranches are annualized at their own rates, which is the form under
// which break-even support levels and LCOE coincide.
inline double lcoe(const CapitalStructure& s, const CostParams& costs, double mean_generation) {
    if (!(mean_generation > 0.0)) throw DataError("lcoe: mean generation must be > 0");
    const double capital = annuity_payment(s.debt, costs.cost_of_debt, costs.lifetime_years) +
                           annuity_payment(s.equity, costs.cost_of_equity, costs.lifetime_years);
    return (capital + costs.opex_per_mw()) / mean_generation;
}

struct EquilibriumOptions {
    double bracket_lo = -50.0;   // €/MWh (strike); fixed rates are clamped at 0
    double bracket_hi = 500.0;
    double max_expand = 10.0;    // total bracket growth on sign-change failure
    double width_tol = 1e-10;    // support-level resolution
    double gap_rel_tol = 1e-6;   // equity gap tolerance relative to investment
    int max_iterations = 200;
    int audit_points = 17;       // monotonicity audit of the gap function
    double alpha_max = 2.0;      // contract factor search range [0, alpha_max]
    double alpha_tol = 1e-3;
    int alpha_grid_points = 21;  // quasi-convexity audit grid
};

struct FinanceResult {
    std::string park_id;
    std::string contract_id;
    std::optional<double> alpha;          // financial CfDs only
    std::optional<double> support_level;  // S or A; absent when nothing is solved
    CapitalStructure structure;
    double wacc = 0.0;
    double lcoe = 0.0;
    std::vector<int> years;
    std::vector<double> revenue_per_mw;
    std::vector<double> generation_per_mw;
    std::vector<double> dividends;  // €/MW per state-year
    double mean_generation = 0.0;   // MWh/MW a
    double equity_gap = 0.0;        // equity_npv(mean dividend) - equity, €/MW
    std::optional<double> min_dscr;
    int min_dscr_year = 0;
    bool solved = false;
    bool debt_cap_binding = false;
    bool dscr_binding = false;
    bool equity_binding = false;
    bool viable = false;
    std::vector<std::string> notes;
};

namespace detail {

struct FinancePoint {
    double debt = 0.0;
    double equity = 0.0;
    double debt_service = 0.0;
    double mean_dividend = 0.0;
    double gap = 0.0;
    double min_net = 0.0;
    std::size_t min_idx = 0;
};

inline FinancePoint finance_point(std::span<const double> revenue_per_mw, const CostParams& costs) {
    FinancePoint pt;
    const double opex = costs.opex_per_mw();
    const double investment = costs.capex_per_mw();
    std::vector<double> net(revenue_per_mw.size());
    for (std::size_t i = 0; i < revenue_per_mw.size(); ++i) net[i] = revenue_per_mw[i] - opex;
    pt.min_idx = static_cast<std::size_t>(std::min_element(net.begin(), net.end()) - net.begin());
    pt.min_net = net[pt.min_idx];
    pt.debt = max_debt(net, costs, investment);
    pt.equity = investment - pt.debt;
    pt.debt_service = annuity_payment(pt.debt, costs.cost_of_debt, costs.lifetime_years);
    double div_sum = 0.0;
    for (double n : net) div_sum += n - pt.debt_service;
    pt.mean_dividend = div_sum / static_cast<double>(net.size());
    pt.gap = equity_npv(pt.mean_dividend, costs) - pt.equity;
    return pt;
}

inline FinanceResult assemble_result(const AnnualRevenueTable& table, const CostParams& costs,
                                     const EquilibriumOptions& opts, std::optional<double> support,
                                     std::optional<double> alpha, bool solved) {
    const FinancePoint pt = finance_point(table.revenue_per_mw, costs);
    FinanceResult r;
    r.park_id = table.park_id;
    r.contract_id = table.contract_id;
    r.alpha = alpha;
    r.support_level = support;
    r.structure = {costs.capex_per_mw(), pt.debt, pt.equity,
                   pt.debt_service, pt.debt / costs.capex_per_mw()};
    r.wacc = wacc(r.structure, costs);
    r.years = table.years;
    r.revenue_per_mw = table.revenue_per_mw;
    r.generation_per_mw = table.generation_per_mw;
    const double opex = costs.opex_per_mw();
    r.dividends.reserve(table.size());
    for (double rev : table.revenue_per_mw) r.dividends.push_back(rev - opex - pt.debt_service);
    r.mean_generation = mean_of(table.generation_per_mw);
    r.lcoe = lcoe(r.structure, costs, r.mean_generation);
    r.equity_gap = pt.gap;
    r.min_dscr_year = table.years[pt.min_idx];
    if (pt.debt_service > 0.0) r.min_dscr = pt.min_net / pt.debt_service;
    r.solved = solved;
    const double gap_tol = opts.gap_rel_tol * costs.capex_per_mw();
    r.debt_cap_binding = pt.debt == costs.capex_per_mw();
    r.dscr_binding = r.min_dscr && std::abs(*r.min_dscr - 1.0) <= opts.gap_rel_tol;
    r.equity_binding = std::abs(pt.gap) <= gap_tol;
    r.viable = pt.gap >= -gap_tol;
    return r;
}

inline ContractSpec with_fixed_alpha(const ContractSpec& spec, double alpha) {
    ContractSpec s = spec;
    if (s.kind == ContractKind::Financial) {
        s.alpha_mode = AlphaMode::Fixed;
        s.alpha = alpha;
    }
    return s;
}

}  // namespace detail

inline double resolve_alpha(const ContractSpec& spec, const MarketDataset& ds,
                            const ParkSeries& park, const CostParams& costs,
                            const EquilibriumOptions& opts, std::vector<std::string>* notes);

// Break-even support level for one park under one contract: the level at
// which, with debt sized by the worst state-year and equity by the
// remainder, the expected present value of dividends just covers the equity
// investment. Merchant exposure has no contract parameter and is evaluated
// as-is; a financial CfD with contract factor 0 degenerates to merchant.
inline FinanceResult solve_equilibrium(const ContractSpec& spec, const MarketDataset& ds,
                                       const ParkSeries& park, const CostParams& costs,
                                       const EquilibriumOptions& opts = {},
                                       std::optional<double> resolved_alpha = std::nullopt) {
    spec.validate();
    costs.validate();
    if (ds.years.size() < 2) throw DataError("solve_equilibrium: need at least 2 state-years");

    std::vector<std::string> notes;
    std::optional<double> alpha;
    if (spec.kind == ContractKind::Financial) {
        alpha = resolved_alpha ? *resolved_alpha
                               : resolve_alpha(spec, ds, park, costs, opts, &notes);
    }

    const bool merchant_like =
        spec.kind == ContractKind::Merchant ||
        (spec.kind == ContractKind::Financial && alpha && *alpha == 0.0);

    if (merchant_like) {
        const ContractSpec run_spec = spec.kind == ContractKind::Financial
                                          ? detail::with_fixed_alpha(spec, 0.0)
                                          : spec;
        AnnualRevenueTable table = simulate_annual_revenues(
            run_spec, SupportLevel{0.0}, ds, park);
        table.contract_id = spec.id();
        FinanceResult r =
            detail::assemble_result(table, costs, opts, std::nullopt, alpha, /*solved=*/false);
        r.notes = std::move(notes);
        return r;
    }

    const ContractSpec run_spec =
        spec.kind == ContractKind::Financial ? detail::with_fixed_alpha(spec, *alpha) : spec;
    const RevenueModel model(ds, park, run_spec);
    const double a = alpha.value_or(1.0);

    auto gap_at = [&](double x) {
        std::vector<double> rev(model.year_count());
        for (std::size_t i = 0; i < rev.size(); ++i) rev[i] = model.revenue(i, x, a);
        return detail::finance_point(rev, costs).gap;
    };

    // bracketing: the fixed rate of a financial CfD cannot clear negative
    const bool is_financial = spec.kind == ContractKind::Financial;
    double lo = is_financial ? std::max(0.0, opts.bracket_lo) : opts.bracket_lo;
    double hi = opts.bracket_hi;
    const double initial_width = hi - lo;
    double glo = gap_at(lo);
    double ghi = gap_at(hi);
    while (glo > 0.0 || ghi < 0.0) {
        const double width = hi - lo;
        if (width >= opts.max_expand * initial_width) {
            std::ostringstream msg;
            msg << "solve_equilibrium(" << spec.id() << ", park " << park.park_id
                << "): no sign change in bracket [" << lo << ", " << hi << "], gaps " << glo
                << " / " << ghi;
            throw SolverError(msg.str());
        }
        if (glo > 0.0 && !is_financial) {
            lo -= width;
            glo = gap_at(lo);
        } else if (glo > 0.0 && is_financial) {
            // support is unnecessary even at zero fixed rate
            std::ostringstream msg;
            msg << "solve_equilibrium(" << spec.id() << ", park " << park.park_id
                << "): equity gap already positive at A=0 (" << glo << ")";
            throw SolverError(msg.str());
        }
        if (ghi < 0.0) {
            hi += width;
            ghi = gap_at(hi);
        }
    }

    int iterations = 0;
    while (hi - lo > opts.width_tol && iterations < opts.max_iterations) {
        const double mid = 0.5 * (lo + hi);
        const double gmid = gap_at(mid);
        if (gmid >= 0.0) {
            hi = mid;
            ghi = gmid;
        } else {
            lo = mid;
            glo = gmid;
        }
        ++iterations;
    }
    double root = std::abs(ghi) <= std::abs(glo) ? hi : lo;

    // monotonicity audit across the original bracket; kinks are fine, a sign
    // flip back to negative after the root is not
    {
        const double alo = is_financial ? std::max(0.0, opts.bracket_lo) : opts.bracket_lo;
        const double ahi = opts.bracket_hi;
        bool seen_positive = false;
        bool monotone = true;
        const double tol = opts.gap_rel_tol * costs.capex_per_mw();
        for (int i = 0; i < opts.audit_points; ++i) {
            const double x = alo + (ahi - alo) * static_cast<double>(i) / (opts.audit_points - 1);
            const double g = gap_at(x);
            if (g > tol) seen_positive = true;
            if (seen_positive && g < -tol) {
                monotone = false;
                break;
            }
        }
        if (!monotone) {
            // finest-grid fallback: take the first crossing on a dense scan
            notes.push_back("gap_non_monotone_grid_fallback");
            const int n = 2001;
            double prev_x = alo, prev_g = gap_at(alo);
            for (int i = 1; i < n; ++i) {
                const double x = alo + (ahi - alo) * static_cast<double>(i) / (n - 1);
                const double g = gap_at(x);
                if (prev_g <= 0.0 && g >= 0.0) {
                    double flo = prev_x, fhi = x;
                    for (int it = 0; it < opts.max_iterations && fhi - flo > opts.width_tol; ++it) {
                        const double mid = 0.5 * (flo + fhi);
                        (gap_at(mid) >= 0.0 ? fhi : flo) = mid;
                    }
                    root = fhi;
                    break;
                }
                prev_x = x;
                prev_g = g;
            }
        }
    }

    const SupportLevel level = is_financial ? SupportLevel::fixed_rate(root)
                                            : SupportLevel::strike(root);
    AnnualRevenueTable table = simulate_annual_revenues(run_spec, level, ds, park);
    table.contract_id = spec.id();
    FinanceResult r = detail::assemble_result(table, costs, opts, root, alpha, /*solved=*/true);
    r.notes = std::move(notes);
    return r;
}

namespace detail {

// curve-space equilibrium LCOE for a financial CfD at a given contract
// factor; used inside the contract-factor optimizers
inline double financial_lcoe_at_alpha(const RevenueModel& model, const CostParams& costs,
                                      const EquilibriumOptions& opts, double alpha) {
    const std::size_t n = model.year_count();
    std::vector<double> rev(n);
    auto fill = [&](double a_rate) {
        for (std::size_t i = 0; i < n; ++i) rev[i] = model.revenue(i, a_rate, alpha);
    };
    double mean_gen = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_gen += model.generation(i, 0.0);
    mean_gen /= static_cast<double>(n);

    auto point_at = [&](double a_rate) {
        fill(a_rate);
        return finance_point(rev, costs);
    };
    if (alpha == 0.0) {
        const FinancePoint pt = point_at(0.0);
        CapitalStructure s{costs.capex_per_mw(), pt.debt, pt.equity, pt.debt_service,
                           pt.debt / costs.capex_per_mw()};
        return lcoe(s, costs, mean_gen);
    }
    double lo = 0.0, hi = opts.bracket_hi;
    double glo = point_at(lo).gap;
    if (glo > 0.0) {
        // already viable without support: evaluate at zero rate
        const FinancePoint pt = point_at(0.0);
        CapitalStructure s{costs.capex_per_mw(), pt.debt, pt.equity, pt.debt_service,
                           pt.debt / costs.capex_per_mw()};
        return lcoe(s, costs, mean_gen);
    }
    double ghi = point_at(hi).gap;
    const double initial_width = hi - lo;
    while (ghi < 0.0) {
        if (hi - lo >= opts.max_expand * initial_width) {
            throw SolverError("contract factor optimization: fixed-rate bracket exhausted");
        }
        hi += hi - lo;
        ghi = point_at(hi).gap;
    }
    int iterations = 0;
    while (hi - lo > opts.width_tol && iterations < opts.max_iterations) {
        const double mid = 0.5 * (lo + hi);
        (point_at(mid).gap >= 0.0 ? hi : lo) = mid;
        ++iterations;
    }
    const FinancePoint pt = point_at(hi);
    CapitalStructure s{costs.capex_per_mw(), pt.debt, pt.equity, pt.debt_service,
                       pt.debt / costs.capex_per_mw()};
    return lcoe(s, costs, mean_gen);
}

// golden-section search on [lo, hi], assuming quasi-convexity
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             double tol) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

// grid scan + quasi-convexity audit + local golden-section refinement
inline double minimize_alpha(const std::function<double(double)>& objective,
                             const EquilibriumOptions& opts, std::vector<std::string>* notes) {
    const int n = opts.alpha_grid_points;
    std::vector<double> grid(n), val(n);
    for (int i = 0; i < n; ++i) {
        grid[i] = opts.alpha_max * static_cast<double>(i) / (n - 1);
        val[i] = objective(grid[i]);
    }
    const std::size_t best =
        static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());

    bool quasi_convex = true;
    const double tol = 1e-6 * std::max(1.0, std::abs(val[best]));
    for (std::size_t i = 1; i <= best; ++i) {
        if (val[i] > val[i - 1] + tol) quasi_convex = false;
    }
    for (std::size_t i = best + 1; i < val.size(); ++i) {
        if (val[i] < val[i - 1] - tol) quasi_convex = false;
    }
    if (!quasi_convex) {
        if (notes) notes->push_back("alpha_objective_not_quasiconvex_grid_minimum_used");
        return grid[best];
    }
    const double lo = grid[best > 0 ? best - 1 : 0];
    const double hi = grid[std::min(best + 1, val.size() - 1)];
    const double refined = golden_section(objective, lo, hi, opts.alpha_tol);
    return objective(refined) <= val[best] ? refined : grid[best];
}

}  // namespace detail

// Resolves the financial CfD's contract factor for the park:
//  Fixed        - the configured value.
//  TechAdjusted - park's mean annual capacity factor over its first three
//                 observed years relative to the national one.
//  ParkOptimal  - minimizes the park's equilibrium LCOE over [0, alpha_max].
//  FleetOptimal - minimizes the fleet-average equilibrium LCOE.
inline double resolve_alpha(const ContractSpec& spec, const MarketDataset& ds,
                            const ParkSeries& park, const CostParams& costs,
                            const EquilibriumOptions& opts = {},
                            std::vector<std::string>* notes = nullptr) {
    if (spec.kind != ContractKind::Financial) {
        throw ConfigError("resolve_alpha: contract has no contract factor");
    }
    switch (spec.alpha_mode) {
        case AlphaMode::Fixed:
            return spec.alpha;
        case AlphaMode::TechAdjusted: {
            if (ds.years.size() < 3) {
                throw DataError("resolve_alpha: technology adjustment needs 3 observed years");
            }
            if (park.commissioning_year != ds.years.front().year && notes) {
                notes->push_back("tech_alpha_window_shifted_to_first_observed_years");
            }
            double park_cf = 0.0, nat_cf = 0.0;
            for (std::size_t yi = 0; yi < 3; ++yi) {
                const YearSlice& ys = ds.years[yi];
                double pcf = 0.0, ncf = 0.0;
                for (std::size_t i = ys.begin; i < ys.end; ++i) {
                    pcf += park.potential_generation[i] / park.installed_capacity_mw;
                    ncf += ds.fleet.generation[i] / ds.fleet.capacity[i];
                }
                park_cf += pcf / static_cast<double>(ys.hour_count());
                nat_cf += ncf / static_cast<double>(ys.hour_count());
            }
            if (nat_cf <= 0.0) throw DataError("resolve_alpha: zero national capacity factor");
            return park_cf / nat_cf;
        }
        case AlphaMode::ParkOptimal: {
            const RevenueModel model(ds, park, detail::with_fixed_alpha(spec, 1.0));
            auto objective = [&](double a) {
                return detail::financial_lcoe_at_alpha(model, costs, opts, a);
            };
            return detail::minimize_alpha(objective, opts, notes);
        }
        case AlphaMode::FleetOptimal: {
            std::vector<RevenueModel> models;
            models.reserve(ds.parks.size());
            for (const auto& p : ds.parks) {
                models.emplace_back(ds, p, detail::with_fixed_alpha(spec, 1.0));
            }
            auto objective = [&](double a) {
                double total = 0.0;
                for (const auto& m : models) {
                    total += detail::financial_lcoe_at_alpha(m, costs, opts, a);
                }
                return total / static_cast<double>(models.size());
            };
            return detail::minimize_alpha(objective, opts, notes);
        }
    }
    throw ConfigError("resolve_alpha: unknown mode");
}

struct GapDecomposition {
    double merchant_gap = 0.0;  // €/MWh
    double derisking = 0.0;     // €/MWh
    double subsidy = 0.0;       // €/MWh
    bool viable_merchant = false;
};

// Splits the merchant viability shortfall into the financing-cost reduction
// a contract delivers and the residual outright subsidy. A project already
// viable merchant has nothing to close; all components report zero.
inline GapDecomposition decompose_merchant_gap(double merchant_lcoe, double merchant_capture,
                                               double contract_lcoe) {
    GapDecomposition d;
    const double gap = merchant_lcoe - merchant_capture;
    if (gap <= 0.0) {
        d.viable_merchant = true;
        return d;
    }
    d.merchant_gap = gap;
    d.derisking = merchant_lcoe - contract_lcoe;
    d.subsidy = d.merchant_gap - d.derisking;
    return d;
}

}  // namespace cfdsim
