#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cfdsim/common.hpp"
#include "cfdsim/csv.hpp"
#include "cfdsim/riskmetrics.hpp"
#include "cfdsim/timeseries.hpp"

namespace cfdsim {

enum class ContractKind { Merchant, TwoSided, OneSided, Financial };
enum class ReferenceMode { HourlySpot, AnnualCapture };
enum class AlphaMode { Fixed, FleetOptimal, TechAdjusted, ParkOptimal };

// One of the ten contract specifications plus the merchant benchmark.
// Two- and one-sided CfDs settle per MWh produced against an hourly or
// annual reference price, optionally suspending support at negative prices;
// the financial CfD is an injection-independent fixed-for-floating swap
// whose only free design choice is how the contract factor is set.
struct ContractSpec {
    ContractKind kind = ContractKind::Merchant;
    ReferenceMode reference_mode = ReferenceMode::HourlySpot;  // CfD kinds only
    bool suspend_negative = false;                             // CfD kinds only
    AlphaMode alpha_mode = AlphaMode::Fixed;                   // Financial only
    double alpha = 1.0;                                        // Financial, Fixed mode

    static ContractSpec merchant() { return {}; }

    static ContractSpec two_sided(ReferenceMode mode, bool suspend = false) {
        ContractSpec s;
        s.kind = ContractKind::TwoSided;
        s.reference_mode = mode;
        s.suspend_negative = suspend;
        s.validate();
        return s;
    }

    static ContractSpec one_sided(ReferenceMode mode, bool suspend = false) {
        ContractSpec s;
        s.kind = ContractKind::OneSided;
        s.reference_mode = mode;
        s.suspend_negative = suspend;
        s.validate();
        return s;
    }

    static ContractSpec financial(AlphaMode mode, double alpha = 1.0) {
        ContractSpec s;
        s.kind = ContractKind::Financial;
        s.alpha_mode = mode;
        s.alpha = alpha;
        s.validate();
        return s;
    }

    void validate() const {
        if (suspend_negative && kind != ContractKind::TwoSided && kind != ContractKind::OneSided) {
            throw ConfigError("suspend_negative applies to production-based CfDs only");
        }
        if (suspend_negative && reference_mode != ReferenceMode::AnnualCapture) {
            throw ConfigError("payment suspension is only specified with the annual reference");
        }
        if (kind == ContractKind::Financial && alpha_mode == AlphaMode::Fixed && alpha < 0.0) {
            throw ConfigError("contract factor must be >= 0");
        }
    }

    bool is_cfd() const { return kind == ContractKind::TwoSided || kind == ContractKind::OneSided; }

    bool uses_annual_reference() const {
        return is_cfd() && reference_mode == ReferenceMode::AnnualCapture;
    }

    // canonical identifier used in configs and report files
    std::string id() const {
        switch (kind) {
            case ContractKind::Merchant:
                return "merchant";
            case ContractKind::TwoSided:
                if (reference_mode == ReferenceMode::HourlySpot) return "cfd2_hourly";
                return suspend_negative ? "cfd2_annual_suspend" : "cfd2_annual";
            case ContractKind::OneSided:
                if (reference_mode == ReferenceMode::HourlySpot) return "cfd1_hourly";
                return suspend_negative ? "cfd1_annual_suspend" : "cfd1_annual";
            case ContractKind::Financial:
                switch (alpha_mode) {
                    case AlphaMode::Fixed:
                        return alpha == 1.0 ? "fcfd_base" : "fcfd_fixed";
                    case AlphaMode::FleetOptimal:
                        return "fcfd_fleet";
                    case AlphaMode::TechAdjusted:
                        return "fcfd_tech";
                    case AlphaMode::ParkOptimal:
                        return "fcfd_park";
                }
        }
        return "unknown";
    }
};

// The eleven reportable specifications in figure order: merchant first, then
// two-sided, one-sided, financial.
inline std::vector<ContractSpec> canonical_contracts() {
    return {
        ContractSpec::merchant(),
        ContractSpec::two_sided(ReferenceMode::HourlySpot),
        ContractSpec::two_sided(ReferenceMode::AnnualCapture),
        ContractSpec::two_sided(ReferenceMode::AnnualCapture, true),
        ContractSpec::one_sided(ReferenceMode::HourlySpot),
        ContractSpec::one_sided(ReferenceMode::AnnualCapture),
        ContractSpec::one_sided(ReferenceMode::AnnualCapture, true),
        ContractSpec::financial(AlphaMode::Fixed, 1.0),
        ContractSpec::financial(AlphaMode::FleetOptimal),
        ContractSpec::financial(AlphaMode::TechAdjusted),
        ContractSpec::financial(AlphaMode::ParkOptimal),
    };
}

inline ContractSpec parse_contract_id(const std::string& id) {
    for (const auto& s : canonical_contracts()) {
        if (s.id() == id) return s;
    }
    throw ConfigError("unknown contract id: '" + id + "'");
}

inline int canonical_order(const std::string& id) {
    const auto all = canonical_contracts();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].id() == id) return static_cast<int>(i);
    }
    return static_cast<int>(all.size());
}

// Strike S (€/MWh) for production-based CfDs, fixed rate A (€/MW per hour)
// for financial CfDs. Strikes may clear negative in auctions; A may not.
struct SupportLevel {
    double value = 0.0;

    static SupportLevel strike(double s) {
        if (!std::isfinite(s)) throw ConfigError("strike must be finite");
        return {s};
    }
    static SupportLevel fixed_rate(double a) {
        if (!std::isfinite(a) || a < 0.0) throw ConfigError("fixed rate must be finite and >= 0");
        return {a};
    }
};

struct ContractedCapacity {
    double k_mw = 0.0;
};

inline ContractedCapacity contracted_capacity(double alpha, double capacity_mw) {
    if (alpha < 0.0) throw ConfigError("contract factor must be >= 0");
    if (capacity_mw <= 0.0) throw DataError("installed capacity must be > 0");
    return {alpha * capacity_mw};
}

// Everything one hour of the market exposes to a single generator.
struct HourState {
    double price = 0.0;          // €/MWh
    double potential_mwh = 0.0;  // available output this hour
    std::optional<double> annual_capture;  // v̄ of the settlement year, annual-reference CfDs
    std::optional<double> reference_cf;    // benchmark capacity factor, financial CfDs
};

namespace detail {

inline double annual_capture_or_throw(const HourState& h) {
    if (!h.annual_capture) {
        throw DataError("annual reference CfD requires the year's capture price");
    }
    return *h.annual_capture;
}

inline double reference_cf_or_throw(const HourState& h) {
    if (!h.reference_cf) throw DataError("financial CfD requires the reference capacity factor");
    return *h.reference_cf;
}

}  // namespace detail

// Produce the full potential when the per-MWh unit revenue is strictly
// positive, otherwise curtail everything. Suspension contracts curtail at
// p <= 0 outright.
inline double dispatch_quantity(const ContractSpec& spec, const SupportLevel& level,
                                const HourState& h) {
    if (h.potential_mwh < 0.0) throw DataError("dispatch_quantity: negative potential");
    const double p = h.price;
    double unit = 0.0;
    switch (spec.kind) {
        case ContractKind::Merchant:
        case ContractKind::Financial:
            unit = p;
            break;
        case ContractKind::TwoSided:
            if (spec.reference_mode == ReferenceMode::HourlySpot) {
                unit = level.value;
            } else {
                if (spec.suspend_negative && p <= 0.0) return 0.0;
                unit = p + level.value - detail::annual_capture_or_throw(h);
            }
            break;
        case ContractKind::OneSided:
            if (spec.reference_mode == ReferenceMode::HourlySpot) {
                unit = std::max(level.value, p);
            } else {
                if (spec.suspend_negative && p <= 0.0) return 0.0;
                unit = p + std::max(level.value - detail::annual_capture_or_throw(h), 0.0);
            }
            break;
    }
    return unit > 0.0 ? h.potential_mwh : 0.0;
}

struct HourlyCashFlow {
    double dispatched_mwh = 0.0;
    double market_income = 0.0;    // q * p
    double support_payment = 0.0;  // CfD difference payment, or F - V for financial
    double total = 0.0;
};

// Cash flow of one hour. contracted_mw is the financial CfD's k; ignored by
// the other kinds. The floating leg settles on every hour regardless of the
// park's own dispatch (the contract is injection-independent).
inline HourlyCashFlow hourly_cashflow(const ContractSpec& spec, const SupportLevel& level,
                                      const HourState& h, double contracted_mw = 0.0) {
    const double q = dispatch_quantity(spec, level, h);
    const double p = h.price;
    HourlyCashFlow cf;
    cf.dispatched_mwh = q;
    cf.market_income = q * p;
    switch (spec.kind) {
        case ContractKind::Merchant:
            cf.support_payment = 0.0;
            break;
        case ContractKind::TwoSided: {
            const double ref = spec.reference_mode == ReferenceMode::HourlySpot
                                   ? p
                                   : detail::annual_capture_or_throw(h);
            cf.support_payment =
                (spec.suspend_negative && p < 0.0) ? 0.0 : q * (level.value - ref);
            break;
        }
        case ContractKind::OneSided: {
            const double ref = spec.reference_mode == ReferenceMode::HourlySpot
                                   ? p
                                   : detail::annual_capture_or_throw(h);
            cf.support_payment =
                (spec.suspend_negative && p < 0.0) ? 0.0 : q * std::max(level.value - ref, 0.0);
            break;
        }
        case ContractKind::Financial: {
            const double g = detail::reference_cf_or_throw(h);
            cf.support_payment = contracted_mw * level.value - (contracted_mw * g) * p;
            break;
        }
    }
    cf.total = cf.market_income + cf.support_payment;
    return cf;
}

// Annual revenue and dispatched volume per MW of installed capacity.
struct AnnualRevenueTable {
    std::string park_id;
    std::string contract_id;
    std::vector<int> years;
    std::vector<double> revenue_per_mw;     // €/MW a
    std::vector<double> generation_per_mw;  // MWh/MW a

    std::size_t size() const { return years.size(); }
};

// Simulates hourly dispatch and settlement over the aligned panel and
// aggregates to annual figures per MW. For financial CfDs the contract
// factor must already be resolved to a number (spec.alpha).
inline AnnualRevenueTable simulate_annual_revenues(const ContractSpec& spec,
                                                   const SupportLevel& level,
                                                   const MarketDataset& ds,
                                                   const ParkSeries& park) {
    if (park.size() != ds.hour_count()) {
        throw DataError("simulate_annual_revenues: park not aligned with dataset");
    }
    std::map<int, double> capture;
    if (spec.uses_annual_reference()) capture = capture_prices(ds);

    double k_mw = 0.0;
    if (spec.kind == ContractKind::Financial) {
        if (spec.alpha_mode != AlphaMode::Fixed) {
            throw DataError("simulate_annual_revenues: contract factor not resolved");
        }
        k_mw = contracted_capacity(spec.alpha, park.installed_capacity_mw).k_mw;
    }

    AnnualRevenueTable table;
    table.park_id = park.park_id;
    table.contract_id = spec.id();
    const double cap = park.installed_capacity_mw;
    const bool strike_collapse =
        spec.kind == ContractKind::TwoSided && spec.reference_mode == ReferenceMode::HourlySpot;

    for (const auto& ys : ds.years) {
        HourState h;
        if (spec.uses_annual_reference()) h.annual_capture = capture.at(ys.year);
        double total_sum = 0.0;
        double q_sum = 0.0;
        for (std::size_t i = ys.begin; i < ys.end; ++i) {
            h.price = ds.price.price[i];
            h.potential_mwh = park.potential_generation[i];
            if (spec.kind == ContractKind::Financial) {
                h.reference_cf = ds.reference.capacity_factor[i];
            }
            const HourlyCashFlow cf = hourly_cashflow(spec, level, h, k_mw);
            total_sum += cf.total;
            q_sum += cf.dispatched_mwh;
        }
        table.years.push_back(ys.year);
        const double gen_per_mw = q_sum / cap;
        table.generation_per_mw.push_back(gen_per_mw);
        // under the hourly reference the per-MWh price is identically the
        // strike, so the annual figure is taken in its exact product form
        table.revenue_per_mw.push_back(strike_collapse && level.value > 0.0
                                           ? level.value * gen_per_mw
                                           : total_sum / cap);
    }
    return table;
}

inline AchievedPrice achieved_price(const AnnualRevenueTable& table) {
    return achieved_price(std::span<const int>(table.years),
                          std::span<const double>(table.revenue_per_mw),
                          std::span<const double>(table.generation_per_mw));
}

inline std::string annual_revenue_csv_header() {
    return "park_id,contract_id,year,revenue_eur_per_mw,generation_mwh_per_mw";
}

inline void append_annual_revenue_rows(csv::Writer& w, const AnnualRevenueTable& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        w.row({t.park_id, t.contract_id, std::to_string(t.years[i]),
               format_double(t.revenue_per_mw[i]), format_double(t.generation_per_mw[i])});
    }
}

// ---------------------------------------------------------------------------
// Piecewise-linear annual revenue in the support level.
//
// For every specification the set of dispatched hours changes with the
// support level only through per-hour thresholds, and revenue is linear in
// the level between those thresholds. Sorting thresholds once per park,
// contract and year lets the equilibrium solver evaluate annual revenue in
// O(log T) instead of re-walking the hour index.
// ---------------------------------------------------------------------------

class RevenueModel {
public:
    RevenueModel(const MarketDataset& ds, const ParkSeries& park, const ContractSpec& spec)
        : spec_(spec) {
        if (park.size() != ds.hour_count()) {
            throw DataError("RevenueModel: park not aligned with dataset");
        }
        std::map<int, double> capture;
        if (spec.uses_annual_reference()) capture = capture_prices(ds);
        const double cap = park.installed_capacity_mw;

        for (const auto& ys : ds.years) {
            YearCurve yc;
            yc.year = ys.year;
            yc.hour_count = static_cast<double>(ys.hour_count());
            if (spec.uses_annual_reference()) yc.capture = capture.at(ys.year);

            std::vector<Hinge> hinges;
            for (std::size_t i = ys.begin; i < ys.end; ++i) {
                const double p = ds.price.price[i];
                const double q = park.potential_generation[i] / cap;  // MWh per MW
                switch (spec_.kind) {
                    case ContractKind::Merchant:
                        if (p > 0.0) {
                            yc.base_revenue += q * p;
                            yc.base_generation += q;
                        }
                        break;
                    case ContractKind::Financial:
                        if (p > 0.0) {
                            yc.base_revenue += q * p;
                            yc.base_generation += q;
                        }
                        yc.float_leg += ds.reference.capacity_factor[i] * p;
                        break;
                    case ContractKind::TwoSided:
                        if (spec_.reference_mode == ReferenceMode::HourlySpot) {
                            // dispatch iff S > 0; revenue S*q
                            hinges.push_back({0.0, 0.0, q});
                        } else {
                            if (spec_.suspend_negative && p <= 0.0) break;
                            // dispatch iff S > v̄ - p
                            hinges.push_back({yc.capture - p, q * (p - yc.capture), q});
                        }
                        break;
                    case ContractKind::OneSided:
                        if (spec_.reference_mode == ReferenceMode::HourlySpot) {
                            if (p > 0.0) {
                                // always dispatched; premium q*(S-p) once S > p
                                yc.base_revenue += q * p;
                                yc.base_generation += q;
                                hinges.push_back({p, -q * p, q});
                            } else {
                                // dispatch iff S > 0, then earns q*S
                                hinges.push_back({0.0, 0.0, q});
                            }
                        } else {
                            // expressed in the premium pi = max(S - v̄, 0):
                            // hour on iff pi > -p, contributing q*(p + pi)
                            if (spec_.suspend_negative && p <= 0.0) break;
                            hinges.push_back({-p, q * p, q});
                        }
                        break;
                }
            }
            std::stable_sort(hinges.begin(), hinges.end(),
                             [](const Hinge& a, const Hinge& b) { return a.threshold < b.threshold; });
            yc.thresholds.reserve(hinges.size());
            yc.cum_base.reserve(hinges.size());
            yc.cum_slope.reserve(hinges.size());
            double cb = 0.0, cs = 0.0;
            for (const auto& hg : hinges) {
                cb += hg.base;
                cs += hg.slope;
                yc.thresholds.push_back(hg.threshold);
                yc.cum_base.push_back(cb);
                yc.cum_slope.push_back(cs);
            }
            years_.push_back(std::move(yc));
        }
    }

    std::size_t year_count() const { return years_.size(); }
    int year(std::size_t i) const { return years_[i].year; }

    // Annual revenue €/MW at support level x (strike S, or fixed rate A
    // combined with contract factor alpha for financial CfDs).
    double revenue(std::size_t year_idx, double x, double alpha = 1.0) const {
        const YearCurve& yc = years_[year_idx];
        if (spec_.kind == ContractKind::Merchant) return yc.base_revenue;
        if (spec_.kind == ContractKind::Financial) {
            return yc.base_revenue + alpha * (x * yc.hour_count - yc.float_leg);
        }
        const auto [var, active] = effective_level(yc, x);
        if (!active) return yc.base_revenue;
        const std::size_t k = cut(yc, var);
        if (k == 0) return yc.base_revenue;
        return yc.base_revenue + yc.cum_base[k - 1] + var * yc.cum_slope[k - 1];
    }

    // Annual dispatched volume MWh/MW at support level x.
    double generation(std::size_t year_idx, double x) const {
        const YearCurve& yc = years_[year_idx];
        if (spec_.kind == ContractKind::Merchant || spec_.kind == ContractKind::Financial) {
            return yc.base_generation;
        }
        if (spec_.kind == ContractKind::OneSided &&
            spec_.reference_mode == ReferenceMode::HourlySpot) {
            // above-threshold hinge hours beyond the always-on ones are the
            // p <= 0 hours switching on with S > 0
            double g = yc.base_generation;
            const auto [var, active] = effective_level(yc, x);
            if (active) {
                const std::size_t k = cut(yc, var);
                // thresholds are sorted, so the p<=0 hours (threshold 0) form
                // a prefix; premium hinges on p>0 hours carry no extra
                // generation, it is already in base
                for (std::size_t j = 0; j < k && yc.thresholds[j] <= 0.0; ++j) {
                    g += yc.cum_slope[j] - (j ? yc.cum_slope[j - 1] : 0.0);
                }
            }
            return g;
        }
        const auto [var, active] = effective_level(yc, x);
        if (!active) return yc.base_generation;
        const std::size_t k = cut(yc, var);
        if (k == 0) return yc.base_generation;
        return yc.base_generation + yc.cum_slope[k - 1];
    }

private:
    struct Hinge {
        double threshold = 0.0;  // hour switches on when the level exceeds this
        double base = 0.0;       // level-independent contribution once on
        double slope = 0.0;      // per-unit-of-level contribution once on
    };
    struct YearCurve {
        int year = 0;
        double hour_count = 0.0;
        double capture = 0.0;
        double base_revenue = 0.0;     // always-on part, €/MW
        double base_generation = 0.0;  // always-on dispatched MWh/MW
        double float_leg = 0.0;        // sum of g_ref*p over the year (financial)
        std::vector<double> thresholds;
        std::vector<double> cum_base;
        std::vector<double> cum_slope;
    };

    // maps the strike to the hinge variable: S itself for two-sided curves,
    // the premium for one-sided annual curves
    std::pair<double, bool> effective_level(const YearCurve& yc, double x) const {
        if (spec_.kind == ContractKind::OneSided &&
            spec_.reference_mode == ReferenceMode::AnnualCapture) {
            const double pi = std::max(x - yc.capture, 0.0);
            return {pi, true};
        }
        return {x, true};
    }

    std::size_t cut(const YearCurve& yc, double var) const {
        return static_cast<std::size_t>(
            std::lower_bound(yc.thresholds.begin(), yc.thresholds.end(), var) -
            yc.thresholds.begin());
    }

    ContractSpec spec_;
    std::vector<YearCurve> years_;
};

}  // namespace cfdsim
