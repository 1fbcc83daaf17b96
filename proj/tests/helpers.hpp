#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfdsim/contracts.hpp"
#include "cfdsim/finance.hpp"
#include "cfdsim/synth.hpp"
#include "cfdsim/timeseries.hpp"

namespace testutil {

using namespace cfdsim;

// ---- independent oracles ----

// Walks an amortization schedule year by year; a correct annuity payment
// leaves a terminal balance of zero.
inline double amortization_terminal_balance(double debt, double rate, int years, double payment) {
    double balance = debt;
    for (int y = 0; y < years; ++y) balance = balance * (1.0 + rate) - payment;
    return balance;
}

// Per-unit-of-debt annuity payment found by bisection on the schedule.
inline double oracle_annuity_factor(double rate, int years) {
    double lo = 0.0, hi = 1.0 + rate;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (amortization_terminal_balance(1.0, rate, years, mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Explicit discounted sum of a constant dividend stream.
inline double discounted_dividend_sum(double dividend, double rate, int years) {
    double npv = 0.0;
    for (int y = 1; y <= years; ++y) npv += dividend / std::pow(1.0 + rate, y);
    return npv;
}

inline double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// ---- dataset builders ----

// Consecutive hours starting 2020-01-01, one park, small enough for
// hand-checked expectations. min_valid_hours is relaxed to 1.
inline MarketDataset tiny_dataset(const std::vector<double>& price,
                                  const std::vector<double>& potential,
                                  double park_capacity_mw = 10.0,
                                  std::vector<double> fleet_generation = {},
                                  double fleet_capacity_mw = 1000.0) {
    const std::size_t n = price.size();
    std::vector<HourStamp> hours(n);
    for (std::size_t i = 0; i < n; ++i) {
        hours[i] = make_hour(2020, 1, 1, 0) + static_cast<HourStamp>(i) * kSecondsPerHour;
    }
    if (fleet_generation.empty()) fleet_generation.assign(n, 0.25 * fleet_capacity_mw);
    PriceSeries ps;
    ps.hours = hours;
    ps.price = price;
    FleetSeries fs;
    fs.hours = hours;
    fs.generation = fleet_generation;
    fs.capacity.assign(n, fleet_capacity_mw);
    ParkSeries pk;
    pk.park_id = "t01";
    pk.installed_capacity_mw = park_capacity_mw;
    pk.commissioning_year = 2020;
    pk.hours = hours;
    pk.potential_generation = potential;
    return align_dataset(ps, fs, {pk}, 1);
}

// Full non-leap calendar years of constant price and constant hourly
// capacity factor; the deterministic limit of the financial model.
inline MarketDataset constant_dataset(int n_years, double annual_gen_per_mw, double price_level,
                                      double capacity_mw = 10.0) {
    std::vector<HourStamp> hours;
    std::vector<double> price, fgen, fcap, pot;
    for (int y = 0; y < n_years; ++y) {
        const int year = 2017 + y;  // 2017..2019 are non-leap
        const HourStamp y0 = make_hour(year, 1, 1, 0);
        const int n = hours_in_year(year);
        for (int h = 0; h < n; ++h) {
            hours.push_back(y0 + static_cast<HourStamp>(h) * kSecondsPerHour);
            price.push_back(price_level);
            fgen.push_back(0.25 * 50000.0);
            fcap.push_back(50000.0);
            pot.push_back(annual_gen_per_mw / 8760.0 * capacity_mw);
        }
    }
    PriceSeries ps;
    ps.hours = hours;
    ps.price = price;
    FleetSeries fs;
    fs.hours = hours;
    fs.generation = fgen;
    fs.capacity = fcap;
    ParkSeries pk;
    pk.park_id = "const";
    pk.installed_capacity_mw = capacity_mw;
    pk.commissioning_year = 2017;
    pk.hours = hours;
    pk.potential_generation = pot;
    return align_dataset(ps, fs, {pk}, 8000);
}

// ---- the seeded benchmark fleet (20 parks, 10 years) ----

inline SynthConfig benchmark_config() {
    SynthConfig c;
    c.start_year = 2014;
    c.n_years = 10;
    c.n_parks = 20;
    c.price_mean = 45.0;
    c.price_volatility = 15.0;
    c.negative_price_share = 0.02;
    c.year_price_sigma = 0.35;
    return c;
}

inline constexpr std::uint64_t kBenchmarkSeed = 7;

inline SynthConfig small_config(int parks = 3, int years = 4) {
    SynthConfig c;
    c.n_parks = parks;
    c.n_years = years;
    c.year_price_sigma = 0.35;
    return c;
}

}  // namespace testutil
