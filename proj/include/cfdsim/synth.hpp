#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cfdsim/common.hpp"
#include "cfdsim/timeseries.hpp"

namespace cfdsim {

// Synthetic stand-in for the confidential operational data: a mean-reverting
// price path with seasonal and diurnal harmonics, heavy-tailed shocks and a
// configurable share of negative-price hours, plus a national wind profile
// and per-park profiles with a target correlation to it.
struct SynthConfig {
    int start_year = 2014;
    int n_years = 10;
    int n_parks = 5;

    // price process
    double price_mean = 45.0;         // €/MWh
    double price_volatility = 15.0;   // std of the mean-reverting shock, €/MWh
    double negative_price_share = 0.02;
    double year_price_sigma = 0.30;   // lognormal sigma of annual price level shifts
    double price_wind_coupling = 30.0;  // €/MWh price drop per unit of fleet capacity factor

    // fleet profile
    double fleet_mean_cf = 0.25;
    double fleet_cf_shape = 1.0;      // latent-to-logit slope; larger = wider cf swings
    double fleet_capacity_mw = 56000.0;
    double wind_year_sigma = 0.25;    // annual wind-resource shifts, latent units

    // parks
    double park_capacity_min_mw = 5.0;
    double park_capacity_max_mw = 40.0;
    // target Pearson correlation of each park's hourly profile with the
    // national profile; empty = spread evenly over [0.3, 0.8]
    std::vector<double> park_correlation;

    void validate() const {
        if (n_years < 1) throw ConfigError("synth: n_years must be >= 1");
        if (n_parks < 1) throw ConfigError("synth: n_parks must be >= 1");
        if (price_volatility < 0.0) throw ConfigError("synth: negative price volatility");
        if (price_mean <= 0.0) throw ConfigError("synth: price_mean must be > 0");
        if (negative_price_share < 0.0 || negative_price_share > 0.45) {
            throw ConfigError("synth: negative_price_share outside [0, 0.45]");
        }
        if (fleet_mean_cf <= 0.01 || fleet_mean_cf >= 0.95) {
            throw ConfigError("synth: fleet_mean_cf outside (0.01, 0.95)");
        }
        if (park_capacity_min_mw <= 0.0 || park_capacity_max_mw < park_capacity_min_mw) {
            throw ConfigError("synth: invalid park capacity range");
        }
        for (double c : park_correlation) {
            if (c < 0.0 || c > 1.0) throw ConfigError("synth: correlation outside [0,1]");
        }
        if (!park_correlation.empty() && park_correlation.size() != 1 &&
            park_correlation.size() != static_cast<std::size_t>(n_parks)) {
            throw ConfigError("synth: park_correlation must have 0, 1 or n_parks entries");
        }
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic normal draws independent of the standard library's
// distribution implementations, so equal seeds give equal datasets anywhere.
class NormalRng {
public:
    explicit NormalRng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() {
        // 53-bit mantissa uniform in [0,1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
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
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

inline void standardize(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    const double s = std::sqrt(s2 / static_cast<double>(v.size()));
    for (double& x : v) x = s > 0.0 ? (x - m) / s : 0.0;
}

}  // namespace detail

// Deterministic for a fixed (config, seed): equal inputs give byte-identical
// datasets after serialization.
inline MarketDataset synthesize_market(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();

    // hour index over whole UTC calendar years
    std::vector<HourStamp> hours;
    std::vector<int> day_of_year;
    std::vector<int> hour_of_day;
    std::vector<std::size_t> year_ordinal;  // 0-based year position
    for (int y = 0; y < cfg.n_years; ++y) {
        const int year = cfg.start_year + y;
        const HourStamp y0 = make_hour(year, 1, 1, 0);
        const int n = hours_in_year(year);
        for (int h = 0; h < n; ++h) {
            hours.push_back(y0 + static_cast<HourStamp>(h) * kSecondsPerHour);
            day_of_year.push_back(h / 24);
            hour_of_day.push_back(h % 24);
            year_ordinal.push_back(static_cast<std::size_t>(y));
        }
    }
    const std::size_t n = hours.size();
    constexpr double kTau = 2.0 * 3.14159265358979323846;

    // national wind latent: seasonal + diurnal harmonics, AR(1) noise and a
    // per-year resource shift shared by all parks through the correlation
    detail::NormalRng wind_rng(detail::splitmix64(seed ^ 0x57494e44ULL));
    std::vector<double> wind_year(static_cast<std::size_t>(cfg.n_years));
    for (auto& w : wind_year) w = wind_rng.normal() * cfg.wind_year_sigma;
    std::vector<double> nat_latent(n);
    {
        const double phi = 0.92;
        const double sig = std::sqrt(1.0 - phi * phi);
        double ar = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ar = phi * ar + sig * wind_rng.normal();
            nat_latent[i] = 0.65 * std::cos(kTau * (day_of_year[i] - 15) / 365.25) +
                            0.18 * std::cos(kTau * (hour_of_day[i] - 14) / 24.0) + ar +
                            wind_year[year_ordinal[i]];
        }
    }
    detail::standardize(nat_latent);
    const double cf_a = detail::logit(cfg.fleet_mean_cf);
    std::vector<double> nat_cf(n);
    for (std::size_t i = 0; i < n; ++i) {
        nat_cf[i] = detail::logistic(cf_a + cfg.fleet_cf_shape * nat_latent[i]);
    }

    FleetSeries fleet;
    fleet.hours = hours;
    fleet.generation.resize(n);
    fleet.capacity.assign(n, cfg.fleet_capacity_mw);
    for (std::size_t i = 0; i < n; ++i) fleet.generation[i] = nat_cf[i] * cfg.fleet_capacity_mw;

    // parks: latent mix rho*national + sqrt(1-rho^2)*idiosyncratic, squashed
    // with the national link so rho = 1 degenerates to an exactly
    // proportional profile
    std::vector<double> targets(static_cast<std::size_t>(cfg.n_parks));
    if (cfg.park_correlation.empty()) {
        for (int i = 0; i < cfg.n_parks; ++i) {
            targets[static_cast<std::size_t>(i)] =
                cfg.n_parks == 1 ? 0.55 : 0.3 + 0.5 * static_cast<double>(i) / (cfg.n_parks - 1);
        }
    } else if (cfg.park_correlation.size() == 1) {
        std::fill(targets.begin(), targets.end(), cfg.park_correlation[0]);
    } else {
        targets = cfg.park_correlation;
    }

    std::vector<ParkSeries> parks;
    parks.reserve(static_cast<std::size_t>(cfg.n_parks));
    detail::NormalRng meta_rng(detail::splitmix64(seed ^ 0x4d455441ULL));
    for (int pi = 0; pi < cfg.n_parks; ++pi) {
        ParkSeries park;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "p%03d", pi + 1);
        park.park_id = idbuf;
        park.installed_capacity_mw =
            cfg.park_capacity_min_mw +
            meta_rng.uniform01() * (cfg.park_capacity_max_mw - cfg.park_capacity_min_mw);
        park.commissioning_year =
            cfg.start_year - static_cast<int>(meta_rng.uniform01() * 4.0);
        park.hours = hours;
        park.potential_generation.resize(n);

        const double target = targets[static_cast<std::size_t>(pi)];
        if (target >= 1.0) {
            for (std::size_t i = 0; i < n; ++i) {
                park.potential_generation[i] = nat_cf[i] * park.installed_capacity_mw;
            }
            parks.push_back(std::move(park));
            continue;
        }

        // idiosyncratic latent stream, reused across calibration passes
        auto make_idio = [&](std::uint64_t stream) {
            detail::NormalRng prng(detail::splitmix64(seed ^ (0x5041524bULL + stream)));
            std::vector<double> e(n);
            const double phi = 0.90;
            const double sig = std::sqrt(1.0 - phi * phi);
            double ar = 0.0;
            const double yshift = prng.normal() * cfg.wind_year_sigma * 0.5;
            for (std::size_t i = 0; i < n; ++i) {
                ar = phi * ar + sig * prng.normal();
                e[i] = ar + yshift;
            }
            detail::standardize(e);
            return e;
        };
        const std::vector<double> idio = make_idio(static_cast<std::uint64_t>(pi) * 1315423911ULL);

        // one secant pass compensates the squash's correlation shrink
        double rho = target;
        std::vector<double> cf(n);
        for (int pass = 0; pass < 3; ++pass) {
            const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
            for (std::size_t i = 0; i < n; ++i) {
                cf[i] = detail::logistic(cf_a + cfg.fleet_cf_shape *
                                                    (rho * nat_latent[i] + mix * idio[i]));
            }
            const double realized = detail::pearson(cf, nat_cf);
            if (std::abs(realized - target) <= 0.05 || realized <= 0.0) break;
            rho = std::clamp(rho * target / realized, 0.0, 0.999999);
        }
        for (std::size_t i = 0; i < n; ++i) {
            park.potential_generation[i] = cf[i] * park.installed_capacity_mw;
        }
        parks.push_back(std::move(park));
    }

    // price path; negative correlation with the wind profile lowers capture
    // prices below the time-average price
    detail::NormalRng price_rng(detail::splitmix64(seed ^ 0x50524943ULL));
    std::vector<double> year_factor(static_cast<std::size_t>(cfg.n_years));
    for (auto& f : year_factor) {
        f = std::exp(price_rng.normal() * cfg.year_price_sigma -
                     0.5 * cfg.year_price_sigma * cfg.year_price_sigma);
    }
    std::vector<double> praw(n);
    {
        const double phi = 0.97;
        const double sig = std::sqrt(1.0 - phi * phi);
        double ar = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double shock = price_rng.normal();
            if (price_rng.uniform01() < 0.01) shock *= 4.0;  // heavy tail
            ar = phi * ar + sig * shock;
            praw[i] = cfg.price_mean * year_factor[year_ordinal[i]] +
                      0.15 * cfg.price_mean * std::cos(kTau * (day_of_year[i] - 20) / 365.25) +
                      0.10 * cfg.price_mean * std::cos(kTau * (hour_of_day[i] - 19) / 24.0) +
                      cfg.price_volatility * ar -
                      cfg.price_wind_coupling * (nat_cf[i] - cfg.fleet_mean_cf);
        }
    }

    // pin the share of negative-price hours: map the requested lower
    // quantile to zero by stretching the half below the median
    std::vector<double> price(n);
    if (cfg.negative_price_share <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) price[i] = std::max(praw[i], 0.0);
    } else {
        std::vector<double> sorted = praw;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[n / 2];
        const double tau = sorted[static_cast<std::size_t>(cfg.negative_price_share *
                                                           static_cast<double>(n))];
        if (!(median > 0.0) || !(tau < median)) {
            throw ConfigError("synth: price process cannot realize the requested negative share");
        }
        const double slope = median / (median - tau);
        for (std::size_t i = 0; i < n; ++i) {
            price[i] = praw[i] >= median ? praw[i] : median + (praw[i] - median) * slope;
        }
    }

    PriceSeries ps;
    ps.hours = hours;
    ps.price = std::move(price);

    return align_dataset(ps, fleet, std::move(parks), 8000);
}

}  // namespace cfdsim
