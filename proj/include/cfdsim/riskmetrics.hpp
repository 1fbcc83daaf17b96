#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cfdsim/common.hpp"
#include "cfdsim/timeseries.hpp"

namespace cfdsim {

struct AnnualCapturePrice {
    int year = 0;
    double value = 0.0;  // €/MWh
};

// Volume-weighted average price of the technology's generation over one year.
inline AnnualCapturePrice annual_capture_price(const PriceSeries& price, const FleetSeries& fleet,
                                               int year) {
    if (price.hours != fleet.hours) {
        throw DataError("annual_capture_price: price and fleet hour indices differ");
    }
    double wsum = 0.0, qsum = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < price.size(); ++i) {
        if (year_of_hour(price.hours[i]) != year) continue;
        seen = true;
        wsum += fleet.generation[i] * price.price[i];
        qsum += fleet.generation[i];
    }
    if (!seen) throw DataError("annual_capture_price: year " + std::to_string(year) + " absent");
    if (qsum <= 0.0) {
        throw DataError("annual_capture_price: zero fleet generation in year " +
                        std::to_string(year));
    }
    return {year, wsum / qsum};
}

// Capture price for every retained year of an aligned dataset.
inline std::map<int, double> capture_prices(const MarketDataset& ds) {
    std::map<int, double> out;
    for (const auto& ys : ds.years) {
        double wsum = 0.0, qsum = 0.0;
        for (std::size_t i = ys.begin; i < ys.end; ++i) {
            wsum += ds.fleet.generation[i] * ds.price.price[i];
            qsum += ds.fleet.generation[i];
        }
        if (qsum <= 0.0) {
            throw DataError("capture_prices: zero fleet generation in year " +
                            std::to_string(ys.year));
        }
        out[ys.year] = wsum / qsum;
    }
    return out;
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation, n-1 denominator. With ~10 observed years the
// denominator choice is material, so it is pinned here.
inline double sample_std(std::span<const double> v) {
    const double m = mean_of(v);
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::sqrt(s2 / static_cast<double>(v.size() - 1));
}

// CV = sigma/mu across state-years. Undefined (not a number, not infinity)
// when the mean is not positive.
inline std::optional<double> coefficient_of_variation(std::span<const double> revenues) {
    if (revenues.size() < 2) {
        throw DataError("coefficient_of_variation: needs at least 2 years");
    }
    const double m = mean_of(revenues);
    if (!(m > 0.0)) return std::nullopt;
    return sample_std(revenues) / m;
}

// Linear interpolation between order statistics (inclusive), q in [0,1].
inline double percentile(std::vector<double> sorted_values, double q) {
    auto& v = sorted_values;
    if (v.empty()) throw DataError("percentile: empty input");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double h = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct RiskSummary {
    double mean = 0.0;
    double std = 0.0;
    std::optional<double> cov;  // undefined when mean <= 0 or degenerate
    double min = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    bool degenerate = false;  // single observation: std reported as 0
};

inline RiskSummary risk_summary(std::span<const double> revenues) {
    if (revenues.empty()) throw DataError("risk_summary: empty input");
    RiskSummary s;
    s.mean = mean_of(revenues);
    s.min = *std::min_element(revenues.begin(), revenues.end());
    std::vector<double> sorted(revenues.begin(), revenues.end());
    s.p10 = percentile(sorted, 0.10);
    s.p50 = percentile(sorted, 0.50);
    s.p90 = percentile(sorted, 0.90);
    if (revenues.size() < 2) {
        s.degenerate = true;
        s.std = 0.0;
        s.cov = std::nullopt;
        return s;
    }
    s.std = sample_std(revenues);
    s.cov = s.mean > 0.0 ? std::optional<double>(s.std / s.mean) : std::nullopt;
    return s;
}

struct AchievedPrice {
    std::vector<int> years;
    std::vector<double> per_year;  // €/MWh
    double pooled = 0.0;           // sum(revenue)/sum(generation)
};

// Revenue earned per MWh actually dispatched; the pooled value is the
// generation-weighted average across years.
inline AchievedPrice achieved_price(std::span<const int> years, std::span<const double> revenue_per_mw,
                                    std::span<const double> generation_per_mw) {
    if (years.empty() || years.size() != revenue_per_mw.size() ||
        years.size() != generation_per_mw.size()) {
        throw DataError("achieved_price: inconsistent inputs");
    }
    AchievedPrice out;
    double rsum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (!(generation_per_mw[i] > 0.0)) {
            throw DataError("achieved_price: zero generation in year " + std::to_string(years[i]));
        }
        out.years.push_back(years[i]);
        out.per_year.push_back(revenue_per_mw[i] / generation_per_mw[i]);
        rsum += revenue_per_mw[i];
        gsum += generation_per_mw[i];
    }
    out.pooled = rsum / gsum;
    return out;
}

}  // namespace cfdsim
