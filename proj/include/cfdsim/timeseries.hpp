#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfdsim/common.hpp"
#include "cfdsim/csv.hpp"

namespace cfdsim {

// Hourly day-ahead price path p_t. Negative prices are legitimate values.
struct PriceSeries {
    std::vector<HourStamp> hours;
    std::vector<double> price;  // €/MWh

    std::size_t size() const { return hours.size(); }
};

// Market-wide generation Q_t and installed capacity K_t of the technology.
struct FleetSeries {
    std::vector<HourStamp> hours;
    std::vector<double> generation;  // MWh per hour
    std::vector<double> capacity;    // MW installed

    std::size_t size() const { return hours.size(); }
};

// Normalized benchmark capacity factor g_t, forced to zero at hours with
// negative spot price so floating payments are suspended there.
struct ReferenceProfile {
    std::vector<HourStamp> hours;
    std::vector<double> capacity_factor;  // MWh/MW, in [0,1]

    std::size_t size() const { return hours.size(); }
};

// One wind park: potential hourly output before price-driven curtailment.
struct ParkSeries {
    std::string park_id;
    double installed_capacity_mw = 0.0;
    int commissioning_year = 0;
    std::vector<HourStamp> hours;
    std::vector<double> potential_generation;  // MWh per hour, <= capacity

    std::size_t size() const { return hours.size(); }
};

// Contiguous per-year slice of the common hour index.
struct YearSlice {
    int year = 0;
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive

    std::size_t hour_count() const { return end - begin; }
};

// The balanced panel all simulations run on: every member series shares one
// hour index and only calendar years with enough coverage are retained.
struct MarketDataset {
    PriceSeries price;
    FleetSeries fleet;
    ReferenceProfile reference;
    std::vector<ParkSeries> parks;
    std::vector<int> year_index;    // per hour, calendar year
    std::vector<YearSlice> years;   // retained years, in order
    std::size_t min_valid_hours = 8000;

    std::size_t hour_count() const { return price.size(); }

    const ParkSeries& park(const std::string& id) const {
        for (const auto& p : parks)
            if (p.park_id == id) return p;
        throw DataError("unknown park id: " + id);
    }
};

namespace detail {

inline void require_hour_aligned(HourStamp t, const std::string& what) {
    if (t % kSecondsPerHour != 0) throw DataError(what + ": timestamp not hour-aligned");
}

template <typename Swap>
inline void sort_by_hours(std::vector<HourStamp>& hours, Swap swap_payload) {
    std::vector<std::size_t> order(hours.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return hours[a] < hours[b]; });
    swap_payload(order);
}

template <typename T>
inline std::vector<T> apply_order(const std::vector<T>& v, const std::vector<std::size_t>& order) {
    std::vector<T> out;
    out.reserve(v.size());
    for (std::size_t i : order) out.push_back(v[i]);
    return out;
}

}  // namespace detail

inline constexpr const char* kPriceCsvHeader = "timestamp,price_eur_mwh";
inline constexpr const char* kFleetCsvHeader = "timestamp,generation_mwh,capacity_mw";
inline constexpr const char* kParkCsvHeader = "timestamp,generation_mwh";

// Relative band within which an hourly value may exceed declared capacity
// and be clipped instead of rejected; absorbs metering noise only.
inline constexpr double kCapacityTolerance = 1e-3;

inline PriceSeries load_price_series(const std::filesystem::path& path) {
    auto rows = csv::read_file(path, kPriceCsvHeader);
    PriceSeries out;
    out.hours.reserve(rows.size());
    out.price.reserve(rows.size());
    std::vector<std::string> raw;
    raw.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.fields.size() != 2) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": expected 2 fields");
        }
        HourStamp t;
        double p;
        try {
            t = parse_iso_hour(r.fields[0]);
            p = parse_double(r.fields[1], "price_eur_mwh");
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": " + e.what());
        }
        if (!std::isfinite(p)) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": non-finite price");
        }
        out.hours.push_back(t);
        out.price.push_back(p);
        raw.push_back(r.raw);
    }
    if (out.hours.empty()) throw DataError(path.string() + ": no data rows");
    detail::sort_by_hours(out.hours, [&](const std::vector<std::size_t>& order) {
        out.hours = detail::apply_order(out.hours, order);
        out.price = detail::apply_order(out.price, order);
        raw = detail::apply_order(raw, order);
    });
    // duplicates are dropped only when the entire row is byte-identical;
    // same stamp with different content is a conflict
    PriceSeries dedup;
    for (std::size_t i = 0; i < out.hours.size(); ++i) {
        if (!dedup.hours.empty() && dedup.hours.back() == out.hours[i]) {
            if (raw[i] != raw[i - 1]) {
                throw DataError(path.string() + ": conflicting duplicate timestamp " +
                                format_iso_hour(out.hours[i]));
            }
            continue;
        }
        dedup.hours.push_back(out.hours[i]);
        dedup.price.push_back(out.price[i]);
    }
    return dedup;
}

inline FleetSeries load_fleet_series(const std::filesystem::path& path) {
    auto rows = csv::read_file(path, kFleetCsvHeader);
    FleetSeries out;
    for (const auto& r : rows) {
        if (r.fields.size() != 3) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": expected 3 fields");
        }
        HourStamp t;
        double gen, cap;
        try {
            t = parse_iso_hour(r.fields[0]);
            gen = parse_double(r.fields[1], "generation_mwh");
            cap = parse_double(r.fields[2], "capacity_mw");
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": " + e.what());
        }
        if (!std::isfinite(gen) || gen < 0.0) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": negative generation");
        }
        if (!std::isfinite(cap) || cap <= 0.0) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": capacity must be > 0");
        }
        if (gen > cap * (1.0 + kCapacityTolerance)) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) +
                            ": generation exceeds capacity beyond tolerance");
        }
        out.hours.push_back(t);
        out.generation.push_back(std::min(gen, cap));
        out.capacity.push_back(cap);
    }
    if (out.hours.empty()) throw DataError(path.string() + ": no data rows");
    detail::sort_by_hours(out.hours, [&](const std::vector<std::size_t>& order) {
        out.hours = detail::apply_order(out.hours, order);
        out.generation = detail::apply_order(out.generation, order);
        out.capacity = detail::apply_order(out.capacity, order);
    });
    for (std::size_t i = 1; i < out.hours.size(); ++i) {
        if (out.hours[i] == out.hours[i - 1]) {
            throw DataError(path.string() + ": duplicate timestamp " + format_iso_hour(out.hours[i]));
        }
    }
    return out;
}

struct ParkMeta {
    std::string park_id;
    double capacity_mw = 0.0;
    int commissioning_year = 0;
};

inline ParkSeries load_park_series(const std::filesystem::path& path, const ParkMeta& meta) {
    if (meta.capacity_mw <= 0.0) {
        throw DataError("park '" + meta.park_id + "': missing or non-positive capacity");
    }
    auto rows = csv::read_file(path, kParkCsvHeader);
    ParkSeries out;
    out.park_id = meta.park_id;
    out.installed_capacity_mw = meta.capacity_mw;
    out.commissioning_year = meta.commissioning_year;
    for (const auto& r : rows) {
        if (r.fields.size() != 2) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": expected 2 fields");
        }
        HourStamp t;
        double gen;
        try {
            t = parse_iso_hour(r.fields[0]);
            gen = parse_double(r.fields[1], "generation_mwh");
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": " + e.what());
        }
        if (!std::isfinite(gen) || gen < 0.0) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) + ": negative generation");
        }
        if (gen > meta.capacity_mw * (1.0 + kCapacityTolerance)) {
            throw DataError(path.string() + ":" + std::to_string(r.line_no) +
                            ": generation exceeds declared capacity beyond tolerance");
        }
        out.hours.push_back(t);
        out.potential_generation.push_back(std::min(gen, meta.capacity_mw));
    }
    if (out.hours.empty()) throw DataError(path.string() + ": no data rows");
    detail::sort_by_hours(out.hours, [&](const std::vector<std::size_t>& order) {
        out.hours = detail::apply_order(out.hours, order);
        out.potential_generation = detail::apply_order(out.potential_generation, order);
    });
    for (std::size_t i = 1; i < out.hours.size(); ++i) {
        if (out.hours[i] == out.hours[i - 1]) {
            throw DataError(path.string() + ": duplicate timestamp " + format_iso_hour(out.hours[i]));
        }
    }
    return out;
}

// g_t = Q_t / K_t at non-negative prices, 0 otherwise.
inline ReferenceProfile build_reference_profile(const FleetSeries& fleet, const PriceSeries& price) {
    if (fleet.hours != price.hours) {
        throw DataError("build_reference_profile: fleet and price hour indices differ");
    }
    ReferenceProfile out;
    out.hours = fleet.hours;
    out.capacity_factor.resize(fleet.size());
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        if (fleet.capacity[i] <= 0.0) {
            throw DataError("build_reference_profile: zero capacity at " +
                            format_iso_hour(fleet.hours[i]));
        }
        out.capacity_factor[i] =
            price.price[i] < 0.0 ? 0.0 : fleet.generation[i] / fleet.capacity[i];
    }
    return out;
}

// Intersects all hour indices, drops calendar years with fewer than
// min_valid_hours common hours, and rebuilds the reference profile on the
// retained index. Years below the threshold are dropped whole; gap-filling
// would fabricate revenue states.
inline MarketDataset align_dataset(const PriceSeries& price, const FleetSeries& fleet,
                                   std::vector<ParkSeries> parks,
                                   std::size_t min_valid_hours = 8000) {
    if (parks.empty()) throw DataError("align_dataset: at least one park required");
    if (price.size() == 0 || fleet.size() == 0) throw DataError("align_dataset: empty input series");

    // intersection of sorted hour indices
    std::vector<HourStamp> common = price.hours;
    auto intersect = [&](const std::vector<HourStamp>& other) {
        std::vector<HourStamp> out;
        std::set_intersection(common.begin(), common.end(), other.begin(), other.end(),
                              std::back_inserter(out));
        common = std::move(out);
    };
    intersect(fleet.hours);
    for (const auto& p : parks) intersect(p.hours);
    if (common.empty()) throw DataError("align_dataset: hour indices have empty intersection");

    // validity screen per calendar year
    std::map<int, std::size_t> hours_per_year;
    for (HourStamp t : common) ++hours_per_year[year_of_hour(t)];
    std::vector<HourStamp> kept;
    kept.reserve(common.size());
    for (HourStamp t : common) {
        if (hours_per_year[year_of_hour(t)] >= min_valid_hours) kept.push_back(t);
    }
    if (kept.empty()) {
        throw DataError("align_dataset: no calendar year has >= " + std::to_string(min_valid_hours) +
                        " valid hours");
    }

    auto index_of = [](const std::vector<HourStamp>& hours) {
        std::unordered_map<HourStamp, std::size_t> m;
        m.reserve(hours.size() * 2);
        for (std::size_t i = 0; i < hours.size(); ++i) m.emplace(hours[i], i);
        return m;
    };
    const auto price_idx = index_of(price.hours);
    const auto fleet_idx = index_of(fleet.hours);

    MarketDataset ds;
    ds.min_valid_hours = min_valid_hours;
    ds.price.hours = kept;
    ds.fleet.hours = kept;
    for (HourStamp t : kept) {
        ds.price.price.push_back(price.price[price_idx.at(t)]);
        const std::size_t fi = fleet_idx.at(t);
        ds.fleet.generation.push_back(fleet.generation[fi]);
        ds.fleet.capacity.push_back(fleet.capacity[fi]);
    }
    for (auto& p : parks) {
        const auto pidx = index_of(p.hours);
        ParkSeries out;
        out.park_id = p.park_id;
        out.installed_capacity_mw = p.installed_capacity_mw;
        out.commissioning_year = p.commissioning_year;
        out.hours = kept;
        out.potential_generation.reserve(kept.size());
        for (HourStamp t : kept) out.potential_generation.push_back(p.potential_generation[pidx.at(t)]);
        ds.parks.push_back(std::move(out));
    }
    ds.reference = build_reference_profile(ds.fleet, ds.price);

    ds.year_index.reserve(kept.size());
    for (HourStamp t : kept) ds.year_index.push_back(year_of_hour(t));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (ds.years.empty() || ds.years.back().year != ds.year_index[i]) {
            ds.years.push_back({ds.year_index[i], i, i + 1});
        } else {
            ds.years.back().end = i + 1;
        }
    }
    return ds;
}

inline MarketDataset align_dataset(const MarketDataset& ds) {
    return align_dataset(ds.price, ds.fleet, ds.parks, ds.min_valid_hours);
}

// ---- CSV export (same schemas as ingestion, round-trip exact) ----

inline std::string price_series_csv(const PriceSeries& s) {
    csv::Writer w({"timestamp", "price_eur_mwh"});
    for (std::size_t i = 0; i < s.size(); ++i) {
        w.row({format_iso_hour(s.hours[i]), format_double(s.price[i])});
    }
    return w.str();
}

inline std::string fleet_series_csv(const FleetSeries& s) {
    csv::Writer w({"timestamp", "generation_mwh", "capacity_mw"});
    for (std::size_t i = 0; i < s.size(); ++i) {
        w.row({format_iso_hour(s.hours[i]), format_double(s.generation[i]),
               format_double(s.capacity[i])});
    }
    return w.str();
}

inline std::string park_series_csv(const ParkSeries& s) {
    csv::Writer w({"timestamp", "generation_mwh"});
    for (std::size_t i = 0; i < s.size(); ++i) {
        w.row({format_iso_hour(s.hours[i]), format_double(s.potential_generation[i])});
    }
    return w.str();
}

}  // namespace cfdsim
