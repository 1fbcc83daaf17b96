#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cfdsim/timeseries.hpp"
#include "helpers.hpp"

using namespace cfdsim;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    const fs::path p = fs::temp_directory_path() / ("cfdsim_test_" + name);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("price loader echoes a two-row file") {
    const auto p = write_temp("price_two.csv",
                              "timestamp,price_eur_mwh\n"
                              "2020-01-01T00:00Z,30.5\n"
                              "2020-01-01T01:00Z,-5.0\n");
    const PriceSeries s = load_price_series(p);
    REQUIRE(s.size() == 2);
    CHECK(s.price[0] == 30.5);
    CHECK(s.price[1] == -5.0);
    CHECK(s.hours[1] - s.hours[0] == kSecondsPerHour);
}

TEST_CASE("price loader sorts unsorted rows") {
    const auto p = write_temp("price_unsorted.csv",
                              "timestamp,price_eur_mwh\n"
                              "2020-01-01T02:00:00Z,3\n"
                              "2020-01-01T00:00:00Z,1\n"
                              "2020-01-01T01:00:00Z,2\n");
    const PriceSeries s = load_price_series(p);
    CHECK(s.price == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("price loader rejects conflicting duplicates, keeps identical ones") {
    const auto dup = write_temp("price_dup.csv",
                                "timestamp,price_eur_mwh\n"
                                "2020-01-01T00:00Z,30.5\n"
                                "2020-01-01T00:00Z,30.5\n");
    CHECK(load_price_series(dup).size() == 1);

    const auto conflict = write_temp("price_conflict.csv",
                                     "timestamp,price_eur_mwh\n"
                                     "2020-01-01T00:00Z,30.5\n"
                                     "2020-01-01T00:00Z,31.5\n");
    CHECK_THROWS_WITH_AS(load_price_series(conflict),
                         doctest::Contains("2020-01-01T00:00:00Z"), DataError);
}

TEST_CASE("price loader reports the offending line") {
    const auto p = write_temp("price_badrow.csv",
                              "timestamp,price_eur_mwh\n"
                              "2020-01-01T00:00Z,30.5\n"
                              "2020-01-01T01:00Z,not_a_number\n");
    CHECK_THROWS_WITH_AS(load_price_series(p), doctest::Contains(":3:"), DataError);

    CHECK_THROWS_AS(load_price_series(write_temp("price_nan.csv",
                                                 "timestamp,price_eur_mwh\n"
                                                 "2020-01-01T00:00Z,nan\n")),
                    DataError);
    CHECK_THROWS_AS(load_price_series(fs::temp_directory_path() / "cfdsim_does_not_exist.csv"),
                    DataError);
    CHECK_THROWS_AS(load_price_series(write_temp("price_header.csv", "time,price\n1,2\n")),
                    DataError);
}

TEST_CASE("park loader clips within tolerance and rejects beyond") {
    const auto clip = write_temp("park_clip.csv",
                                 "timestamp,generation_mwh\n"
                                 "2020-01-01T00:00Z,10.005\n");
    const ParkSeries s = load_park_series(clip, {"p1", 10.0, 2018});
    CHECK(s.potential_generation[0] == 10.0);

    const auto bad = write_temp("park_bad.csv",
                                "timestamp,generation_mwh\n"
                                "2020-01-01T00:00Z,12\n");
    CHECK_THROWS_AS(load_park_series(bad, {"p1", 10.0, 2018}), DataError);

    const auto neg = write_temp("park_neg.csv",
                                "timestamp,generation_mwh\n"
                                "2020-01-01T00:00Z,-1\n");
    CHECK_THROWS_AS(load_park_series(neg, {"p1", 10.0, 2018}), DataError);

    CHECK_THROWS_AS(load_park_series(clip, {"p1", 0.0, 2018}), DataError);
}

TEST_CASE("park with all-zero hours loads") {
    const auto p = write_temp("park_zero.csv",
                              "timestamp,generation_mwh\n"
                              "2020-01-01T00:00Z,0\n"
                              "2020-01-01T01:00Z,0\n");
    const ParkSeries s = load_park_series(p, {"p1", 10.0, 2018});
    CHECK(s.size() == 2);
    CHECK(s.potential_generation[1] == 0.0);
}

TEST_CASE("reference profile is fleet capacity factor, zero at negative prices") {
    PriceSeries price;
    FleetSeries fleet;
    for (int i = 0; i < 3; ++i) {
        price.hours.push_back(make_hour(2020, 1, 1, static_cast<unsigned>(i)));
        fleet.hours.push_back(price.hours.back());
    }
    price.price = {20.0, -1.0, 50.0};
    fleet.generation = {500.0, 500.0, 0.0};
    fleet.capacity = {2000.0, 2000.0, 2000.0};

    const ReferenceProfile ref = build_reference_profile(fleet, price);
    CHECK(ref.capacity_factor[0] == 0.25);
    CHECK(ref.capacity_factor[1] == 0.0);
    CHECK(ref.capacity_factor[2] == 0.0);

    FleetSeries zero_cap = fleet;
    zero_cap.capacity[2] = 0.0;
    CHECK_THROWS_AS(build_reference_profile(zero_cap, price), DataError);

    FleetSeries shifted = fleet;
    shifted.hours[0] += kSecondsPerHour * 100;
    CHECK_THROWS_AS(build_reference_profile(shifted, price), DataError);
}

namespace {

// n_hours consecutive hours of each calendar year in [y0, y1]
void fill_years(std::vector<HourStamp>& hours, int y0, int y1, int n_hours) {
    for (int y = y0; y <= y1; ++y) {
        const HourStamp start = make_hour(y, 1, 1, 0);
        for (int h = 0; h < n_hours; ++h) {
            hours.push_back(start + static_cast<HourStamp>(h) * kSecondsPerHour);
        }
    }
}

PriceSeries const_price(const std::vector<HourStamp>& hours, double v) {
    return {hours, std::vector<double>(hours.size(), v)};
}

FleetSeries const_fleet(const std::vector<HourStamp>& hours) {
    return {hours, std::vector<double>(hours.size(), 250.0),
            std::vector<double>(hours.size(), 1000.0)};
}

ParkSeries const_park(const std::vector<HourStamp>& hours, const std::string& id = "p1") {
    ParkSeries p;
    p.park_id = id;
    p.installed_capacity_mw = 10.0;
    p.commissioning_year = 2010;
    p.hours = hours;
    p.potential_generation.assign(hours.size(), 2.0);
    return p;
}

}  // namespace

TEST_CASE("align intersects coverage windows") {
    std::vector<HourStamp> price_hours, park_hours;
    fill_years(price_hours, 2014, 2023, 10);
    fill_years(park_hours, 2015, 2023, 10);
    const MarketDataset ds = align_dataset(const_price(price_hours, 40.0),
                                           const_fleet(price_hours),
                                           {const_park(park_hours)}, 10);
    REQUIRE(ds.years.size() == 9);
    CHECK(ds.years.front().year == 2015);
    CHECK(ds.years.back().year == 2023);
}

TEST_CASE("align drops years below the validity threshold") {
    // 2020 has 8000 common hours with one missing: 7999 < 8000
    std::vector<HourStamp> full_hours;
    fill_years(full_hours, 2020, 2021, 8000);
    std::vector<HourStamp> gapped = full_hours;
    gapped.erase(gapped.begin() + 100);
    const MarketDataset ds = align_dataset(const_price(full_hours, 40.0),
                                           const_fleet(full_hours), {const_park(gapped)}, 8000);
    REQUIRE(ds.years.size() == 1);
    CHECK(ds.years[0].year == 2021);
    CHECK(ds.years[0].hour_count() == 8000);
}

TEST_CASE("a file with an hour gap loads; alignment screens the gapped year") {
    const auto p = write_temp("price_gap.csv",
                              "timestamp,price_eur_mwh\n"
                              "2020-01-01T00:00Z,10\n"
                              "2020-01-01T02:00Z,20\n");  // 01:00 missing
    const PriceSeries s = load_price_series(p);
    CHECK(s.size() == 2);

    std::vector<HourStamp> hours;
    fill_years(hours, 2020, 2020, 8760);
    std::vector<HourStamp> gapped = hours;
    gapped.erase(gapped.begin() + 4000);  // 8759 hours in an 8784-hour leap year
    CHECK_THROWS_AS(align_dataset(const_price(gapped, 40.0), const_fleet(gapped),
                                  {const_park(gapped)}, 8760),
                    DataError);
    // a softer screen keeps it
    const MarketDataset ds = align_dataset(const_price(gapped, 40.0), const_fleet(gapped),
                                           {const_park(gapped)}, 8000);
    CHECK(ds.years.size() == 1);
}

TEST_CASE("full-coverage alignment is a no-op and idempotent") {
    std::vector<HourStamp> hours;
    fill_years(hours, 2019, 2021, 20);
    const MarketDataset ds = align_dataset(const_price(hours, 30.0), const_fleet(hours),
                                           {const_park(hours)}, 20);
    CHECK(ds.hour_count() == hours.size());
    const MarketDataset again = align_dataset(ds);
    CHECK(again.price.hours == ds.price.hours);
    CHECK(again.years.size() == ds.years.size());
}

TEST_CASE("align error paths") {
    std::vector<HourStamp> a, b;
    fill_years(a, 2019, 2019, 10);
    fill_years(b, 2021, 2021, 10);
    CHECK_THROWS_AS(align_dataset(const_price(a, 1.0), const_fleet(a), {const_park(b)}, 1),
                    DataError);
    CHECK_THROWS_AS(align_dataset(const_price(a, 1.0), const_fleet(a), {}, 1), DataError);
    CHECK_THROWS_AS(align_dataset(const_price(a, 1.0), const_fleet(a), {const_park(a)}, 11),
                    DataError);
}

TEST_CASE("every retained year satisfies the hour floor") {
    const MarketDataset ds = synthesize_market(testutil::small_config(2, 3), 5);
    for (const auto& ys : ds.years) {
        CHECK(ys.hour_count() >= ds.min_valid_hours);
        for (std::size_t i = ys.begin; i < ys.end; ++i) {
            CHECK(ds.year_index[i] == ys.year);
        }
    }
}

TEST_CASE("csv export round-trips bit-exactly") {
    const MarketDataset ds = synthesize_market(testutil::small_config(1, 1), 9);
    const auto price_path = write_temp("roundtrip_price.csv", price_series_csv(ds.price));
    const PriceSeries reloaded = load_price_series(price_path);
    CHECK(reloaded.hours == ds.price.hours);
    CHECK(reloaded.price == ds.price.price);

    const auto fleet_path = write_temp("roundtrip_fleet.csv", fleet_series_csv(ds.fleet));
    const FleetSeries fleet2 = load_fleet_series(fleet_path);
    CHECK(fleet2.generation == ds.fleet.generation);

    const auto park_path = write_temp("roundtrip_park.csv", park_series_csv(ds.parks[0]));
    const ParkSeries park2 = load_park_series(
        park_path, {ds.parks[0].park_id, ds.parks[0].installed_capacity_mw, 2014});
    CHECK(park2.potential_generation == ds.parks[0].potential_generation);
}

TEST_CASE("timestamp parsing accepts UTC forms only") {
    CHECK(parse_iso_hour("2020-06-01T12:00Z") == parse_iso_hour("2020-06-01T12:00:00Z"));
    CHECK(parse_iso_hour("2020-06-01T12:00+00:00") == parse_iso_hour("2020-06-01T12:00Z"));
    CHECK_THROWS_AS(parse_iso_hour("2020-06-01T12:30Z"), DataError);
    CHECK_THROWS_AS(parse_iso_hour("2020-06-01T12:00+02:00"), DataError);
    CHECK_THROWS_AS(parse_iso_hour("garbage"), DataError);
    CHECK(format_iso_hour(parse_iso_hour("2020-06-01T12:00Z")) == "2020-06-01T12:00:00Z");
}
