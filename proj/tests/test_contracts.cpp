#include <doctest.h>

#include <random>

#include "cfdsim/contracts.hpp"
#include "helpers.hpp"

using namespace cfdsim;

TEST_CASE("contracted capacity is the factor times installed capacity") {
    CHECK(contracted_capacity(1.0, 10.0).k_mw == 10.0);
    CHECK(contracted_capacity(0.55, 10.0).k_mw == 5.5);
    CHECK(contracted_capacity(0.0, 10.0).k_mw == 0.0);
    CHECK_THROWS_AS(contracted_capacity(-0.1, 10.0), ConfigError);
    CHECK_THROWS_AS(contracted_capacity(1.0, 0.0), DataError);
}

TEST_CASE("exactly the ten specifications plus merchant are expressible") {
    CHECK(canonical_contracts().size() == 11);
    CHECK_THROWS_AS(ContractSpec::two_sided(ReferenceMode::HourlySpot, true), ConfigError);
    CHECK_THROWS_AS(ContractSpec::one_sided(ReferenceMode::HourlySpot, true), ConfigError);
    CHECK_THROWS_AS(ContractSpec::financial(AlphaMode::Fixed, -0.5), ConfigError);
    CHECK_THROWS_AS(parse_contract_id("fit"), ConfigError);
    CHECK(parse_contract_id("cfd2_annual_suspend").suspend_negative);
}

TEST_CASE("dispatch follows the per-spec unit revenue") {
    const SupportLevel s70{70.0};
    const auto cfd2_annual = ContractSpec::two_sided(ReferenceMode::AnnualCapture);
    HourState h;
    h.potential_mwh = 5.0;
    h.annual_capture = 60.0;

    h.price = -9.0;  // unit revenue -9 + 70 - 60 = +1
    CHECK(dispatch_quantity(cfd2_annual, s70, h) == 5.0);
    h.price = -11.0;  // unit revenue -1
    CHECK(dispatch_quantity(cfd2_annual, s70, h) == 0.0);

    const auto fin = ContractSpec::financial(AlphaMode::Fixed, 1.0);
    h.price = -0.01;
    h.reference_cf = 0.2;
    CHECK(dispatch_quantity(fin, SupportLevel{20.0}, h) == 0.0);
    h.price = 0.0;
    CHECK(dispatch_quantity(fin, SupportLevel{20.0}, h) == 0.0);

    const auto cfd1_hourly = ContractSpec::one_sided(ReferenceMode::HourlySpot);
    HourState g;
    g.potential_mwh = 5.0;
    g.price = -20.0;  // unit revenue max(50, -20) = 50
    CHECK(dispatch_quantity(cfd1_hourly, SupportLevel{50.0}, g) == 5.0);
    g.price = -20.0;
    CHECK(dispatch_quantity(cfd1_hourly, SupportLevel{-30.0}, g) == 0.0);

    // suspension variants curtail outright at p <= 0
    const auto cfd2_susp = ContractSpec::two_sided(ReferenceMode::AnnualCapture, true);
    HourState z;
    z.potential_mwh = 3.0;
    z.annual_capture = 10.0;
    z.price = 0.0;  // would have unit revenue 0 + 70 - 10 > 0, but p <= 0
    CHECK(dispatch_quantity(cfd2_susp, s70, z) == 0.0);
    z.price = 0.5;
    CHECK(dispatch_quantity(cfd2_susp, s70, z) == 3.0);

    // merchant needs strictly positive prices
    HourState m;
    m.potential_mwh = 2.0;
    m.price = 0.0;
    CHECK(dispatch_quantity(ContractSpec::merchant(), SupportLevel{0.0}, m) == 0.0);
    m.price = 0.01;
    CHECK(dispatch_quantity(ContractSpec::merchant(), SupportLevel{0.0}, m) == 2.0);
}

TEST_CASE("hourly cash flow decomposition") {
    SUBCASE("financial: market + fixed leg - floating leg") {
        HourState h;
        h.price = 50.0;
        h.potential_mwh = 0.4;
        h.reference_cf = 0.3;
        const auto cf = hourly_cashflow(ContractSpec::financial(AlphaMode::Fixed, 1.0),
                                        SupportLevel{20.0}, h, /*contracted_mw=*/0.5);
        CHECK(cf.market_income == doctest::Approx(20.0));
        CHECK(cf.support_payment == doctest::Approx(10.0 - 7.5));
        CHECK(cf.total == doctest::Approx(22.5));
        CHECK(cf.total == cf.market_income + cf.support_payment);
    }
    SUBCASE("two-sided hourly reference collapses to the strike") {
        HourState h;
        h.price = 10.0;
        h.potential_mwh = 2.0;
        const auto cf = hourly_cashflow(ContractSpec::two_sided(ReferenceMode::HourlySpot),
                                        SupportLevel{70.0}, h);
        CHECK(cf.market_income == 20.0);
        CHECK(cf.support_payment == 120.0);
        CHECK(cf.total == 140.0);
    }
    SUBCASE("one-sided premium floors at zero") {
        HourState h;
        h.price = 100.0;
        h.potential_mwh = 1.0;
        const auto cf = hourly_cashflow(ContractSpec::one_sided(ReferenceMode::HourlySpot),
                                        SupportLevel{70.0}, h);
        CHECK(cf.support_payment == 0.0);
        CHECK(cf.total == 100.0);
    }
    SUBCASE("floating leg settles even when the park is curtailed") {
        HourState h;
        h.price = 80.0;
        h.potential_mwh = 0.0;
        h.reference_cf = 0.5;
        const auto cf = hourly_cashflow(ContractSpec::financial(AlphaMode::Fixed, 1.0),
                                        SupportLevel{20.0}, h, 2.0);
        CHECK(cf.dispatched_mwh == 0.0);
        CHECK(cf.support_payment == doctest::Approx(2.0 * 20.0 - 2.0 * 0.5 * 80.0));
    }
    SUBCASE("missing per-hour context is an error") {
        HourState h;
        h.price = 10.0;
        h.potential_mwh = 1.0;
        CHECK_THROWS_AS(hourly_cashflow(ContractSpec::two_sided(ReferenceMode::AnnualCapture),
                                        SupportLevel{50.0}, h),
                        DataError);
        CHECK_THROWS_AS(hourly_cashflow(ContractSpec::financial(AlphaMode::Fixed, 1.0),
                                        SupportLevel{50.0}, h, 1.0),
                        DataError);
    }
}

TEST_CASE("annual revenue aggregation on a hand-checked dataset") {
    // two hours: q = (1, 2) MWh on a 1 MW park, p = (10, 30)
    const MarketDataset ds = testutil::tiny_dataset({10.0, 30.0}, {1.0, 2.0}, 1.0);

    const auto merchant =
        simulate_annual_revenues(ContractSpec::merchant(), SupportLevel{0.0}, ds, ds.parks[0]);
    REQUIRE(merchant.size() == 1);
    CHECK(merchant.revenue_per_mw[0] == 70.0);
    CHECK(merchant.generation_per_mw[0] == 3.0);

    const auto cfd2 = simulate_annual_revenues(ContractSpec::two_sided(ReferenceMode::HourlySpot),
                                               SupportLevel{50.0}, ds, ds.parks[0]);
    CHECK(cfd2.revenue_per_mw[0] == 150.0);

    const auto fin0 = simulate_annual_revenues(ContractSpec::financial(AlphaMode::Fixed, 0.0),
                                               SupportLevel{500.0}, ds, ds.parks[0]);
    CHECK(fin0.revenue_per_mw[0] == merchant.revenue_per_mw[0]);
    CHECK(fin0.generation_per_mw[0] == merchant.generation_per_mw[0]);
}

TEST_CASE("merchant equivalence: financial with zero contract factor, exactly") {
    for (std::uint64_t seed : {2ull, 3ull}) {
        const MarketDataset ds = synthesize_market(testutil::small_config(2, 3), seed);
        for (const auto& park : ds.parks) {
            const auto m = simulate_annual_revenues(ContractSpec::merchant(), SupportLevel{0.0},
                                                    ds, park);
            const auto f = simulate_annual_revenues(ContractSpec::financial(AlphaMode::Fixed, 0.0),
                                                    SupportLevel{123.0}, ds, park);
            CHECK(m.revenue_per_mw == f.revenue_per_mw);
            CHECK(m.generation_per_mw == f.generation_per_mw);
        }
    }
}

TEST_CASE("strike collapse: two-sided hourly revenue is S x dispatched MWh, exactly") {
    const MarketDataset ds = synthesize_market(testutil::small_config(2, 3), 17);
    const double strike = 62.5;
    for (const auto& park : ds.parks) {
        const auto t = simulate_annual_revenues(ContractSpec::two_sided(ReferenceMode::HourlySpot),
                                                SupportLevel{strike}, ds, park);
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(t.revenue_per_mw[i] == strike * t.generation_per_mw[i]);
        }
    }
}

TEST_CASE("perfect-tracking hedge: hourly total equals the fixed payment") {
    const MarketDataset base = synthesize_market(testutil::small_config(1, 2), 21);
    const double alpha = 0.8;
    const double k = contracted_capacity(alpha, base.parks[0].installed_capacity_mw).k_mw;
    const auto spec = ContractSpec::financial(AlphaMode::Fixed, alpha);
    const SupportLevel rate{25.0};
    const double fixed_payment = k * rate.value;
    for (std::size_t i = 0; i < base.hour_count(); ++i) {
        HourState h;
        h.price = base.price.price[i];
        h.reference_cf = base.reference.capacity_factor[i];
        h.potential_mwh = k * base.reference.capacity_factor[i];
        const auto cf = hourly_cashflow(spec, rate, h, k);
        CHECK(cf.total == doctest::Approx(fixed_payment).epsilon(1e-12));
    }
}

TEST_CASE("one-sided support is non-negative and dominates market income") {
    const MarketDataset ds = synthesize_market(testutil::small_config(1, 2), 33);
    for (const auto spec : {ContractSpec::one_sided(ReferenceMode::HourlySpot),
                            ContractSpec::one_sided(ReferenceMode::AnnualCapture),
                            ContractSpec::one_sided(ReferenceMode::AnnualCapture, true)}) {
        const auto capture = capture_prices(ds);
        for (const auto& ys : ds.years) {
            for (std::size_t i = ys.begin; i < ys.end; i += 37) {
                HourState h;
                h.price = ds.price.price[i];
                h.potential_mwh = ds.parks[0].potential_generation[i];
                h.annual_capture = capture.at(ys.year);
                const auto cf = hourly_cashflow(spec, SupportLevel{55.0}, h);
                CHECK(cf.support_payment >= 0.0);
                CHECK(cf.total >= cf.market_income);
            }
        }
    }
}

TEST_CASE("no specification produces at non-positive unit revenue") {
    std::mt19937_64 rng(99);
    auto u = [&](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    for (int trial = 0; trial < 2000; ++trial) {
        HourState h;
        h.price = u(-120.0, 180.0);
        h.potential_mwh = u(0.0, 8.0);
        h.annual_capture = u(-20.0, 90.0);
        h.reference_cf = u(0.0, 1.0);
        const SupportLevel level{u(-60.0, 160.0)};
        for (const auto& spec : canonical_contracts()) {
            if (spec.kind == ContractKind::Financial && spec.alpha_mode != AlphaMode::Fixed) {
                continue;
            }
            const double q = dispatch_quantity(spec, level, h);
            CHECK((q == 0.0 || q == h.potential_mwh));
            const auto cf = hourly_cashflow(spec, level, h, 1.0);
            if (spec.kind == ContractKind::TwoSided || spec.kind == ContractKind::OneSided) {
                CHECK(cf.total >= -1e-9);
            }
            CHECK(cf.total == doctest::Approx(cf.market_income + cf.support_payment));
        }
    }
}

TEST_CASE("representative park: annual reference settles at the strike") {
    // a park whose potential tracks the fleet profile exactly earns S per MWh
    // under the annual reference, provided nothing is curtailed
    SynthConfig cfg = testutil::small_config(1, 3);
    cfg.park_correlation = {1.0};
    cfg.negative_price_share = 0.0;  // keep dispatch identical across hours
    const MarketDataset ds = synthesize_market(cfg, 44);
    const double strike = 500.0;  // high enough that no hour is curtailed
    const auto t = simulate_annual_revenues(ContractSpec::two_sided(ReferenceMode::AnnualCapture),
                                            SupportLevel{strike}, ds, ds.parks[0]);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t.revenue_per_mw[i] ==
              doctest::Approx(strike * t.generation_per_mw[i]).epsilon(1e-9));
    }
}

TEST_CASE("revenue model matches the hourly simulation across specs and levels") {
    const MarketDataset ds = synthesize_market(testutil::small_config(2, 3), 3);
    for (const auto& spec : canonical_contracts()) {
        if (spec.kind == ContractKind::Financial && spec.alpha_mode != AlphaMode::Fixed) continue;
        for (const auto& park : ds.parks) {
            const RevenueModel model(ds, park, spec);
            for (double x : {-30.0, -1.0, 0.0, 5.0, 42.0, 77.0, 250.0}) {
                if (spec.kind == ContractKind::Financial && x < 0.0) continue;
                const auto t = simulate_annual_revenues(spec, SupportLevel{x}, ds, park);
                for (std::size_t yi = 0; yi < t.size(); ++yi) {
                    CHECK(model.revenue(yi, x, spec.alpha) ==
                          doctest::Approx(t.revenue_per_mw[yi]).epsilon(1e-9));
                    CHECK(model.generation(yi, x) ==
                          doctest::Approx(t.generation_per_mw[yi]).epsilon(1e-9));
                }
            }
        }
    }
}

TEST_CASE("annual revenue csv serialization") {
    const MarketDataset ds = testutil::tiny_dataset({10.0, 30.0}, {1.0, 2.0}, 1.0);
    const auto t =
        simulate_annual_revenues(ContractSpec::merchant(), SupportLevel{0.0}, ds, ds.parks[0]);
    csv::Writer w(csv::split_fields(annual_revenue_csv_header()));
    append_annual_revenue_rows(w, t);
    CHECK(w.str() ==
          "park_id,contract_id,year,revenue_eur_per_mw,generation_mwh_per_mw\n"
          "t01,merchant,2020,70,3\n");
}
