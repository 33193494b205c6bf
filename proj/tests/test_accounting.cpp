#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "edgeface/accounting.hpp"
#include "edgeface/container.hpp"
#include "edgeface/runtime.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace edgeface;

TEST_CASE("head linear row carries the plain M*N MAC count") {
    const CostReport r = count_variant(variant_spec(Variant::XSmall), std::nullopt);
    bool found = false;
    for (const CostRow& row : r.rows)
        if (row.layer == "head.linear") {
            found = true;
            CHECK(row.macs == 98304);   // 192*512
            CHECK(row.params == 98816); // + bias
        }
    CHECK(found);
}

TEST_CASE("default variants reproduce the published cost totals") {
    struct Want {
        Variant v;
        double mparams, mflops;
    };
    const Want wants[] = {{Variant::Small, 5.44, 461.7},
                          {Variant::XSmall, 2.24, 196.9},
                          {Variant::XXSmall, 1.24, 94.7}};
    for (const Want& w : wants) {
        const CostReport r = count_variant(variant_spec(w.v), std::nullopt);
        CHECK(std::abs(r.mparams() - w.mparams) / w.mparams < 0.10);
        CHECK(std::abs(r.mflops() - w.mflops) / w.mflops < 0.15);
        CHECK(r.mmacs() == doctest::Approx(r.mflops() / 2.0));
    }
}

TEST_CASE("dense rows agree with the layer cost formulas") {
    EdgeFaceModel m = assemble(variant_spec(Variant::XSmall), 0.6);
    const CostReport r = count(m);
    std::map<std::string, CostRow> by_name;
    for (const CostRow& row : r.rows) by_name[row.layer] = row;

    int checked = 0;
    for_each_dense(m, [&](DenseLayer& d) {
        REQUIRE(by_name.count(d.name) == 1);
        const LayerCost want = loralin_cost(d.in_features, d.out_features, 0.6, d.has_bias);
        CHECK(by_name[d.name].params == want.params);
        ++checked;
    });
    // pw pairs in all 18 blocks, qkv+proj in the 3 attention blocks, the head
    CHECK(checked == 18 * 2 + 3 * 2 + 1);
}

TEST_CASE("census completeness against the serialized container") {
    const EdgeFaceModel m = build(variant_spec(Variant::XXSmall), std::nullopt, 1);
    const CostReport r = count(m);
    CHECK(r.total_params == parameter_count(m));

    const std::vector<uint8_t> bytes = save_container(m);
    const uint64_t header_len = [&] {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[8 + static_cast<size_t>(i)]) << (8 * i);
        return v;
    }();
    const auto manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
    int64_t payload_floats = 0;
    for (const auto& t : manifest.at("tensors")) payload_floats += t.at("byte_len").get<int64_t>() / 4;
    CHECK(payload_floats == r.total_params);
}

TEST_CASE("every parameter tensor appears in exactly one cost row") {
    const EdgeFaceModel m = assemble(testutil::mini_spec(), 0.5);
    const CostReport r = count(m);
    // group parameters by the row prefix they should land in
    std::map<std::string, int64_t> by_row;
    for (const CostRow& row : r.rows) by_row[row.layer] += 0;  // seed keys
    int64_t matched = 0;
    for_each_parameter(m, [&](const std::string& name, const Tensor& t) {
        const std::string owner = name.substr(0, name.rfind('.'));
        if (by_row.count(owner)) {
            by_row[owner] += t.numel();
            matched += t.numel();
        } else if (name.ends_with(".temperature")) {
            by_row[owner + ".attn_map"] += t.numel();
            matched += t.numel();
        }
    });
    CHECK(matched == r.total_params);
    for (const CostRow& row : r.rows) CHECK(by_row[row.layer] == row.params);
}

TEST_CASE("gamma sweep reproduces the published ablation rows") {
    const std::vector<double> gammas{0.2, 0.4, 0.6, 0.8, 1.0};
    const auto rows = gamma_sweep(variant_spec(Variant::XSmall), gammas);
    REQUIRE(rows.size() == 6);
    REQUIRE(rows[0].is_reference);

    const double want_params[] = {0.73, 1.24, 1.77, 2.29, 2.81};
    const double want_flops[] = {63.6, 107.9, 153.9, 198.4, 244.4};
    for (int i = 0; i < 5; ++i) {
        CHECK(std::abs(rows[static_cast<size_t>(i) + 1].mparams - want_params[i]) / want_params[i] < 0.10);
        CHECK(std::abs(rows[static_cast<size_t>(i) + 1].mflops - want_flops[i]) / want_flops[i] < 0.10);
    }
    for (int i = 2; i < 6; ++i) {
        CHECK(rows[static_cast<size_t>(i)].mparams > rows[static_cast<size_t>(i) - 1].mparams);
        CHECK(rows[static_cast<size_t>(i)].mflops > rows[static_cast<size_t>(i) - 1].mflops);
    }
}

TEST_CASE("gamma=0.6 saves about a fifth of parameters and flops") {
    const auto rows = gamma_sweep(variant_spec(Variant::XSmall), {0.6});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].delta_params_pct == doctest::Approx(-21.0).epsilon(0.15));
    CHECK(rows[1].delta_flops_pct == doctest::Approx(-22.0).epsilon(0.15));
}

TEST_CASE("crossover sits between gamma=0.8 and gamma=1.0") {
    const auto rows = gamma_sweep(variant_spec(Variant::XSmall), {0.8, 1.0});
    const double ref_p = rows[0].mparams, ref_f = rows[0].mflops;
    CHECK(std::abs(rows[1].mparams - ref_p) / ref_p < 0.05);
    CHECK(std::abs(rows[1].mflops - ref_f) / ref_f < 0.05);
    CHECK(rows[2].mparams > ref_p);
    CHECK(rows[2].mflops > ref_f);
}

TEST_CASE("sweep costs are monotone over a fine gamma grid") {
    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(std::min(1.0, 0.05 * i));
    const auto rows = gamma_sweep(variant_spec(Variant::XXSmall), grid);
    for (size_t i = 2; i < rows.size(); ++i) {
        CHECK(rows[i].mparams >= rows[i - 1].mparams);
        CHECK(rows[i].mflops >= rows[i - 1].mflops);
    }
    CHECK_THROWS_AS(gamma_sweep(variant_spec(Variant::XXSmall), {0.5, 1.2}), std::invalid_argument);
}

TEST_CASE("attention cost is linear in token count") {
    const EdgeFaceModel m = assemble(variant_spec(Variant::XSmall), std::nullopt);
    const STDABlock& block = m.stages[3].blocks.back().stda;
    const int64_t m9 = xca_macs(block, 9);
    const int64_t m49 = xca_macs(block, 49);
    const int64_t m196 = xca_macs(block, 196);
    CHECK(m9 * 49 == m49 * 9);
    CHECK(m9 * 196 == m196 * 9);

    // the instrumented kernel agrees at every sampled token count
    const EdgeFaceModel mm = build(variant_spec(Variant::XSmall), std::nullopt, 0);
    const STDABlock& bb = mm.stages[3].blocks.back().stda;
    testutil::Rng rng(77);
    for (int tokens : {9, 49, 196}) {
        Tensor x = testutil::random_tensor({tokens, bb.channels}, rng, 0.2f);
        mac_tally::reset();
        mac_tally::enable();
        xca_attention(x, bb);
        mac_tally::disable();
        CHECK(static_cast<int64_t>(mac_tally::total()) == xca_macs(bb, tokens));
    }
}

TEST_CASE("instrumented forward pass matches the analytic MAC count exactly") {
    const VariantSpec spec = testutil::mini_spec();
    const EdgeFaceModel m = build(spec, std::nullopt, 2);
    const CostReport analytic = count(m);

    Tensor img({1, 3, 112, 112});
    testutil::Rng rng(3);
    for (float& v : img.data) v = rng.normal_f() * 0.3f;

    mac_tally::reset();
    mac_tally::enable();
    embed(m, img);
    mac_tally::disable();
    CHECK(static_cast<int64_t>(mac_tally::total()) == analytic.total_macs);

    // low-rank model too
    const EdgeFaceModel lr = build(spec, 0.5, 2);
    const CostReport analytic_lr = count(lr);
    mac_tally::reset();
    mac_tally::enable();
    embed(lr, img);
    mac_tally::disable();
    CHECK(static_cast<int64_t>(mac_tally::total()) == analytic_lr.total_macs);
}

TEST_CASE("csv emitters are stable and well-formed") {
    const CostReport r = count_variant(variant_spec(Variant::XXSmall), std::nullopt);
    const std::string csv = cost_report_csv(r);
    CHECK(csv.rfind("layer,params,macs\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.rows.size()) + 1);

    const auto rows = gamma_sweep(variant_spec(Variant::XXSmall), {0.5});
    const std::string s = sweep_csv(rows);
    CHECK(s.find("default,") != std::string::npos);
    CHECK(s.rfind("gamma,mparams,mflops,delta_params_pct,delta_flops_pct\n", 0) == 0);
}
