#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "evodyn/intervals.hpp"

using namespace evodyn;

TEST_CASE("gamma algebra", "[intervals]") {
    // n=1024, sigma = log2(n)/n^2: the sigma*n^2/log n branch equals 1.
    CHECK(gamma_value(1024, 10.0 / 1048576.0) == Catch::Approx(1.0));
    // sigma >= 1/log2(n): the n/log n cap is active.
    CHECK(gamma_value(1024, 0.1) == Catch::Approx(102.4));
    CHECK(gamma_value(1024, 0.5) == Catch::Approx(102.4));
}

TEST_CASE("interval bounds for gamma = 1", "[intervals]") {
    const int n = 1024;
    const double sigma = 10.0 / 1048576.0;
    const IntervalDecomposition d = decompose(n, sigma);
    CHECK(d.gamma == Catch::Approx(1.0));
    CHECK(d.G == Catch::Approx(10.0));

    // F2=[1014,1024], A1=[1004,1014), A2=[994,1004), L2=[0,40], B1=(40,50],
    // B2=(50,60].
    CHECK(d.classify(1024).second == SecondLevel::Forbidden2);
    CHECK(d.classify(1014).second == SecondLevel::Forbidden2);
    CHECK(d.classify(1013).second == SecondLevel::Adjacent1);
    CHECK(d.classify(1004).second == SecondLevel::Adjacent1);
    CHECK(d.classify(1003).second == SecondLevel::Adjacent2);
    CHECK(d.classify(994).second == SecondLevel::Adjacent2);
    CHECK(d.classify(993).second == SecondLevel::None);
    CHECK(d.classify(40).second == SecondLevel::LongJump2);
    CHECK(d.classify(0).second == SecondLevel::LongJump2);
    CHECK(d.classify(41).second == SecondLevel::Remote1);
    CHECK(d.classify(50).second == SecondLevel::Remote1);
    CHECK(d.classify(51).second == SecondLevel::Remote2);
    CHECK(d.classify(60).second == SecondLevel::Remote2);
    CHECK(d.classify(61).second == SecondLevel::None);
}

TEST_CASE("first level partitions [0, n] exactly once", "[intervals][property]") {
    const int n = 1024;
    const IntervalDecomposition d = decompose(n, 0.0005);
    const double l = std::log2(double(n));
    const double f1_lo = n - double(n) / (l * l * l);
    const double l1_hi = double(n) / (l * l);
    int in_f1 = 0, in_l1 = 0, in_o1 = 0;
    for (int N = 0; N <= n; ++N) {
        // Independent membership predicates straight from the interval
        // definitions.
        const bool f1 = double(N) >= f1_lo;
        const bool l1 = double(N) <= l1_hi;
        const bool o1 = !f1 && !l1;
        REQUIRE((int(f1) + int(l1) + int(o1)) == 1);
        const auto [fl, sl] = d.classify(N);
        REQUIRE(fl == (f1 ? FirstLevel::Forbidden1 : l1 ? FirstLevel::LongJump1 : FirstLevel::Open1));
        in_f1 += int(fl == FirstLevel::Forbidden1);
        in_l1 += int(fl == FirstLevel::LongJump1);
        in_o1 += int(fl == FirstLevel::Open1);
    }
    CHECK(in_f1 + in_l1 + in_o1 == n + 1);
    CHECK(in_f1 > 0);
    CHECK(in_l1 > 0);
    CHECK(in_o1 > 0);
}

TEST_CASE("second level labels are mutually exclusive", "[intervals][property]") {
    const int n = 1024;
    const IntervalDecomposition d = decompose(n, 0.0002);
    for (int N = 0; N <= n; ++N) {
        const double G = d.G;
        const bool f2 = double(N) >= n - G;
        const bool a1 = double(N) >= n - 2 * G && double(N) < n - G;
        const bool a2 = double(N) >= n - 3 * G && double(N) < n - 2 * G;
        const bool l2 = double(N) <= 4 * G;
        const bool b1 = double(N) > 4 * G && double(N) <= 5 * G;
        const bool b2 = double(N) > 5 * G && double(N) <= 6 * G;
        const int memberships = int(f2) + int(a1) + int(a2) + int(l2) + int(b1) + int(b2);
        REQUIRE(memberships <= 1);
        const auto [fl, sl] = d.classify(N);
        if (memberships == 0) REQUIRE(sl == SecondLevel::None);
        if (f2) REQUIRE(sl == SecondLevel::Forbidden2);
        if (a1) REQUIRE(sl == SecondLevel::Adjacent1);
        if (a2) REQUIRE(sl == SecondLevel::Adjacent2);
        if (l2) REQUIRE(sl == SecondLevel::LongJump2);
        if (b1) REQUIRE(sl == SecondLevel::Remote1);
        if (b2) REQUIRE(sl == SecondLevel::Remote2);
    }
}

TEST_CASE("degenerate decompositions are rejected by name", "[intervals]") {
    // n=128 with sigma = 49/16384 has 9G > n.
    try {
        decompose(128, 49.0 / 16384.0);
        FAIL("expected degeneracy rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("n - 3G > 6G") != std::string::npos);
    }
    CHECK_THROWS_AS(decompose(1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(decompose(1024, 0.7), std::invalid_argument);

    const IntervalDecomposition ok = decompose(256, 64.0 / 65536.0);
    CHECK(ok.gamma == Catch::Approx(8.0));
    CHECK(ok.G == Catch::Approx(std::pow(8.0, 4.0 / 7.0) * 8.0));
    CHECK_THROWS_AS(ok.classify(-1), std::invalid_argument);
    CHECK_THROWS_AS(ok.classify(257), std::invalid_argument);
}
