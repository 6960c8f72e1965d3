#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "idop/ingest.hpp"
#include "oracles.hpp"

using namespace idop;

namespace {

std::filesystem::path temp_csv(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load computes the index as column sums") {
    auto path = temp_csv("ingest_basic.csv", "id,s1,s2\ng1,1,2\ng2,3,4\n");
    ExpressionMatrix m = load_expression_matrix(path.string());
    CHECK(m.variables() == 2);
    CHECK(m.samples() == 2);
    CHECK(m.index[0] == doctest::Approx(4.0));
    CHECK(m.index[1] == doctest::Approx(6.0));
    CHECK(m.variable_ids == std::vector<std::string>{"g1", "g2"});
    std::filesystem::remove(path);
}

TEST_CASE("malformed cell reports its body row and column") {
    auto path = temp_csv("ingest_bad.csv", "id,s1,s2,s3\ng1,1,2,3\ng2,4,5,abc\n");
    try {
        load_expression_matrix(path.string());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.col() == 3);
        CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("duplicate identifiers and empty bodies are rejected") {
    auto dup = temp_csv("ingest_dup.csv", "id,s1,s2\ng1,1,2\ng1,3,4\n");
    CHECK_THROWS_AS(load_expression_matrix(dup.string()), ValidationError);
    std::filesystem::remove(dup);

    auto empty = temp_csv("ingest_empty.csv", "id,s1,s2\n");
    CHECK_THROWS_AS(load_expression_matrix(empty.string()), ValidationError);
    std::filesystem::remove(empty);

    auto neg = temp_csv("ingest_neg.csv", "id,s1,s2\ng1,1,-2\ng2,3,4\n");
    CHECK_THROWS_AS(load_expression_matrix(neg.string()), ValidationError);
    CHECK_NOTHROW(load_expression_matrix(neg.string(), /*allow_negative=*/true));
    std::filesystem::remove(neg);
}

TEST_CASE("index matches an independent summation oracle") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd values(3, 5);
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 5; ++c) values(r, c) = unif(rng);
    ExpressionMatrix m = make_expression_matrix({"a", "b", "c"}, {"s1", "s2", "s3", "s4", "s5"},
                                                values);
    auto sums = oracle::column_sums(values);
    for (Eigen::Index c = 0; c < 5; ++c)
        CHECK(m.index[c] == doctest::Approx(sums[static_cast<size_t>(c)]).epsilon(1e-12));
}

TEST_CASE("expression_index trivial cases") {
    CHECK(expression_index(Eigen::MatrixXd::Zero(3, 4)).isZero());
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd idx = expression_index(eye);
    CHECK(idx[0] == 1.0);
    CHECK(idx[1] == 1.0);
}

TEST_CASE("expression_index is permutation-equivariant over samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    Eigen::MatrixXd values(4, 6);
    for (Eigen::Index r = 0; r < 4; ++r)
        for (Eigen::Index c = 0; c < 6; ++c) values(r, c) = unif(rng);
    Eigen::VectorXd base = expression_index(values);

    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    Eigen::MatrixXd shuffled(4, 6);
    for (int c = 0; c < 6; ++c) shuffled.col(c) = values.col(perm[static_cast<size_t>(c)]);
    Eigen::VectorXd permuted = expression_index(shuffled);
    for (int c = 0; c < 6; ++c)
        CHECK(permuted[c] == base[perm[static_cast<size_t>(c)]]);
}

TEST_CASE("scale_index endpoints, midpoint, errors") {
    Eigen::VectorXd two(2);
    two << 0.0, 10.0;
    ScaledIndex s2 = scale_index(two);
    CHECK(s2.scaled[0] == -1.0);
    CHECK(s2.scaled[1] == 1.0);

    Eigen::VectorXd three(3);
    three << 0.0, 5.0, 10.0;
    ScaledIndex s3 = scale_index(three);
    CHECK(s3.scaled[1] == doctest::Approx(0.0));
    CHECK(s3.order == std::vector<Eigen::Index>{0, 1, 2});

    Eigen::VectorXd flat = Eigen::VectorXd::Constant(3, 3.0);
    CHECK_THROWS_AS(scale_index(flat), ValidationError);
}

TEST_CASE("scale_index is invariant under affine transforms of E") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(1.0, 9.0);
    Eigen::VectorXd e(8);
    for (Eigen::Index i = 0; i < 8; ++i) e[i] = unif(rng);
    ScaledIndex a = scale_index(e);
    ScaledIndex b = scale_index((2.5 * e.array() + 7.0).matrix());
    for (Eigen::Index i = 0; i < 8; ++i)
        CHECK(a.scaled[i] == doctest::Approx(b.scaled[i]).epsilon(1e-12));
    CHECK(a.order == b.order);
}

TEST_CASE("scale_index keeps ties in original column order") {
    Eigen::VectorXd e(4);
    e << 5.0, 1.0, 5.0, 0.0;
    ScaledIndex s = scale_index(e);
    CHECK(s.order == std::vector<Eigen::Index>{3, 1, 0, 2});
}

TEST_CASE("save/load round trip is bit identical") {
    Eigen::MatrixXd values(2, 3);
    values << 1.25, 0.333333333333, 7.5e-3,
              123456789012.0, 2.0, 0.1;
    ExpressionMatrix m = make_expression_matrix({"g1", "g2"}, {"a", "b", "c"}, values);
    auto path = std::filesystem::temp_directory_path() / "ingest_roundtrip.csv";
    save_expression_matrix(m, path.string());
    ExpressionMatrix back = load_expression_matrix(path.string());
    REQUIRE(back.values.rows() == m.values.rows());
    REQUIRE(back.values.cols() == m.values.cols());
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < 3; ++c)
            CHECK(back.values(r, c) == m.values(r, c));
    CHECK(back.sample_ids == m.sample_ids);
    std::filesystem::remove(path);
}
