#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include <qcl/config.hpp>
#include <qcl/io.hpp>

using namespace qcl;

namespace {

std::string error_code_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.code() + ": " + e.what();
    }
    return "ok";
}

}

TEST(Config, EmptyDocumentGivesDefaults)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.run.master_seed, 42u);
    EXPECT_EQ(c.ssb.realizations, 400u);
    EXPECT_EQ(c.bec.realizations, 500u);
    EXPECT_DOUBLE_EQ(c.ssb.lambda, 0.6);
    EXPECT_FALSE(c.realizations_override.has_value());
}

TEST(Config, MinimalSsbSectionIsPopulated)
{
    const auto c = parse_config(R"({"ssb": {"m2": -2.0}})");
    EXPECT_EQ(c.ssb.m2, -2.0);
    const auto j = to_json(c);
    EXPECT_EQ(j["ssb"]["lambda"].get<double>(), 0.6);
    EXPECT_EQ(j["ssb"]["noise"]["kernel"].get<std::string>(), "hadamard");
    EXPECT_EQ(j["ssb"]["grid"]["n_points"].get<std::size_t>(), 4001u);
    EXPECT_DOUBLE_EQ(j["ssb"]["gate_threshold"].get<double>(), 2.0 * 2.0 / 0.6);
}

TEST(Config, NegativeLambdaIsASchemaViolation)
{
    const auto msg = error_code_of(R"({"ssb": {"lambda": -1}})");
    EXPECT_EQ(msg.rfind("schema", 0), 0u) << msg;
    EXPECT_NE(msg.find("lambda must be positive"), std::string::npos) << msg;
}

TEST(Config, DuplicateKeyRejected)
{
    const auto msg = error_code_of(R"({"ssb": {"m2": -1, "m2": -2}})");
    EXPECT_EQ(msg.rfind("duplicate-key", 0), 0u) << msg;
    EXPECT_EQ(error_code_of(R"({"ssb": {}, "ssb": {}})").rfind("duplicate-key", 0), 0u);
    // the same key in sibling objects is fine
    EXPECT_EQ(error_code_of(R"({"ssb": {"m2": -1}, "bec": {"m2": -1}})"), "ok");
}

TEST(Config, UnknownKeysAreFatalAtEveryLevel)
{
    for (const char* doc : {R"({"sbb": {}})", R"({"ssb": {"lamda": 0.6}})", R"({"ssb": {"noise": {"amp": 1}}})",
                            R"({"ssb": {"grid": {"dt": 0.1}}})", R"({"langevin": {"potential": {"w": 1}}})"}) {
        const auto msg = error_code_of(doc);
        EXPECT_EQ(msg.rfind("unknown-key", 0), 0u) << doc << " -> " << msg;
    }
    EXPECT_NE(error_code_of(R"({"ssb": {"lamda": 0.6}})").find("ssb.lamda"), std::string::npos);
}

TEST(Config, ParseErrorsCarryPosition)
{
    const auto msg = error_code_of("{\n  \"ssb\": {\"m2\": -1,}\n}");
    EXPECT_EQ(msg.rfind("parse-error", 0), 0u) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(Config, TypeAndRangeChecks)
{
    EXPECT_EQ(error_code_of(R"({"ssb": {"m2": "x"}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"ssb": {"m2": 1}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"run": {"threads": 0}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"run": {"realizations": 0}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"run": {"master_seed": -3}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"noise": {"kind": "pink"}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"kernels": {"grid": {"t_start": 1, "t_end": 0}}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"oscillator": {"omega": 0}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"inflation": {"H": -1}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of(R"({"langevin": {"potential": {"kind": "double_well", "lambda": -1}}})").rfind("schema", 0), 0u);
    EXPECT_EQ(error_code_of("[1, 2]").rfind("schema", 0), 0u);
}

TEST(Config, RealizationOverride)
{
    const auto c = parse_config(R"({"run": {"realizations": 12}})");
    ASSERT_TRUE(c.realizations_override.has_value());
    EXPECT_EQ(*c.realizations_override, 12u);
}

TEST(Config, EchoRoundTrips)
{
    const auto c = parse_config(R"({
        "run": {"master_seed": 7, "threads": 2, "realizations": 5},
        "oscillator": {"omega": 1.25, "phi": 0.3},
        "langevin": {"integrator": "memory", "potential": {"kind": "double_well", "m2": -0.5, "lambda": 1.5},
                     "grid": {"t_start": 0, "t_end": 3, "n_points": 301}},
        "ssb": {"noise": {"kernel": "composed", "amplitude": 0.05}, "gate": false},
        "inflation": {"H": 2, "k_max": 100.0}
    })");
    const auto echo = to_json(c).dump();
    EXPECT_EQ(to_json(parse_config(echo)).dump(), echo);
    const auto d = to_json(parse_config("{}")).dump();
    EXPECT_EQ(to_json(parse_config(d)).dump(), d);
}

TEST(Config, LoadNamesMissingPath)
{
    try {
        load_config("/nonexistent/qcl.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.code(), "missing-config");
        EXPECT_NE(std::string(e.what()).find("/nonexistent/qcl.json"), std::string::npos);
    }
}

TEST(Config, LoadPrefixesErrorsWithPath)
{
    const auto path = std::filesystem::temp_directory_path() / "qcl_test_config_bad.json";
    io::write_atomic(path, R"({"ssb": {"lambda": -1}})");
    try {
        load_config(path);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST(Io, ShortestRoundTrip)
{
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 3.141592653589793, 0.0}) {
        EXPECT_EQ(io::parse_double(io::format_double(x)), x);
    }
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_THROW(io::parse_double("1.0x"), InvalidArgument);
}

TEST(Io, TableLayout)
{
    io::Table t({"t", "x"});
    t.row({0.0, 1.5});
    t.row({0.25, -2.0});
    EXPECT_EQ(t.str(), "t,x\n0,1.5\n0.25,-2\n");
    EXPECT_THROW(t.row({1.0}), InvalidArgument);
}

TEST(Io, MatrixTextRoundTrips)
{
    const TimeGrid g(0.0, 1.0, 4);
    Eigen::MatrixXd v(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) v(i, j) = 1.0 / (1.0 + i + j);
    const KernelMatrix k(g, v, KernelKind::symmetric);
    const auto m = io::parse_matrix(io::format_matrix(k));
    EXPECT_EQ(m.n, 4u);
    EXPECT_EQ(m.dt, g.dt());
    EXPECT_EQ(m.values, v);
    EXPECT_THROW(io::parse_matrix("2,0.5\n1,2\n"), InvalidArgument);
}

TEST(Io, AtomicWriteLeavesNoTemporary)
{
    const auto dir = std::filesystem::temp_directory_path() / "qcl_atomic_test";
    std::filesystem::create_directories(dir);
    io::write_atomic(dir / "a.txt", "first");
    io::write_atomic(dir / "a.txt", "second");
    std::ifstream f(dir / "a.txt");
    std::string s;
    std::getline(f, s);
    EXPECT_EQ(s, "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
    EXPECT_EQ(files, 1u);
    std::filesystem::remove_all(dir);
}

TEST(Config, ShippedConfigsLoad)
{
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(QCL_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(e.path())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 1u);
    const auto d = load_config(std::filesystem::path(QCL_CONFIG_DIR) / "defaults.json");
    EXPECT_EQ(to_json(d).dump(), to_json(parse_config("{}")).dump());
}
