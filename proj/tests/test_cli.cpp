#include "support.hpp"

#include "relunet/cli.hpp"
#include "relunet/io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace relunet;
using nlohmann::json;
using testing_support::read_file;
using testing_support::temp_dir;
using testing_support::write_file;

namespace {

struct Captured {
    int code = -1;
    std::string out, err;
};

template <class F>
Captured capture(F&& f) {
    std::ostringstream out, err;
    Captured c;
    c.code = f(out, err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

Captured cli(std::vector<std::string> args) {
    args.insert(args.begin(), "relunet");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    return capture([&](std::ostream& o, std::ostream& e) { return run_cli(static_cast<int>(argv.size()), argv.data(), o, e); });
}

const char* kRepresentable = "1 + x + 2*(x - 1/3 + abs(x - 1/3))/2 - (x - 2/3 + abs(x - 2/3))/2";

json representable_config(const std::filesystem::path& dir) {
    return json{{"problem", {{"kind", "ls"}, {"u", kRepresentable}, {"r", "1"}, {"interval", {0, 1}},
                             {"kinks", {{"u", {1.0 / 3.0, 2.0 / 3.0}}}}}},
                {"solver", {{"scheme", "nlgs"}, {"max_iters", 20}}},
                {"init", {{"uniform", 2}}},
                {"outputs", {{"trace_csv", (dir / "trace.csv").string()}, {"final_json", (dir / "final.json").string()}}}};
}

std::string put(const std::filesystem::path& dir, const std::string& name, const json& j) {
    const auto path = dir / name;
    write_file(path, j.dump(2));
    return path.string();
}

}  // namespace

TEST(CliRun, UnknownSchemeIsConfigError) {
    const auto dir = temp_dir("cli_sor");
    json cfg = representable_config(dir);
    cfg["solver"]["scheme"] = "SOR";
    const Captured c = capture([&](auto& o, auto& e) { return cmd_run(put(dir, "c.json", cfg), {}, o, e); });
    EXPECT_EQ(c.code, kExitConfig);
    EXPECT_NE(c.err.find("SOR"), std::string::npos);
}

TEST(CliRun, SyntaxErrorReportsPosition) {
    const auto dir = temp_dir("cli_syntax");
    write_file(dir / "bad.json", "{\"problem\": {\"kind\": \"ls\",, }");
    const Captured c = capture([&](auto& o, auto& e) { return cmd_run((dir / "bad.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitConfig);
    EXPECT_NE(c.err.find("byte 27"), std::string::npos) << c.err;
}

TEST(CliRun, MissingFileIsConfigError) {
    const Captured c = capture([&](auto& o, auto& e) { return cmd_run("/nonexistent/relunet.json", {}, o, e); });
    EXPECT_EQ(c.code, kExitConfig);
}

TEST(CliRun, RepresentableTargetFinishesAfterOneIteration) {
    const auto dir = temp_dir("cli_repr");
    const Captured c = capture([&](auto& o, auto& e) { return cmd_run(put(dir, "c.json", representable_config(dir)), {}, o, e); });
    ASSERT_EQ(c.code, kExitOk) << c.err;
    EXPECT_NE(c.out.find("iters=1 "), std::string::npos) << c.out;
    std::istringstream trace(read_file(dir / "trace.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(trace, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "k,F,gnorm_c,gnorm_b,S1,S2,step_c,step_b,relH1err");
    EXPECT_EQ(lines[2].substr(0, 2), "1,");
    const Network fin = network_from_json(load_json_file((dir / "final.json").string()));
    EXPECT_NEAR(fin.b[0], 1.0 / 3.0, 1e-10);
    EXPECT_NEAR(fin.b[1], 2.0 / 3.0, 1e-10);
}

TEST(CliRun, TraceByteIdenticalAcrossRuns) {
    const auto dir = temp_dir("cli_det");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "sqrt(x + 0.01)"}, {"r", "1"}, {"interval", {0, 1}}}},
             {"solver", {{"max_iters", 15}, {"seed", 7}, {"damping", "none"}}},
             {"init", {{"uniform", 6}}},
             {"outputs", {{"trace_csv", (dir / "t.csv").string()}}}};
    const std::string path = put(dir, "c.json", cfg);
    ASSERT_EQ(capture([&](auto& o, auto& e) { return cmd_run(path, {}, o, e); }).code, kExitOk);
    const std::string first = read_file(dir / "t.csv");
    ASSERT_EQ(capture([&](auto& o, auto& e) { return cmd_run(path, {}, o, e); }).code, kExitOk);
    EXPECT_EQ(read_file(dir / "t.csv"), first);
    EXPECT_GT(first.size(), 100u);
}

TEST(CliRun, OverridesReachTheSolver) {
    const auto dir = temp_dir("cli_over");
    const std::string path = put(dir, "c.json", representable_config(dir));
    const Captured c = cli({"run", "--seed", "123", "--scheme", "lgs", "--iters", "0", path});
    ASSERT_EQ(c.code, kExitOk) << c.err;
    EXPECT_NE(c.out.find("seed=123"), std::string::npos);
    EXPECT_NE(c.out.find("scheme=lgs"), std::string::npos);
    EXPECT_NE(c.out.find("iters=0 "), std::string::npos);
}

TEST(CliRun, QuietSuppressesSummary) {
    const auto dir = temp_dir("cli_quiet");
    const Captured c = cli({"run", "--quiet", put(dir, "c.json", representable_config(dir))});
    EXPECT_EQ(c.code, kExitOk);
    EXPECT_TRUE(c.out.empty());
}

TEST(CliRun, LineSearchDampingAccepted) {
    const auto dir = temp_dir("cli_ls");
    json cfg = representable_config(dir);
    cfg["solver"]["damping"] = "line_search";
    const Captured c = capture([&](auto& o, auto& e) { return cmd_run(put(dir, "c.json", cfg), {}, o, e); });
    EXPECT_EQ(c.code, kExitOk) << c.err;
    EXPECT_NE(c.out.find("damping=line_search"), std::string::npos);
    cfg["solver"]["damping"] = "armijo";
    EXPECT_EQ(capture([&](auto& o, auto& e) { return cmd_run(put(dir, "c.json", cfg), {}, o, e); }).code, kExitConfig);
}

TEST(CliParse, NoSubcommandIsUsageError) { EXPECT_EQ(cli({}).code, kExitConfig); }

TEST(CliParse, HelpExitsZeroAndListsExitCodes) {
    const Captured c = cli({"--help"});
    EXPECT_EQ(c.code, kExitOk);
    EXPECT_NE(c.out.find("5 convergence condition inapplicable"), std::string::npos);
}

TEST(CliCheck, SmoothLeastSquaresPasses) {
    const auto dir = temp_dir("cli_check");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "sin(3*x)"}, {"r", "1 + x"}, {"interval", {0, 1}}}},
             {"init", {{"interval", {0, 1}}, {"alpha", 0.0}, {"c", {0.5, -1.0, 0.7, 0.3}}, {"b", {0.2, 0.45, 0.8}}}}};
    const Captured c = capture([&](auto& o, auto& e) { return cmd_check(put(dir, "c.json", cfg), {}, o, e); });
    EXPECT_EQ(c.code, kExitOk) << c.out << c.err;
    EXPECT_NE(c.out.find("H22"), std::string::npos);
    EXPECT_NE(c.out.find("ok"), std::string::npos);
}

TEST(CliCheck, BreakpointOnKinkOfCoefficientRefused) {
    const auto dir = temp_dir("cli_kink");
    json cfg{{"problem",
              {{"kind", "dr"}, {"a", "1 + abs(x - 0.5)"}, {"r", "1"}, {"f", "1"}, {"interval", {0, 1}},
               {"kinks", {{"a", {0.5}}}}}},
             {"init", {{"interval", {0, 1}}, {"alpha", 0.0}, {"c", {1.0, 1.0, 1.0}}, {"b", {0.25, 0.5}}}}};
    const Captured c = capture([&](auto& o, auto& e) { return cmd_check(put(dir, "c.json", cfg), {}, o, e); });
    EXPECT_EQ(c.code, kExitPrecondition);
    EXPECT_NE(c.err.find("b_2"), std::string::npos) << c.err;
}

TEST(CliCheck, NoBreakpointsChecksCoefficientBlockOnly) {
    const auto dir = temp_dir("cli_n0");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "exp(x)"}, {"r", "1"}, {"interval", {0, 1}}}}, {"init", {{"uniform", 0}}}};
    const Captured c = capture([&](auto& o, auto& e) { return cmd_check(put(dir, "c.json", cfg), {}, o, e); });
    EXPECT_EQ(c.code, kExitOk) << c.err;
    EXPECT_NE(c.out.find("grad_c"), std::string::npos);
    EXPECT_EQ(c.out.find("grad_b"), std::string::npos);
}

TEST(CliCertify, ConvergedRepresentableFit) {
    const auto dir = temp_dir("cli_cert_repr");
    const std::string cfg = put(dir, "c.json", representable_config(dir));
    ASSERT_EQ(capture([&](auto& o, auto& e) { return cmd_run(cfg, {}, o, e); }).code, kExitOk);
    const Captured c =
        capture([&](auto& o, auto& e) { return cmd_certify(cfg, (dir / "final.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitOk) << c.out << c.err;
    const json report = json::parse(c.out);
    EXPECT_TRUE(report["spd_full"]["verdict"].get<bool>());
    const double sigma = report["sigma_nlgs"].get<double>();
    EXPECT_GE(sigma, 0.0);
    EXPECT_LT(sigma, 1.0);
}

TEST(CliCertify, ConvergedSmoothFit) {
    const auto dir = temp_dir("cli_cert_exp");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "exp(x)"}, {"r", "1"}, {"interval", {0, 1}}}}, {"init", {{"uniform", 4}}}};
    const std::string path = put(dir, "c.json", cfg);
    write_file(dir / "net.json", to_json(testing_support::exp_critical_point()).dump());
    const Captured c = capture([&](auto& o, auto& e) { return cmd_certify(path, (dir / "net.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitOk) << c.out << c.err;
    const json report = json::parse(c.out);
    for (const char* key : {"sigma_nlgs", "sigma_lgs", "sigma_jb"}) {
        ASSERT_TRUE(report[key].is_number()) << key;
        EXPECT_LT(report[key].get<double>(), 1.0) << key;
    }
    EXPECT_TRUE(report["jacobi_spd"].get<bool>());
}

TEST(CliCertify, NegativeCurvatureRatioGivesWitness) {
    // u_n(1/2) = 2.5 against a zero target, c_1 = -1e-3: g_1/c_1 = -2500.
    const auto dir = temp_dir("cli_cert_indef");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "0"}, {"r", "1"}, {"interval", {0, 1}}}}, {"init", {{"uniform", 1}}}};
    const std::string path = put(dir, "c.json", cfg);
    write_file(dir / "net.json", to_json(testing_support::make_net({0, 1}, 0, {5.0, -1e-3}, {0.5})).dump());
    const Captured c = capture([&](auto& o, auto& e) { return cmd_certify(path, (dir / "net.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitVerification);
    const json report = json::parse(c.out);
    EXPECT_FALSE(report["spd_full"]["verdict"].get<bool>());
    ASSERT_TRUE(report["spd_full"].contains("witness"));
    const VectorXd w = Eigen::Map<const VectorXd>(report["spd_full"]["witness"].get<std::vector<double>>().data(), 3);
    const Problem p = testing_support::ls_problem("0");
    const AssembledSystem sys = assemble(p, testing_support::make_net({0, 1}, 0, {5.0, -1e-3}, {0.5}));
    EXPECT_LT(w.dot(sys.hessian() * w), 0.0);
}

TEST(CliCertify, ZeroCoefficientIsInapplicable) {
    const auto dir = temp_dir("cli_cert_zero");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "x"}, {"r", "1"}, {"interval", {0, 1}}}}, {"init", {{"uniform", 2}}}};
    const std::string path = put(dir, "c.json", cfg);
    write_file(dir / "net.json", to_json(testing_support::make_net({0, 1}, 0, {1.0, 1.0, 0.0}, {0.3, 0.6})).dump());
    const Captured c = capture([&](auto& o, auto& e) { return cmd_certify(path, (dir / "net.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitInapplicable);
    EXPECT_NE(c.err.find("index 2"), std::string::npos) << c.err;
}

TEST(CliError, InterpolantOfQuadratic) {
    // x^2 against its interpolant on {0, 1/2, 1}: relative H1 error 1/4.
    const auto dir = temp_dir("cli_err");
    json cfg{{"problem", {{"kind", "ls"}, {"u", "x^2"}, {"du", "2*x"}, {"r", "1"}, {"interval", {0, 1}}}},
             {"init", {{"uniform", 1}}}};
    const std::string path = put(dir, "c.json", cfg);
    write_file(dir / "net.json", to_json(testing_support::make_net({0, 1}, 0, {0.5, 1.0}, {0.5})).dump());
    const Captured c = capture([&](auto& o, auto& e) { return cmd_error(path, (dir / "net.json").string(), {}, o, e); });
    ASSERT_EQ(c.code, kExitOk) << c.err;
    const json j = json::parse(c.out);
    EXPECT_NEAR(j["rel_h1_semi"].get<double>(), 0.25, 1e-10);
    EXPECT_NEAR(j["h1_semi"].get<double>(), std::sqrt(1.0 / 12.0), 1e-10);
}

TEST(CliError, NeedsExactSolution) {
    const auto dir = temp_dir("cli_err_none");
    json cfg{{"problem", {{"kind", "dr"}, {"a", "1"}, {"r", "1"}, {"f", "1"}, {"interval", {0, 1}}}},
             {"init", {{"uniform", 1}}}};
    const std::string path = put(dir, "c.json", cfg);
    write_file(dir / "net.json", to_json(testing_support::make_net({0, 1}, 0, {0.5, 1.0}, {0.5})).dump());
    const Captured c = capture([&](auto& o, auto& e) { return cmd_error(path, (dir / "net.json").string(), {}, o, e); });
    EXPECT_EQ(c.code, kExitPrecondition);
}
