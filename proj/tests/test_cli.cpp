#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "emlab/experiments.hpp"

using namespace emlab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = EMLAB_CONFIG_DIR;

int run_cli(const std::string& args, const fs::path& out = {}) {
    std::string cmd = std::string(EMLAB_CLI) + " " + args;
    cmd += out.empty() ? " > /dev/null 2>&1" : " > '" + out.string() + "' 2>/dev/null";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("emlab_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Json read_json(const fs::path& p) {
    std::ifstream is(p);
    return Json::parse(is);
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    os << s;
}

}  // namespace

TEST(Cli, ListsExperiments) {
    const fs::path dir = scratch("list");
    ASSERT_EQ(run_cli("list", dir / "out.txt"), 0);
    std::ifstream is(dir / "out.txt");
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    EXPECT_EQ(lines, experiment_names());
}

TEST(Cli, RunsEverySampleConfig) {
    for (const auto& name : experiment_names()) {
        const fs::path dir = scratch("run_" + name);
        const fs::path cfg = kConfigs / (name + ".json");
        ASSERT_TRUE(fs::exists(cfg)) << cfg;
        ASSERT_EQ(run_cli("run " + name + " --quiet --config " + cfg.string() + " --out-dir " + dir.string()), 0) << name;
        ASSERT_TRUE(fs::exists(dir / "trace.csv"));
        const Json s = read_json(dir / "summary.json");
        for (const char* key : {"experiment", "verdict", "rate_fit", "kl_exponent", "final_point", "constraint_residual", "wall_time_ms"})
            EXPECT_TRUE(s.contains(key)) << name << " missing " << key;
        EXPECT_EQ(s["experiment"], name);
        for (const char* key : {"kind", "param", "r2"}) EXPECT_TRUE(s["rate_fit"].contains(key));

        // re-reading the trace reproduces the verdict
        ASSERT_EQ(run_cli("diagnose --trace " + (dir / "trace.csv").string(), dir / "diag.json"), 0);
        EXPECT_EQ(read_json(dir / "diag.json")["verdict"], s["verdict"]) << name;
    }
}

TEST(Cli, DefaultsMatchSampleConfigs) {
    for (const auto& name : experiment_names()) {
        const ExperimentResult a = run_experiment(name);
        const ExperimentResult b = run_experiment(name, load_config((kConfigs / (name + ".json")).string()));
        ASSERT_EQ(a.trace.size(), b.trace.size()) << name;
        EXPECT_EQ(a.trace.back().x, b.trace.back().x) << name;  // deterministic given the config
    }
}

TEST(Cli, RejectsUnknownKeys) {
    const fs::path dir = scratch("unknown");
    write_text(dir / "bad.json", R"({"y": 1.0, "theta_0": [2, -1]})");
    EXPECT_EQ(run_cli("run gaussian-curved --config " + (dir / "bad.json").string() + " --out-dir " + dir.string()), 2);
    EXPECT_THROW(GaussianCurvedConfig::from_json(Json::parse(R"({"yy": 1})")), ConfigError);
}

TEST(Cli, RejectsOffCurveStartBeforeIterating) {
    const fs::path dir = scratch("offcurve");
    write_text(dir / "bad.json", R"({"theta0": [1.0, -1.0]})");
    EXPECT_EQ(run_cli("run gaussian-curved --config " + (dir / "bad.json").string() + " --out-dir " + (dir / "o").string()), 2);
    EXPECT_FALSE(fs::exists(dir / "o" / "trace.csv"));
}

TEST(Cli, RejectsWrongExperimentAndMalformedJson) {
    const fs::path dir = scratch("wrong");
    write_text(dir / "a.json", R"({"experiment": "kl-arc"})");
    write_text(dir / "b.json", R"({"y": )");
    write_text(dir / "c.json", R"({"y": "one"})");
    EXPECT_EQ(run_cli("run gaussian-curved --config " + (dir / "a.json").string()), 2);
    EXPECT_EQ(run_cli("run gaussian-curved --config " + (dir / "b.json").string()), 2);
    EXPECT_EQ(run_cli("run gaussian-curved --config " + (dir / "c.json").string()), 2);
    EXPECT_EQ(run_cli("run no-such-experiment"), 2);
}

TEST(Cli, NonConvergingRunStillExitsZero) {
    const fs::path dir = scratch("escape");
    ASSERT_EQ(run_cli("run gaussian-unconstrained --quiet --out-dir " + dir.string()), 0);
    EXPECT_EQ(read_json(dir / "summary.json")["verdict"], "escaping");
}

TEST(TraceCsv, RoundTripIsBitExact) {
    IterateTrace t;
    t.extra_names = {"extra"};
    for (int k = 0; k < 5; ++k) {
        IterateRecord r;
        r.k = static_cast<std::size_t>(k);
        r.x = {0.1 * k + 1.0 / 3.0, -std::exp(0.3 * k)};
        r.f = std::sqrt(2.0) / (k + 1);
        r.step_norm = k ? 1e-300 * k : 0.0;
        r.domain_margin = k == 4 ? kInf : 1.0 / 7.0;
        r.extra = {kNaN};
        t.rows.push_back(r);
    }
    std::stringstream ss;
    write_trace_csv(ss, t);
    const IterateTrace b = read_trace_csv(ss);
    ASSERT_EQ(b.size(), t.size());
    EXPECT_EQ(b.extra_names, t.extra_names);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(b.rows[i].x, t.rows[i].x);
        EXPECT_EQ(b.rows[i].f, t.rows[i].f);
        EXPECT_EQ(b.rows[i].step_norm, t.rows[i].step_norm);
        EXPECT_EQ(b.rows[i].domain_margin, t.rows[i].domain_margin);
        EXPECT_TRUE(std::isnan(b.rows[i].extra[0]));
    }
}

TEST(TraceCsv, RejectsMalformedInput) {
    std::stringstream a("x0,f\n1,2\n");
    EXPECT_THROW(read_trace_csv(a), ConfigError);
    std::stringstream b("k,x0,f,psi_reg,step_norm,proj_step_norm,residual,lambda,domain_margin,grad_norm,reg_grad_norm\n0,1,2\n");
    EXPECT_THROW(read_trace_csv(b), ConfigError);
}
