#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "commands.hpp"

using namespace sanovsim;
using namespace sanovsim::cli;

namespace {

struct CliRun {
  int status;
  std::string out;
};

CliRun invoke(const std::string& args) {
  const std::string cmd = std::string(SANOVSIM_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string data(const std::string& name) { return std::string(SANOVSIM_DATA_DIR) + "/" + name; }

std::string first_line(const std::string& s) { return s.substr(0, s.find("\r\n")); }

}  // namespace

TEST(CliParsing, Numbers) {
  EXPECT_EQ(parse_number("0.25"), 0.25);
  EXPECT_EQ(parse_number(" 2/3 "), 2.0 / 3.0);
  EXPECT_EQ(parse_number("1e-3"), 1e-3);
  EXPECT_FALSE(parse_number("1/0"));
  EXPECT_FALSE(parse_number("abc"));
  EXPECT_FALSE(parse_number("0.5x"));
  EXPECT_FALSE(parse_number(""));
  EXPECT_EQ(parse_list("1/2, 1/4,1/4", "x"), (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_THROW(parse_list("1,,2", "x"), CliError);
}

TEST(CliParsing, Formatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1.25), "1.25");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  Table t{{"k", "v"}, {{"x", "1,2"}}};
  EXPECT_EQ(render_csv(t), "k,v\r\nx,\"1,2\"\r\n");
}

TEST(CliParsing, ModelObjectAndArrayForms) {
  const EmpiricalModel a = parse_model(R"({
    "parties": ["Alice", "Bob"],
    "measurements": [["a", "a'"], ["b", "b'"]],
    "outcomes": ["0", "1"],
    "rows": {"a,b": ["1/2", 0, 0, 0.5], "a',b": [0.5, 0, 0, 0.5], "a,b'": [0.5, 0, 0, 0.5], "a',b'": [0, 0.5, 0.5, 0]}
  })");
  EXPECT_EQ(a.row({1, 1})[1], 0.5);
  const EmpiricalModel b = parse_model(R"({
    "parties": ["Alice", "Bob"],
    "measurements": [["a", "a'"], ["b", "b'"]],
    "outcomes": ["0", "1"],
    "rows": [[0.5, 0, 0, 0.5], [0.5, 0, 0, 0.5], [0.5, 0, 0, 0.5], [0, 0.5, 0.5, 0]]
  })");
  EXPECT_EQ(b.row({1, 1})[2], 0.5);
  auto code = [](const std::string& text) {
    try {
      parse_model(text);
    } catch (const CliError& e) {
      return e.code();
    }
    return ExitCode::ok;
  };
  EXPECT_EQ(code("{not json"), ExitCode::parse_error);
  EXPECT_EQ(code(R"({"parties": ["Alice", "Bob"], "measurements": [["a", "a'"], ["b", "b'"]], "outcomes": ["0", "1"],
                     "rows": {"a,b": [0.5, 0, 0, 0.5]}})"), ExitCode::parse_error);
}

TEST(Cli, BellDemoPassesAndHasSchema) {
  const CliRun r = invoke("bell-demo");
  ASSERT_EQ(r.status, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  EXPECT_EQ(j["command"], "bell-demo");
  EXPECT_EQ(j["results"]["Lambda"], 1.25);
  EXPECT_TRUE(j["results"]["reversal"].get<bool>());
  EXPECT_TRUE(j["results"]["checks_passed"].get<bool>());
}

TEST(Cli, CsvHeaders) {
  EXPECT_EQ(first_line(invoke("bell-demo --format csv").out), "n,Lambda,d_coarse,d_fine,reversal,p_fine,p_coarse");
  EXPECT_EQ(first_line(invoke("realize --model " + data("bell.json") + " --format csv").out), "key,value");
  EXPECT_EQ(first_line(invoke("reversal-search --format csv").out),
            "realization,status,Lambda,d_coarse,d_star,reversal,residual,kkt_residual,iterations");
  EXPECT_EQ(first_line(invoke("near-uniform --format csv").out),
            "epsilon,gap_direct,gap_closed_form,derivative_fd,derivative_analytic,minus_twice_kl");
  EXPECT_EQ(first_line(invoke("mc-sanov --format csv").out),
            "n,exact_probability,mc_estimate,mc_std_error,mc_hits,empirical_rate,min_ball_kl,kl_limit,rate_gap,"
            "sanov_probability");
  EXPECT_EQ(first_line(invoke("ising --format csv").out), "key,value");
}

TEST(Cli, RealizeModels) {
  const CliRun bell = invoke("realize --model " + data("bell.json"));
  ASSERT_EQ(bell.status, 0);
  EXPECT_EQ(json::parse(bell.out)["results"]["Lambda"], 1.25);
  EXPECT_EQ(json::parse(invoke("realize --model " + data("uniform.json")).out)["results"]["Lambda"], 1.0);
  EXPECT_EQ(json::parse(invoke("realize --model " + data("pr_box.json")).out)["results"]["Lambda"], 2.0);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke("").status, 1);
  EXPECT_EQ(invoke("no-such-command").status, 1);
  EXPECT_EQ(invoke("realize").status, 1);
  EXPECT_EQ(invoke("mc-sanov --trials 10").status, 1);
  EXPECT_EQ(invoke("ising --random 5").status, 1);
  EXPECT_EQ(invoke("realize --model /nonexistent/model.json").status, 3);
  EXPECT_EQ(invoke("realize --model " + data("signaling.json")).status, 4);
  EXPECT_EQ(invoke("reversal-search --target 0,1,0,0").status, 5);
  EXPECT_EQ(invoke("near-uniform --epsilon-grid 0,0.6").status, 6);
  EXPECT_EQ(invoke("near-uniform --step 1").status, 6);
  EXPECT_EQ(invoke("ising --temperature 0").status, 6);
  EXPECT_EQ(invoke("mc-sanov --dist 1/3,1/3,1/3 --center 0.5,0.3,0.2 --n 10000").status, 7);
}

TEST(Cli, MalformedModelFile) {
  const std::string path = ::testing::TempDir() + "sanovsim_bad_model.json";
  {
    std::ofstream(path) << "{\"parties\": [";
  }
  EXPECT_EQ(invoke("realize --model " + path).status, 3);
  std::remove(path.c_str());
}

TEST(Cli, ReversalSearchBothRealizations) {
  const CliRun r = invoke("reversal-search --realization both");
  ASSERT_EQ(r.status, 0);
  const json j = json::parse(r.out);
  for (const auto& e : j["results"]["realizations"]) {
    EXPECT_EQ(e["status"], "ok");
    EXPECT_LE(e["d_star"].get<double>(), 0.0541 + 1e-6);
    EXPECT_TRUE(e["reversal"].get<bool>());
  }
}

TEST(Cli, OutputFile) {
  const std::string path = ::testing::TempDir() + "sanovsim_ising.json";
  ASSERT_EQ(invoke("ising --out " + path).status, 0);
  std::ifstream in(path);
  const json j = json::parse(in);
  EXPECT_EQ(j["results"]["coarse"][0], 0.5);
  std::remove(path.c_str());
}

TEST(Cli, StochasticCommandsAreDeterministic) {
  const std::string mc = "mc-sanov --n 50,100 --trials 5000 --seed 11";
  const CliRun a = invoke(mc + " --threads 1");
  const CliRun b = invoke(mc + " --threads 1");
  const CliRun c = invoke(mc + " --threads 4");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_NE(a.out, invoke("mc-sanov --n 50,100 --trials 5000 --seed 12").out);

  const CliRun i1 = invoke("ising --random 200 --seed 5");
  ASSERT_EQ(i1.status, 0);
  EXPECT_EQ(i1.out, invoke("ising --random 200 --seed 5").out);
  EXPECT_EQ(json::parse(i1.out)["results"]["random"]["strict"], 200);

  EXPECT_EQ(invoke("near-uniform --threads 1").out, invoke("near-uniform --threads 3").out);
}
