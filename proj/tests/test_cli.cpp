#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "loadcast/cli.hpp"

using namespace loadcast;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path root;
  Workdir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root = fs::temp_directory_path() / (std::string("loadcast_cli_") + info->name());
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
  fs::path operator/(const std::string& s) const { return root / s; }
};

struct Outcome {
  int code;
  std::string out;
};

Outcome cli_run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string(LOADCAST_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SyntheticProfile household(int id) {
  SyntheticProfile p;
  p.house_id = id;
  p.seed = 40 + std::uint64_t(id);
  p.noise_stddev = 1.0;
  p.devices.push_back({10.0, 300.0 + 40.0 * id, 0.4, 15});
  p.devices.push_back({4.0, 80.0, 0.5, 60});
  return p;
}

fs::path write_profiles(const Workdir& w, int households) {
  nlohmann::json j;
  j["households"] = nlohmann::json::array();
  for (int h = 1; h <= households; ++h) j["households"].push_back(to_json(household(h)));
  const auto p = w / "profile.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

// Quick data: 120 s sampling keeps multi-day logs small.
std::string synth_args(const fs::path& profile, double days) {
  return "--profile " + profile.string() + " --days " + std::to_string(days) + " --sample-period 120";
}

}  // namespace

TEST(ExitCodes, MappingMatchesTaxonomy) {
  using cli::exit_code_for;
  for (const auto c : {ErrorCode::Io, ErrorCode::MalformedRecord, ErrorCode::InconsistentRedundancy,
                       ErrorCode::UnknownType, ErrorCode::InvalidProfile}) {
    EXPECT_EQ(exit_code_for(c), 2);
  }
  for (const auto c : {ErrorCode::InsufficientData, ErrorCode::InsufficientWeeks, ErrorCode::TooFewHouseholds,
                       ErrorCode::WindowTooShort, ErrorCode::EmptyTraining, ErrorCode::AllZeroActuals}) {
    EXPECT_EQ(exit_code_for(c), 3);
  }
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigInvalid), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::InvalidArgument), 4);
}

TEST(Config, FlagOverridesFileOverridesDefault) {
  RunConfig defaults;
  EXPECT_EQ(defaults.history_days, 14.0);
  Workdir w;
  std::ofstream(w / "c.ini") << "seed = 9\n[window]\nhistory_days = 3\nhorizon_min = 15,60\n[model]\nmax_depth = 4\n";
  RunConfig cfg;
  cfg.load_file(w / "c.ini");
  EXPECT_EQ(cfg.history_days, 3.0);
  EXPECT_EQ(cfg.horizons_min, (std::vector<int>{15, 60}));
  EXPECT_EQ(cfg.seed, 9u);
  cfg.set("window.history_days", "2");
  EXPECT_EQ(cfg.history_days, 2.0);
  EXPECT_EQ(cfg.increment_min, 15.0);
  std::ofstream(w / "bad.ini") << "[window]\nhistory_dayz = 3\n";
  try {
    RunConfig bad;
    bad.load_file(w / "bad.ini");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
  }
}

TEST(Cli, ExitCodes) {
  Workdir w;
  const auto profile = write_profiles(w, 1);
  std::ofstream(w / "bad.ini") << "[window]\nbogus = 1\n";
  EXPECT_EQ(cli_run("validate --config " + (w / "bad.ini").string() + " " + synth_args(profile, 1), w.root).code, 4);
  EXPECT_EQ(cli_run("validate --input " + (w / "missing.csv").string(), w.root).code, 2);
  EXPECT_EQ(cli_run("evaluate --houses 99 --history-days 1 " + synth_args(profile, 2), w.root).code, 3);
  EXPECT_EQ(cli_run("evaluate --model nonsense " + synth_args(profile, 2), w.root).code, 4);
  EXPECT_EQ(cli_run("frobnicate", w.root).code, 4);
  EXPECT_EQ(cli_run("--help", w.root).code, 0);
}

TEST(Cli, ValidateFlagsOutageDay) {
  Workdir w;
  auto log = generate_synthetic(household(1), Days{3}, 120s);
  const auto day2 = household(1).start + Days{1};
  std::erase_if(log, [&](const SensorReading& r) { return r.ts >= day2 + 6h && r.ts < day2 + 8h + 30min; });
  write_lived_file(w / "lived.csv", log);
  const auto o = cli_run("validate --input " + (w / "lived.csv").string() + " --out " + (w / "out").string(), w.root);
  ASSERT_EQ(o.code, 0) << o.out;
  const auto rows = lines_of(w / "out" / "validate.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "id,total,skipped,used");
  EXPECT_EQ(rows[1], "1,3,1,2");
  const auto days = lines_of(w / "out" / "validate_days.csv");
  ASSERT_EQ(days.size(), 4u);
  EXPECT_NE(days[2].find("GAP_EXCEEDED"), std::string::npos) << days[2];
}

TEST(Cli, ValidateCleanLogSkipsNothing) {
  Workdir w;
  const auto profile = write_profiles(w, 2);
  const auto o = cli_run("validate " + synth_args(profile, 2) + " --out " + (w / "out").string(), w.root);
  ASSERT_EQ(o.code, 0) << o.out;
  const auto rows = lines_of(w / "out" / "validate.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1], "1,2,0,2");
  EXPECT_EQ(rows[2], "2,2,0,2");
}

TEST(Cli, SynthWritesReadableLived) {
  Workdir w;
  const auto profile = write_profiles(w, 1);
  const auto csv = w / "s.csv";
  ASSERT_EQ(cli_run("synth " + synth_args(profile, 0.5) + " --out " + csv.string(), w.root).code, 0);
  const auto back = read_lived_files(std::vector<fs::path>{csv}).readings;
  EXPECT_EQ(back, generate_synthetic(household(1), 12h, 120s));
}

TEST(Cli, EvaluateReportsEveryHorizon) {
  Workdir w;
  const auto profile = write_profiles(w, 1);
  const auto out = w / "out";
  const auto o = cli_run("evaluate " + synth_args(profile, 3) +
                             " --history-days 1.25 --horizon 15,30,60,90,120,360,720,1440 --model persistence,tree-reg"
                             " --out " + out.string(),
                         w.root);
  ASSERT_EQ(o.code, 0) << o.out;
  const auto rows = lines_of(out / "reports.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0], "house_id,model,combo,horizon,metric,value,n");
  std::map<std::string, std::set<int>> horizons;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(rows[i]);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    ASSERT_EQ(f.size(), 7u) << rows[i];
    horizons[f[1] + "/" + f[4]].insert(std::stoi(f[3]));
  }
  ASSERT_EQ(horizons.size(), 4u);
  for (const auto& [k, hs] : horizons) EXPECT_EQ(hs, (std::set<int>{15, 30, 60, 90, 120, 360, 720, 1440})) << k;
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(summary["failures"].empty());
  EXPECT_TRUE(summary.contains("median_mape"));
  EXPECT_EQ(lines_of(out / "median_mape.csv").size(), lines_of(out / "median_nrmse.csv").size());
}

TEST(Cli, EvaluateIsDeterministic) {
  Workdir w;
  const auto profile = write_profiles(w, 2);
  const std::string args = "evaluate " + synth_args(profile, 2) +
                           " --history-days 1 --model tree-reg,gnb-cls,svm-reg --seed 3 --parallelism 2 --out ";
  ASSERT_EQ(cli_run(args + (w / "a").string(), w.root).code, 0);
  ASSERT_EQ(cli_run(args + (w / "b").string(), w.root).code, 0);
  for (const char* f : {"reports.csv", "traces.csv", "summary.json", "median_mape.csv"}) {
    EXPECT_EQ(slurp(w / "a" / f), slurp(w / "b" / f)) << f;
  }
  EXPECT_FALSE(slurp(w / "a" / "traces.csv").empty());
}

TEST(Cli, FeatureSelectTable) {
  Workdir w;
  const auto profile = write_profiles(w, 2);
  const std::string base = "feature-select " + synth_args(profile, 2.5) + " --history-days 1 --model tree-reg ";
  const auto single =
      cli_run(base + "--pool wday,max,willr,last,state,moum --k 6 --out " + (w / "one").string(), w.root);
  ASSERT_EQ(single.code, 0) << single.out;
  const auto rows = lines_of(w / "one" / "feature_select.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "Feature combination,Stddev,MAPE,Score");

  const auto many = cli_run(base + "--pool wday,max,willr,last,state --k 3 --out " + (w / "many").string(), w.root);
  ASSERT_EQ(many.code, 0) << many.out;
  const auto table = nlohmann::json::parse(slurp(w / "many" / "feature_select.json"));
  ASSERT_EQ(table.size(), 10u);
  for (std::size_t i = 1; i < table.size(); ++i) {
    EXPECT_LE(table[i - 1]["score"].get<double>(), table[i]["score"].get<double>());
  }
  EXPECT_EQ(lines_of(w / "many" / "feature_select.csv").size(), 11u);

  const auto lone = cli_run(base + "--households 1 --out " + (w / "lone").string(), w.root);
  EXPECT_EQ(lone.code, 3);
}

TEST(Cli, RunWritesForecastsAndLatency) {
  Workdir w;
  const auto profile = write_profiles(w, 3);
  const auto out = w / "out";
  const auto o = cli_run("run " + synth_args(profile, 1.25) + " --history-days 1 --model tree-reg --parallelism 3"
                             " --features complex --out " + out.string() +
                             " --latency-report " + (w / "lat" / "run").string(),
                         w.root);
  ASSERT_EQ(o.code, 0) << o.out;
  const auto rows = lines_of(out / "forecasts.csv");
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], "house_id,horizon,t_predict,forecast");
  const auto lat = nlohmann::json::parse(slurp(w / "lat" / "run.json"));
  EXPECT_EQ(lat["global"]["count"].get<std::size_t>(), rows.size() - 1);
  EXPECT_EQ(lat["per_household"].size(), 3u);
  EXPECT_EQ(lines_of(w / "lat" / "run.csv").size(), rows.size());
}
