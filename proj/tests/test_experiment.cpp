#include "cbebf/config.hpp"
#include "cbebf/experiment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace cbebf {
namespace {

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  write_results_csv(out, rows);
  return out.str();
}

ExperimentConfig small_tile_config() {
  ExperimentConfig cfg;
  TileWalkSpec tw;
  tw.domain.dims = 2;
  tw.tiles_per_dim = 4;
  tw.n_grids = 3;
  cfg.domain = tw;
  cfg.cbebf = CbebfMethod{{3, 6}, 12, FixedStopping{}, 200};
  cfg.clstd = ClstdMethod{{2, 4, 8}};
  cfg.n_train = {150, 300};
  cfg.n_test = 200;
  cfg.trials = 3;
  cfg.master_seed = 99;
  return cfg;
}

TEST(ResultsCsv, RoundTripIsExact) {
  std::vector<ResultRow> rows{
      {0, "cbebf", 20, 1500, 0, 0.1, 0.0},
      {1, "cbebf", 20, 1500, 7, 1.0 / 3.0, 12.345678901234567},
      {2, "clstd_best", 160, 500, 0, 1e-300, 5e-324},
      {3, "clstd", 5, 500, 0, std::nextafter(1.0, 2.0), 1e300},
  };
  const auto text = to_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), kResultsHeader);
  std::istringstream in(text);
  EXPECT_EQ(read_results_csv(in), rows);
}

TEST(ResultsCsv, RejectsMalformedInput) {
  std::istringstream bad_header("trial,method\n");
  EXPECT_THROW(read_results_csv(bad_header), std::runtime_error);
  std::istringstream short_row(std::string(kResultsHeader) + "\n0,cbebf,1,2\n");
  EXPECT_THROW(read_results_csv(short_row), std::runtime_error);
  std::istringstream bad_number(std::string(kResultsHeader) + "\n0,cbebf,1,2,3,abc,0\n");
  EXPECT_THROW(read_results_csv(bad_number), std::runtime_error);
}

TEST(Summary, MeanAndStandardErrorByHand) {
  std::vector<ResultRow> rows{{0, "clstd", 5, 10, 0, 1.0, 0}, {1, "clstd", 5, 10, 0, 2.0, 0},
                              {2, "clstd", 5, 10, 0, 3.0, 0}, {0, "clstd", 10, 10, 0, 4.0, 0}};
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].d, 5u);
  EXPECT_EQ(s[0].trials, 3u);
  EXPECT_DOUBLE_EQ(s[0].mean_rp_error, 2.0);
  EXPECT_DOUBLE_EQ(s[0].sem, 1.0 / std::sqrt(3.0));
  EXPECT_EQ(s[1].trials, 1u);
  EXPECT_DOUBLE_EQ(s[1].sem, 0.0);
}

TEST(Summary, PoolsSelectedFieldsAndIgnoresOrder) {
  std::vector<ResultRow> rows{{0, "clstd_best", 40, 500, 0, 1.0, 0}, {1, "clstd_best", 80, 500, 0, 3.0, 0},
                              {0, "cbebf_best", 20, 500, 17, 0.5, 0}, {1, "cbebf_best", 20, 500, 90, 1.5, 0},
                              {2, "cbebf", 20, 500, 3, 0.25, 0}};
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 3u);
  const auto* clstd = find_summary(s, "clstd_best", 0, 500);
  ASSERT_NE(clstd, nullptr);
  EXPECT_EQ(clstd->trials, 2u);
  EXPECT_DOUBLE_EQ(clstd->mean_rp_error, 2.0);
  const auto* best = find_summary(s, "cbebf_best", 20, 500);
  ASSERT_NE(best, nullptr);
  EXPECT_DOUBLE_EQ(best->mean_rp_error, 1.0);
  ASSERT_NE(find_summary(s, "cbebf", 20, 500, 3), nullptr);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto again = summarize(rows);
    ASSERT_EQ(again.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_EQ(again[i].method, s[i].method);
      EXPECT_EQ(again[i].mean_rp_error, s[i].mean_rp_error);
      EXPECT_EQ(again[i].sem, s[i].sem);
    }
  }
}

TEST(RunExperiment, RowsAreSortedAndConsistent) {
  const auto cfg = small_tile_config();
  const auto result = run_experiment(cfg);
  ASSERT_TRUE(result.failures.empty()) << result.failures.front().message;
  EXPECT_TRUE(std::is_sorted(result.rows.begin(), result.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return detail::row_key(a) < detail::row_key(b);
  }));

  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> curves, clstd;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, ResultRow> best;
  std::map<std::tuple<std::size_t, std::size_t>, ResultRow> clstd_best;
  for (const auto& r : result.rows) {
    EXPECT_GE(r.rp_error, 0.0);
    EXPECT_EQ(r.wall_time_ms, 0.0);
    if (r.method == "cbebf") {
      auto& c = curves[{r.trial, r.d, r.n}];
      EXPECT_EQ(r.num_bebfs, c.size());
      c.push_back(r.rp_error);
    } else if (r.method == "cbebf_best") {
      best[{r.trial, r.d, r.n}] = r;
    } else if (r.method == "clstd") {
      clstd[{r.trial, 0, r.n}].push_back(r.rp_error);
    } else if (r.method == "clstd_best") {
      clstd_best[{r.trial, r.n}] = r;
    } else {
      ADD_FAILURE() << "unexpected method " << r.method;
    }
  }
  EXPECT_EQ(curves.size(), cfg.trials * 2 * 2);
  for (const auto& [key, c] : curves) {
    ASSERT_EQ(c.size(), cfg.cbebf->m_max + 1);
    const auto it = std::min_element(c.begin(), c.end());
    const auto& b = best.at(key);
    EXPECT_EQ(b.rp_error, *it);
    EXPECT_EQ(b.num_bebfs, static_cast<std::size_t>(it - c.begin()));
  }
  for (const auto& [key, errs] : clstd) {
    ASSERT_EQ(errs.size(), 3u);
    const auto& b = clstd_best.at({std::get<0>(key), std::get<2>(key)});
    EXPECT_EQ(b.rp_error, *std::min_element(errs.begin(), errs.end()));
  }
}

TEST(RunExperiment, RerunIsByteIdenticalAndThreadIndependent) {
  auto cfg = small_tile_config();
  const auto first = to_csv(run_experiment(cfg).rows);
  EXPECT_EQ(first, to_csv(run_experiment(cfg).rows));
  cfg.threads = 3;
  EXPECT_EQ(first, to_csv(run_experiment(cfg).rows));
  cfg.master_seed = 100;
  EXPECT_NE(first, to_csv(run_experiment(cfg).rows));
}

TEST(RunExperiment, TrialsAreIndependentOfTrialCount) {
  auto cfg = small_tile_config();
  const auto three = run_experiment(cfg).rows;
  cfg.trials = 1;
  const auto one = run_experiment(cfg).rows;
  std::vector<ResultRow> trial0;
  std::copy_if(three.begin(), three.end(), std::back_inserter(trial0), [](const ResultRow& r) { return r.trial == 0; });
  EXPECT_EQ(one, trial0);
}

TEST(RunExperiment, FailuresAreRecordedAndRunContinues) {
  ExperimentConfig cfg;
  cfg.domain = FiniteChainSpec{random_finite_mdp(4, 0.8, 5)};
  cfg.cbebf = CbebfMethod{{2, 8}, 4, FixedStopping{}, 100};
  cfg.clstd = ClstdMethod{{2, 16}};
  cfg.n_train = {200};
  cfg.n_test = 100;
  cfg.trials = 2;
  const auto result = run_experiment(cfg);
  // d > D is invalid for both methods
  ASSERT_EQ(result.failures.size(), 4u);
  for (const auto& f : result.failures) {
    EXPECT_TRUE(f.d == 8 || f.d == 16);
    EXPECT_FALSE(f.message.empty());
  }
  const auto ok = std::count_if(result.rows.begin(), result.rows.end(),
                                [](const ResultRow& r) { return r.method == "cbebf" && r.d == 2; });
  EXPECT_EQ(ok, 2 * 5);
}

TEST(RunExperiment, ValidationStoppingEmitsSelectedIteration) {
  auto cfg = small_tile_config();
  cfg.cbebf->stopping = ValidationStopping{2};
  cfg.trials = 2;
  const auto result = run_experiment(cfg);
  ASSERT_TRUE(result.failures.empty());
  std::size_t count = 0;
  for (const auto& r : result.rows) {
    if (r.method != "cbebf_val") continue;
    ++count;
    EXPECT_LE(r.num_bebfs, cfg.cbebf->m_max);
    // the curve covers exactly the iterations that were run
    const auto curve_len = std::count_if(result.rows.begin(), result.rows.end(), [&](const ResultRow& c) {
      return c.method == "cbebf" && c.trial == r.trial && c.d == r.d && c.n == r.n;
    });
    EXPECT_GE(static_cast<std::size_t>(curve_len), r.num_bebfs + 1);
    const auto at_sel = std::find_if(result.rows.begin(), result.rows.end(), [&](const ResultRow& c) {
      return c.method == "cbebf" && c.trial == r.trial && c.d == r.d && c.n == r.n && c.num_bebfs == r.num_bebfs;
    });
    ASSERT_NE(at_sel, result.rows.end());
    EXPECT_NEAR(at_sel->rp_error, r.rp_error, 1e-12);
  }
  EXPECT_EQ(count, 2u * 2 * 2);
}

TEST(RunExperiment, TimingRecordedOnlyWhenRequested) {
  auto cfg = small_tile_config();
  cfg.trials = 1;
  cfg.record_timing = true;
  const auto rows = run_experiment(cfg).rows;
  const bool any_positive =
      std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.wall_time_ms > 0.0; });
  EXPECT_TRUE(any_positive);
}

TEST(RunExperiment, WritesOutputFiles) {
  auto cfg = small_tile_config();
  cfg.trials = 1;
  cfg.cbebf->d = {3};
  const auto dir = std::filesystem::temp_directory_path() / "cbebf_test_outputs";
  std::filesystem::remove_all(dir);
  const auto result = run_experiment(cfg);
  write_outputs(dir, result);
  std::ifstream in(dir / "results.csv");
  EXPECT_EQ(read_results_csv(in), result.rows);
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "failures.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Config, ParsesFullDocument) {
  const auto j = nlohmann::json::parse(R"({
    "domain": {"type": "tile_walk", "dims": 3, "tiles_per_dim": 5, "n_grids": 4, "reversion": 0.8,
               "step_std": 0.2, "reward_noise": 0.0, "policy_feature": 0.25, "index_stride": 2},
    "methods": {"cbebf": {"d": [10, 30], "m_max": 50, "stopping": "validation", "patience": 7, "n_validation": 400},
                "clstd": {"d_grid": 40}},
    "n_train": 700, "n_test": 900, "trials": 4, "gamma": 0.8, "seed": 12345,
    "return_tolerance": 0.01, "record_timing": true, "threads": 2, "output_dir": "out"
  })");
  const auto cfg = config_from_json(j);
  const auto& tw = std::get<TileWalkSpec>(cfg.domain);
  EXPECT_EQ(tw.domain.dims, 3u);
  EXPECT_EQ(tw.tiles_per_dim, 5u);
  EXPECT_EQ(tw.n_grids, 4u);
  EXPECT_EQ(tw.index_stride, 2u);
  EXPECT_DOUBLE_EQ(tw.domain.reversion, 0.8);
  EXPECT_DOUBLE_EQ(tw.domain.policy_feature, 0.25);
  ASSERT_TRUE(cfg.cbebf && cfg.clstd);
  EXPECT_EQ(cfg.cbebf->d, (std::vector<std::size_t>{10, 30}));
  EXPECT_EQ(cfg.cbebf->m_max, 50u);
  EXPECT_EQ(std::get<ValidationStopping>(cfg.cbebf->stopping).patience, 7u);
  EXPECT_EQ(cfg.clstd->d_grid, (std::vector<std::size_t>{40}));
  EXPECT_EQ(cfg.n_train, (std::vector<std::size_t>{700}));
  EXPECT_EQ(cfg.n_test, 900u);
  EXPECT_EQ(cfg.trials, 4u);
  EXPECT_EQ(cfg.master_seed, 12345u);
  EXPECT_DOUBLE_EQ(*cfg.return_tolerance, 0.01);
  EXPECT_TRUE(cfg.record_timing);
  EXPECT_EQ(cfg.threads, 2u);
  EXPECT_EQ(cfg.output_dir, "out");
}

TEST(Config, DefaultsAndMethodSelection) {
  const auto defaults = config_from_json(nlohmann::json::object());
  EXPECT_TRUE(defaults.cbebf && defaults.clstd);
  EXPECT_EQ(defaults.clstd->d_grid, (std::vector<std::size_t>{5, 10, 20, 40, 80, 160}));
  EXPECT_EQ(defaults.n_test, 5000u);
  EXPECT_DOUBLE_EQ(defaults.gamma, 0.9);
  const auto only_clstd = config_from_json(nlohmann::json::parse(R"({"methods": {"clstd": {}}})"));
  EXPECT_FALSE(only_clstd.cbebf);
  EXPECT_TRUE(only_clstd.clstd);
}

TEST(Config, RejectsInvalidDocuments) {
  const auto bad = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
  EXPECT_THROW(bad(R"({"trails": 3})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"gamma": 1.0})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"n_test": 0})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"trials": "ten"})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"methods": {}})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"methods": {"cbebf": {"stopping": "early"}}})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"methods": {"cbebf": {"d": []}}})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"domain": {"type": "maze"}})"), std::invalid_argument);
  EXPECT_THROW(bad(R"({"domain": {"type": "finite"}})"), std::invalid_argument);
}

TEST(Config, FiniteDomainPathIsRelativeToConfig) {
  const auto dir = std::filesystem::temp_directory_path() / "cbebf_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream mdp(dir / "chain.txt");
    write_finite_mdp(mdp, FiniteMdp((Eigen::MatrixXd(2, 2) << 0.5, 0.5, 0.5, 0.5).finished(),
                                    (Vector(2) << 1.0, 0.0).finished(), 0.5));
    std::ofstream cfg(dir / "exp.json");
    cfg << R"({"domain": {"type": "finite", "mdp_file": "chain.txt"}, "methods": {"clstd": {"d_grid": [1, 2]}}})";
  }
  const auto cfg = load_config(dir / "exp.json");
  EXPECT_EQ(std::get<FiniteChainSpec>(cfg.domain).mdp.n_states(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(DomainSampler, StrideSpreadsIndicesOnly) {
  TileWalkSpec tw;
  tw.domain.dims = 2;
  tw.tiles_per_dim = 3;
  tw.n_grids = 2;
  TileWalkSpec wide = tw;
  wide.index_stride = 2;
  const DomainSpec a = tw, b = wide;
  const DomainSampler sa(a, 7), sb(b, 7);
  EXPECT_EQ(sb.dim(), 2 * sa.dim());
  const auto ta = sa.sample(50, 3), tb = sb.sample(50, 3);
  for (std::size_t t = 0; t < ta.size(); ++t) {
    EXPECT_EQ(tb[t].reward, ta[t].reward);
    ASSERT_EQ(tb[t].x.nnz(), ta[t].x.nnz());
    for (std::size_t e = 0; e < ta[t].x.nnz(); ++e) {
      EXPECT_EQ(tb[t].x.entries()[e].index, 2 * ta[t].x.entries()[e].index);
      EXPECT_EQ(tb[t].x.entries()[e].value, ta[t].x.entries()[e].value);
    }
  }
}

}  // namespace
}  // namespace cbebf
