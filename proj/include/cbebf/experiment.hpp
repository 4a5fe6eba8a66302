#pragma once

#include "cbebf/baselines.hpp"
#include "cbebf/bebf.hpp"
#include "cbebf/finite_mdp.hpp"
#include "cbebf/random.hpp"
#include "cbebf/random_walk.hpp"
#include "cbebf/returns.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

namespace cbebf {

/// Tile-coded random walk. index_stride > 1 spreads feature indices over a
/// stride·D space without changing sparsity.
struct TileWalkSpec {
  RandomWalkDomain domain;
  std::size_t tiles_per_dim = 6;
  std::size_t n_grids = 10;
  std::size_t index_stride = 1;
};

/// Tabular chain observed through one-hot features.
struct FiniteChainSpec {
  FiniteMdp mdp;
};

using DomainSpec = std::variant<TileWalkSpec, FiniteChainSpec>;

struct CbebfMethod {
  std::vector<std::size_t> d{20};
  std::size_t m_max = 300;
  StoppingRule stopping = FixedStopping{};
  std::size_t n_validation = 1000;
};

struct ClstdMethod {
  std::vector<std::size_t> d_grid{5, 10, 20, 40, 80, 160};
};

struct ExperimentConfig {
  DomainSpec domain = TileWalkSpec{};
  std::optional<CbebfMethod> cbebf = CbebfMethod{};
  std::optional<ClstdMethod> clstd = ClstdMethod{};
  std::vector<std::size_t> n_train{1500};
  std::size_t n_test = 5000;
  std::size_t trials = 10;
  double gamma = 0.9;
  std::uint64_t master_seed = 0;
  std::optional<double> return_tolerance;  // default 1e-3·R_max/(1−γ)
  bool record_timing = false;
  std::size_t threads = 1;
  std::string output_dir;

  void validate() const {
    const auto positive = [](std::size_t v, const char* what) {
      if (v < 1) throw std::invalid_argument(std::string("ExperimentConfig: ") + what + " must be positive");
    };
    positive(n_test, "n_test");
    positive(trials, "trials");
    positive(threads, "threads");
    if (n_train.empty()) throw std::invalid_argument("ExperimentConfig: n_train is empty");
    for (auto n : n_train) positive(n, "n_train");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ExperimentConfig: gamma must lie in [0, 1)");
    if (return_tolerance && !(*return_tolerance > 0.0)) {
      throw std::invalid_argument("ExperimentConfig: return_tolerance must be positive");
    }
    if (!cbebf && !clstd) throw std::invalid_argument("ExperimentConfig: no method configured");
    if (cbebf) {
      if (cbebf->d.empty()) throw std::invalid_argument("ExperimentConfig: cbebf.d is empty");
      for (auto d : cbebf->d) positive(d, "cbebf.d");
      if (std::holds_alternative<ValidationStopping>(cbebf->stopping)) {
        positive(std::get<ValidationStopping>(cbebf->stopping).patience, "cbebf.patience");
        positive(cbebf->n_validation, "cbebf.n_validation");
      }
    }
    if (clstd) {
      if (clstd->d_grid.empty()) throw std::invalid_argument("ExperimentConfig: clstd.d_grid is empty");
      for (auto d : clstd->d_grid) positive(d, "clstd.d_grid");
    }
    if (const auto* tw = std::get_if<TileWalkSpec>(&domain)) {
      tw->domain.validate();
      positive(tw->tiles_per_dim, "domain.tiles_per_dim");
      positive(tw->n_grids, "domain.n_grids");
      positive(tw->index_stride, "domain.index_stride");
    }
  }
};

/// One measurement, long format. Methods:
///   cbebf        test RP error after num_bebfs iterations (one row per iteration)
///   cbebf_best   minimum of that curve; num_bebfs is its argmin
///   cbebf_val    estimate chosen by validation stopping
///   clstd        one row per projection size
///   clstd_best   best projection size of the grid
struct ResultRow {
  std::size_t trial = 0;
  std::string method;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t num_bebfs = 0;
  double rp_error = 0.0;
  double wall_time_ms = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct TrialFailure {
  std::size_t trial = 0;
  std::string method;
  std::size_t d = 0;
  std::size_t n = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<TrialFailure> failures;
};

struct SummaryRow {
  std::string method;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t num_bebfs = 0;
  std::size_t trials = 0;
  double mean_rp_error = 0.0;
  double sem = 0.0;  // standard deviation of the mean
};

inline constexpr std::string_view kResultsHeader = "trial,method,d,n,num_bebfs,rp_error,wall_time_ms";
inline constexpr std::string_view kSummaryHeader = "method,d,n,num_bebfs,trials,mean_rp_error,sem";

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) { return derive_seed(master_seed, trial); }

/// Trajectory source for one trial: fixes the tile coder (if any) and maps
/// stream seeds to rollouts.
class DomainSampler {
 public:
  DomainSampler(const DomainSpec& spec, std::uint64_t seed) : spec_(&spec) {
    if (const auto* tw = std::get_if<TileWalkSpec>(&spec)) {
      coder_.emplace(make_tile_coder(tw->domain, tw->tiles_per_dim, tw->n_grids, derive_seed(seed, 0x7C)));
    }
  }

  std::size_t dim() const {
    if (coder_) return coder_->dim() * std::get<TileWalkSpec>(*spec_).index_stride;
    return std::get<FiniteChainSpec>(*spec_).mdp.n_states();
  }

  double r_max() const {
    if (coder_) return RandomWalkDomain::r_max;
    return std::get<FiniteChainSpec>(*spec_).mdp.r_max();
  }

  Trajectory sample(std::size_t n, std::uint64_t seed) const {
    if (coder_) {
      const auto& tw = std::get<TileWalkSpec>(*spec_);
      auto traj = sample_trajectory(tw.domain, n, seed, *coder_);
      return tw.index_stride == 1 ? traj : spread(traj, tw.index_stride);
    }
    return sample_trajectory(std::get<FiniteChainSpec>(*spec_).mdp, n, seed);
  }

  static SparseVec spread(const SparseVec& x, std::size_t stride) {
    std::vector<SparseEntry> entries(x.entries().begin(), x.entries().end());
    for (auto& e : entries) e.index *= stride;
    return SparseVec(x.dim() * stride, std::move(entries));
  }

  static Trajectory spread(const Trajectory& traj, std::size_t stride) {
    std::vector<Transition> out;
    out.reserve(traj.size());
    for (const auto& tr : traj) out.push_back({spread(tr.x, stride), tr.reward, spread(tr.next, stride)});
    return Trajectory(std::move(out));
  }

 private:
  const DomainSpec* spec_;
  std::optional<TileCoder> coder_;
};

namespace detail {

enum SeedStream : std::uint64_t { kTrain = 1, kTest = 2, kValidation = 3, kCbebf = 4, kClstd = 5 };

inline ReturnsSample returns_sample(const DomainSampler& sampler, std::size_t points, double gamma, double tol,
                                    std::uint64_t seed) {
  const std::size_t h = return_horizon(gamma, tol, sampler.r_max());
  return monte_carlo_returns(sampler.sample(points + h - 1, seed), gamma, tol, sampler.r_max());
}

inline void run_trial(const ExperimentConfig& cfg, std::size_t trial, ExperimentResult& out) {
  using Clock = std::chrono::steady_clock;
  const auto timing = [&](double ms) { return cfg.record_timing ? ms : 0.0; };
  const std::uint64_t seed = trial_seed(cfg.master_seed, trial);
  const DomainSampler sampler(cfg.domain, seed);
  const double tol = cfg.return_tolerance.value_or(default_return_tolerance(cfg.gamma, sampler.r_max()));
  const ReturnsSample test = returns_sample(sampler, cfg.n_test, cfg.gamma, tol, derive_seed(seed, kTest));
  std::vector<SparseVec> test_points;
  test_points.reserve(test.size());
  for (const auto& p : test.points) test_points.push_back(p.x);

  for (const std::size_t n : cfg.n_train) {
    const Trajectory train = sampler.sample(n, derive_seed(seed, kTrain));

    if (cfg.cbebf) {
      std::optional<ReturnsSample> validation;
      const bool stopping = std::holds_alternative<ValidationStopping>(cfg.cbebf->stopping);
      for (const std::size_t d : cfg.cbebf->d) {
        try {
          if (stopping && !validation) {
            validation = returns_sample(sampler, cfg.cbebf->n_validation, cfg.gamma, tol,
                                        derive_seed(seed, {kValidation, n}));
          }
          CbebfConfig fit_cfg;
          fit_cfg.num_bebfs = cfg.cbebf->m_max;
          fit_cfg.projection_sizes = {d};
          fit_cfg.gamma = cfg.gamma;
          fit_cfg.seed = derive_seed(seed, {kCbebf, d, n});
          fit_cfg.stopping = cfg.cbebf->stopping;

          std::vector<double> curve;
          FitOptions opts;
          opts.extra_points = test_points;
          if (validation) opts.validation = &*validation;
          opts.on_iteration = [&](std::size_t, const ValueEstimate& v) {
            curve.push_back(rp_error([&](const SparseVec& x) { return value_at(v, x); }, test));
          };
          const auto fit = cbebf_fit(train, fit_cfg, opts);

          double elapsed = 0.0;
          std::vector<double> cumulative{0.0};
          for (const auto& rec : fit.report.per_iteration) cumulative.push_back(elapsed += rec.wall_time_ms);
          std::size_t best = 0;
          for (std::size_t i = 0; i < curve.size(); ++i) {
            out.rows.push_back({trial, "cbebf", d, n, i, curve[i], timing(cumulative[i])});
            if (curve[i] < curve[best]) best = i;
          }
          out.rows.push_back({trial, "cbebf_best", d, n, best, curve[best], timing(cumulative[best])});
          if (stopping) {
            const std::size_t sel = fit.report.selected_iteration;
            out.rows.push_back({trial, "cbebf_val", d, n, sel,
                                rp_error([&](const SparseVec& x) { return value_at(fit.value, x); }, test),
                                timing(elapsed)});
          }
        } catch (const std::exception& e) {
          out.failures.push_back({trial, "cbebf", d, n, e.what()});
        }
      }
    }

    if (cfg.clstd) {
      std::optional<ResultRow> best;
      for (const std::size_t d : cfg.clstd->d_grid) {
        try {
          const auto started = Clock::now();
          const auto model = clstd_fit(train, d, cfg.gamma, derive_seed(seed, {kClstd, d, n}));
          const double ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
          const double err = rp_error([&](const SparseVec& x) { return model.value_at(x); }, test);
          ResultRow row{trial, "clstd", d, n, 0, err, timing(ms)};
          out.rows.push_back(row);
          if (!best || err < best->rp_error) best = row;
        } catch (const std::exception& e) {
          out.failures.push_back({trial, "clstd", d, n, e.what()});
        }
      }
      if (best) {
        best->method = "clstd_best";
        out.rows.push_back(*best);
      }
    }
  }
}

inline auto row_key(const ResultRow& r) { return std::tie(r.method, r.d, r.n, r.num_bebfs, r.trial); }

}  // namespace detail

/// Runs every trial, possibly on several threads; the returned rows are
/// sorted by (method, d, n, num_bebfs, trial) so the result does not depend
/// on execution order.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ExperimentResult> per_trial(cfg.trials);
  std::atomic<std::size_t> next{0};
  std::mutex fatal_mutex;
  std::vector<std::pair<std::size_t, std::string>> fatal;
  const auto worker = [&] {
    for (std::size_t t = next++; t < cfg.trials; t = next++) {
      try {
        detail::run_trial(cfg, t, per_trial[t]);
      } catch (const std::exception& e) {
        // data generation failed: the whole trial is lost
        const std::lock_guard lock(fatal_mutex);
        fatal.emplace_back(t, e.what());
      }
    }
  };
  const std::size_t workers = std::min(cfg.threads, cfg.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  ExperimentResult result;
  for (auto& r : per_trial) {
    result.rows.insert(result.rows.end(), r.rows.begin(), r.rows.end());
    result.failures.insert(result.failures.end(), r.failures.begin(), r.failures.end());
  }
  for (auto& [t, msg] : fatal) result.failures.push_back({t, "trial", 0, 0, msg});
  std::sort(result.rows.begin(), result.rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return detail::row_key(a) < detail::row_key(b); });
  std::sort(result.failures.begin(), result.failures.end(), [](const TrialFailure& a, const TrialFailure& b) {
    return std::tie(a.trial, a.method, a.d, a.n) < std::tie(b.trial, b.method, b.d, b.n);
  });
  return result;
}

/// Mean and standard deviation of the mean per (method, d, n, num_bebfs).
/// Fields chosen per trial (num_bebfs of cbebf_best and cbebf_val, d of
/// clstd_best) are pooled and reported as 0. Input order does not matter.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t>;
  std::map<Key, std::vector<std::pair<std::size_t, double>>> groups;
  for (const auto& r : rows) {
    Key key{r.method, r.d, r.n, r.num_bebfs};
    if (r.method == "cbebf_best" || r.method == "cbebf_val") std::get<3>(key) = 0;
    if (r.method == "clstd_best") std::get<1>(key) = 0;
    groups[key].emplace_back(r.trial, r.rp_error);
  }
  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    const auto count = static_cast<double>(values.size());
    double sum = 0.0;
    for (const auto& v : values) sum += v.second;
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& v : values) ss += (v.second - mean) * (v.second - mean);
    const double sem = values.size() > 1 ? std::sqrt(ss / (count - 1.0)) / std::sqrt(count) : 0.0;
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), values.size(), mean, sem});
  }
  return out;
}

/// Summary entry for a key, or nullptr.
inline const SummaryRow* find_summary(const std::vector<SummaryRow>& summary, std::string_view method, std::size_t d,
                                      std::size_t n, std::size_t num_bebfs = 0) {
  for (const auto& s : summary) {
    if (s.method == method && s.d == d && s.n == n && s.num_bebfs == num_bebfs) return &s;
  }
  return nullptr;
}

/// Mean curve of `method` rows for one (d, n), indexed by num_bebfs.
inline std::vector<double> mean_curve(const std::vector<SummaryRow>& summary, std::string_view method, std::size_t d,
                                      std::size_t n) {
  std::vector<double> curve;
  for (const auto& s : summary) {
    if (s.method == method && s.d == d && s.n == n) {
      if (s.num_bebfs != curve.size()) throw std::runtime_error("mean_curve: gap in iteration indices");
      curve.push_back(s.mean_rp_error);
    }
  }
  return curve;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view field, std::size_t line) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << r.method << ',' << r.d << ',' << r.n << ',' << r.num_bebfs << ','
        << detail::format_double(r.rp_error) << ',' << detail::format_double(r.wall_time_ms) << '\n';
  }
}

inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw std::runtime_error("csv: missing or unexpected header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 7) throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected 7 fields");
    rows.push_back({detail::parse_number<std::size_t>(f[0], lineno), std::string(f[1]),
                    detail::parse_number<std::size_t>(f[2], lineno), detail::parse_number<std::size_t>(f[3], lineno),
                    detail::parse_number<std::size_t>(f[4], lineno), detail::parse_number<double>(f[5], lineno),
                    detail::parse_number<double>(f[6], lineno)});
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.method << ',' << s.d << ',' << s.n << ',' << s.num_bebfs << ',' << s.trials << ','
        << detail::format_double(s.mean_rp_error) << ',' << detail::format_double(s.sem) << '\n';
  }
}

/// Writes results.csv, summary.csv and, when needed, failures.csv into dir.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, result.rows);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, summarize(result.rows));
  }
  std::filesystem::remove(dir / "failures.csv");
  if (!result.failures.empty()) {
    auto f = open("failures.csv");
    f << "trial,method,d,n,message\n";
    for (const auto& e : result.failures) {
      std::string msg = e.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      f << e.trial << ',' << e.method << ',' << e.d << ',' << e.n << ',' << msg << '\n';
    }
  }
}

}  // namespace cbebf
