#pragma once

// Config-driven experiment runner: theta sweeps, N/M convergence sweeps,
// prompting comparisons, dependence reports, and the identity battery.
// All runs are deterministic for a fixed (config, seed) regardless of the
// thread count: work units depend only on their grid coordinates and results
// are gathered in grid order before writing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "zsl/classifier.hpp"
#include "zsl/cme.hpp"
#include "zsl/dependence.hpp"
#include "zsl/discrete.hpp"
#include "zsl/errors.hpp"
#include "zsl/gaussian.hpp"
#include "zsl/io.hpp"
#include "zsl/kernel.hpp"
#include "zsl/prompting.hpp"
#include "zsl/rn_density.hpp"
#include "zsl/rng.hpp"
#include "zsl/ssl.hpp"

namespace zsl {

struct ExperimentConfig {
  // Gaussian family
  int d = 2;
  double a = 5.0, b = 6.0, p = 0.5;
  double theta = 1.0;
  std::vector<double> theta_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  // estimation sweeps
  std::string route = "conditional_mean";  // or "info_density"
  std::vector<int> n_grid = {100, 200, 400, 800, 1600};
  std::vector<int> m_grid = {25, 50, 100, 200, 400, 800};
  int n_prompts = 500;
  int n_eval = 200;
  int oracle_mc = 4000;
  double beta = 1.0, p_exp = 0.5;
  double lambda = 0.0;  // 0 means "use the schedule"
  // evaluation / MC sizes
  int n_test = 20000;
  int n_mc = 500;
  int resdep_nz = 2000, resdep_nx = 50;
  // toy SSL training
  int n_train = 512;
  int train_steps = 30;
  double lr = 0.05;
  int embed_dim = 4;
  bool train_encoders = true;
  // prompting comparison
  std::vector<std::string> strategies = {"unbiased", "class_conditional",
                                         "template_based"};
  int topk = 1;
  // dependence report
  int n_sample = 1000;
  int cca_d = 3;
  double t_interp = 0.5;
  double omega_rho = 1.0;
  // orchestration
  int replicates = 1;
  std::uint64_t base_seed = 0;
  int threads = 1;
  bool inject_fault = false;
  std::string out = "out.csv";

  std::string dump() const {
    nlohmann::json j;
    j["d"] = d; j["a"] = a; j["b"] = b; j["p"] = p; j["theta"] = theta;
    j["theta_grid"] = theta_grid; j["route"] = route; j["n_grid"] = n_grid;
    j["m_grid"] = m_grid; j["n_prompts"] = n_prompts; j["n_eval"] = n_eval;
    j["oracle_mc"] = oracle_mc; j["beta"] = beta; j["p_exp"] = p_exp;
    j["lambda"] = lambda; j["n_test"] = n_test; j["n_mc"] = n_mc;
    j["resdep_nz"] = resdep_nz; j["resdep_nx"] = resdep_nx;
    j["n_train"] = n_train; j["train_steps"] = train_steps; j["lr"] = lr;
    j["embed_dim"] = embed_dim; j["train_encoders"] = train_encoders;
    j["strategies"] = strategies; j["topk"] = topk;
    j["n_sample"] = n_sample; j["cca_d"] = cca_d;
    j["t_interp"] = t_interp; j["omega_rho"] = omega_rho;
    j["replicates"] = replicates; j["base_seed"] = base_seed;
    j["inject_fault"] = inject_fault;
    // threads and out are orchestration-only: they never change the results,
    // so they stay out of the dump (and out of the artifact hash).
    return j.dump();
  }
};

/// Strict JSON parse: every field optional, unknown fields rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "d") c.d = value.get<int>();
      else if (key == "a") c.a = value.get<double>();
      else if (key == "b") c.b = value.get<double>();
      else if (key == "p") c.p = value.get<double>();
      else if (key == "theta") c.theta = value.get<double>();
      else if (key == "theta_grid") c.theta_grid = value.get<std::vector<double>>();
      else if (key == "route") c.route = value.get<std::string>();
      else if (key == "n_grid") c.n_grid = value.get<std::vector<int>>();
      else if (key == "m_grid") c.m_grid = value.get<std::vector<int>>();
      else if (key == "n_prompts") c.n_prompts = value.get<int>();
      else if (key == "n_eval") c.n_eval = value.get<int>();
      else if (key == "oracle_mc") c.oracle_mc = value.get<int>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "p_exp") c.p_exp = value.get<double>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "n_test") c.n_test = value.get<int>();
      else if (key == "n_mc") c.n_mc = value.get<int>();
      else if (key == "resdep_nz") c.resdep_nz = value.get<int>();
      else if (key == "resdep_nx") c.resdep_nx = value.get<int>();
      else if (key == "n_train") c.n_train = value.get<int>();
      else if (key == "train_steps") c.train_steps = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "embed_dim") c.embed_dim = value.get<int>();
      else if (key == "train_encoders") c.train_encoders = value.get<bool>();
      else if (key == "strategies") c.strategies = value.get<std::vector<std::string>>();
      else if (key == "topk") c.topk = value.get<int>();
      else if (key == "n_sample") c.n_sample = value.get<int>();
      else if (key == "cca_d") c.cca_d = value.get<int>();
      else if (key == "t_interp") c.t_interp = value.get<double>();
      else if (key == "omega_rho") c.omega_rho = value.get<double>();
      else if (key == "replicates") c.replicates = value.get<int>();
      else if (key == "base_seed") c.base_seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "inject_fault") c.inject_fault = value.get<bool>();
      else if (key == "out") c.out = value.get<std::string>();
      else throw ConfigError("unknown config field: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad value for field '" + key + "': " + e.what());
    }
  }
  if (c.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (c.theta_grid.empty() || c.n_grid.empty() || c.m_grid.empty())
    throw ConfigError("grids must be nonempty");
  if (c.route != "conditional_mean" && c.route != "info_density")
    throw ConfigError("route must be conditional_mean or info_density");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  return c;
}

/// Index-parallel map: each task depends only on its index and writes to its
/// own slot, so the result is thread-count independent.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int k = std::min<int>(threads, static_cast<int>(n));
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < k; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

using Rows = std::vector<std::vector<std::string>>;

namespace detail {

inline std::uint64_t cell_seed(std::uint64_t base, std::size_t replicate,
                               std::uint64_t stream) {
  return CounterRng::mix((base ^ replicate) ^ CounterRng::mix(stream));
}

inline double ols_slope(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Accuracy columns for direct, analytic-MC indirect, and (optionally)
/// CLIP/VICReg-trained predictors, plus the residual-dependence estimate.
inline Rows run_theta_sweep(const ExperimentConfig& cfg) {
  const std::size_t n_cells = cfg.theta_grid.size() *
                              static_cast<std::size_t>(cfg.replicates);
  std::vector<Rows> buckets(n_cells);
  parallel_for(n_cells, cfg.threads, [&](std::size_t cell) {
    const std::size_t ti = cell / static_cast<std::size_t>(cfg.replicates);
    const std::size_t rep = cell % static_cast<std::size_t>(cfg.replicates);
    const double theta = cfg.theta_grid[ti];
    const GaussianThetaModel model(cfg.d, cfg.a, cfg.b, theta, cfg.p);
    const std::uint64_t s0 = detail::cell_seed(cfg.base_seed, rep, 1000 + ti);
    CounterRng root(s0);

    const auto test = model.sample(cfg.n_test, root.derive(1));
    double acc_direct = 0.0, acc_indirect = 0.0;
    CounterRng ind_rng = root.derive(2);
    for (std::size_t i = 0; i < test.size(); ++i) {
      const double pd = model.direct_posterior(test[i].x);
      acc_direct += ((pd > 0.5) ? 1 : 0) == test[i].y ? 1.0 : 0.0;
      const double pi =
          model.indirect_posterior(test[i].x, cfg.n_mc, ind_rng.derive(i));
      acc_indirect += ((pi > 0.5) ? 1 : 0) == test[i].y ? 1.0 : 0.0;
    }
    acc_direct /= static_cast<double>(test.size());
    acc_indirect /= static_cast<double>(test.size());

    const double resdep = model.residual_dependence_mc(
        cfg.resdep_nz, cfg.resdep_nx, root.derive(3));

    Rows rows;
    auto emit = [&](const std::string& name, double acc) {
      rows.push_back({format_double(theta), std::to_string(rep), name,
                      format_double(acc), format_double(resdep)});
    };
    emit("direct", acc_direct);
    emit("indirect", acc_indirect);

    if (cfg.train_encoders) {
      const auto train = model.sample(cfg.n_train, root.derive(4));
      const auto prompts =
          generate_unbiased(model, static_cast<std::size_t>(cfg.n_prompts),
                            root.derive(5).key());
      auto run_objective =
          [&](const std::string& name,
              const std::function<double(const EmbeddingBatch&)>& obj,
              std::uint64_t stream) {
            ToyEncoderPair enc(cfg.d, cfg.d, cfg.embed_dim,
                               root.derive(stream).key());
            train_toy(obj, train, enc, cfg.train_steps, cfg.lr,
                      root.derive(stream + 1).key());
            const auto emb = class_embeddings(
                prompts,
                [&](const Eigen::VectorXd& z) { return enc.encode_z(z); }, 2);
            double acc = 0.0;
            for (const auto& s : test) {
              const auto dec = score_and_decode(enc.encode_x(s.x), emb);
              acc += dec.decoded_class == s.y ? 1.0 : 0.0;
            }
            emit(name, acc / static_cast<double>(test.size()));
          };
      run_objective("clip",
                    [](const EmbeddingBatch& b) { return clip_loss(b); }, 6);
      run_objective(
          "vicreg",
          [](const EmbeddingBatch& b) { return vicreg_loss(b).total; }, 8);
    }
    buckets[cell] = std::move(rows);
  });
  Rows out;
  for (auto& b : buckets)
    for (auto& r : b) out.push_back(std::move(r));
  return out;
}

inline const std::vector<std::string>& theta_sweep_header() {
  static const std::vector<std::string> h = {"theta", "replicate", "predictor",
                                             "accuracy", "resdep"};
  return h;
}

/// Oracle indirect predictor on a fixed evaluation set, shared across
/// replicates; MC with a large, seed-pinned draw count.
struct GaussianOracle {
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> eta_rho;

  GaussianOracle(const GaussianThetaModel& model, int n_eval, int n_mc,
                 std::uint64_t seed) {
    CounterRng root(seed);
    const auto pts = model.sample(n_eval, root.derive(1));
    CounterRng mc = root.derive(2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      xs.push_back(pts[i].x);
      eta_rho.push_back(
          model.indirect_posterior(pts[i].x, n_mc, mc.derive(i)));
    }
  }
};

inline double route_mse(const ExperimentConfig& cfg,
                        const GaussianThetaModel& model,
                        const GaussianOracle& oracle, int n, int m,
                        std::uint64_t seed) {
  CounterRng root(seed);
  const auto train = model.sample(n, root.derive(1));
  std::vector<Eigen::VectorXd> xs, zs;
  for (const auto& s : train) {
    xs.push_back(s.x);
    zs.push_back(s.z);
  }
  const auto prompts = generate_unbiased(
      model, static_cast<std::size_t>(m), root.derive(2).key());
  auto r = [](int y) { return y == 1 ? 1.0 : 0.0; };

  double acc = 0.0;
  if (cfg.route == "conditional_mean") {
    const KernelSpec kx{median_heuristic(xs).bandwidth};
    const KernelSpec kz{median_heuristic(zs).bandwidth};
    const double lam = cfg.lambda > 0.0
                           ? cfg.lambda
                           : lambda_schedule_cme(train.size(), cfg.beta,
                                                 cfg.p_exp);
    const CmeModel cme = fit_cme(xs, zs, kx,
                                 {SpectralFilter::Kind::tikhonov, lam}, kz);
    const RidgeModel ridge = fit_g_rho(prompts.ys, prompts.zs, r, kz, lam);
    const CmePredictor pred(cme, ridge);
    for (std::size_t i = 0; i < oracle.xs.size(); ++i) {
      const double d = pred(oracle.xs[i]) - oracle.eta_rho[i];
      acc += d * d;
    }
  } else {
    PairSample all;
    all.xs = xs;
    all.zs = zs;
    auto [paired, unpaired] = split_pairs(all, root.derive(3).key());
    const ProductKernelSpec kernel{{median_heuristic(xs).bandwidth},
                                   {median_heuristic(zs).bandwidth}};
    const double lam =
        cfg.lambda > 0.0
            ? cfg.lambda
            : lambda_schedule_rn(paired.size(), unpaired.size(), cfg.beta);
    const RnModel rn = fit_rn(paired, unpaired, kernel,
                              {SpectralFilter::Kind::tikhonov, lam});
    PromptMeasure pm{prompts.ys, prompts.zs};
    const RnPredictor pred(rn, pm, r);
    for (std::size_t i = 0; i < oracle.xs.size(); ++i) {
      const double d = pred(oracle.xs[i]) - oracle.eta_rho[i];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(oracle.xs.size());
}

/// MSE against the oracle across the N-grid (M fixed) and the M-grid
/// (N fixed at the max grid value); appends per-sweep median log-log slope
/// rows with replicate = -1.
inline Rows run_convergence(const ExperimentConfig& cfg) {
  const GaussianThetaModel model(cfg.d, cfg.a, cfg.b, cfg.theta, cfg.p);
  const GaussianOracle oracle(model, cfg.n_eval, cfg.oracle_mc,
                              CounterRng::mix(cfg.base_seed ^ 0x6f7261636cULL));

  struct Cell {
    char sweep;
    int n, m;
    std::size_t rep;
  };
  std::vector<Cell> cells;
  for (int n : cfg.n_grid)
    for (std::size_t rep = 0; rep < static_cast<std::size_t>(cfg.replicates);
         ++rep)
      cells.push_back({'N', n, cfg.n_prompts, rep});
  const int n_fixed = cfg.n_grid.back();
  for (int m : cfg.m_grid)
    for (std::size_t rep = 0; rep < static_cast<std::size_t>(cfg.replicates);
         ++rep)
      cells.push_back({'M', n_fixed, m, rep});

  std::vector<double> mses(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const std::uint64_t seed = detail::cell_seed(
        cfg.base_seed, c.rep,
        (c.sweep == 'N' ? 2000u : 3000u) +
            static_cast<std::uint64_t>(c.n) * 13 +
            static_cast<std::uint64_t>(c.m) * 7);
    mses[i] = route_mse(cfg, model, oracle, c.n, c.m, seed);
  });

  Rows out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    out.push_back({cfg.route, std::string(1, c.sweep), std::to_string(c.n),
                   std::to_string(c.m), std::to_string(c.rep),
                   format_double(mses[i])});
  }
  // Median-MSE slope per sweep on log-log axes.
  auto slope_row = [&](char sweep, const std::vector<int>& grid,
                       bool vary_n) {
    std::vector<double> lx, ly;
    for (int g : grid) {
      std::vector<double> rep_mses;
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].sweep == sweep &&
            (vary_n ? cells[i].n : cells[i].m) == g)
          rep_mses.push_back(mses[i]);
      lx.push_back(std::log(static_cast<double>(g)));
      ly.push_back(std::log(detail::median(rep_mses)));
    }
    const double slope = detail::ols_slope(lx, ly);
    out.push_back({cfg.route, std::string(1, sweep),
                   std::to_string(vary_n ? 0 : n_fixed),
                   std::to_string(vary_n ? cfg.n_prompts : 0), "-1",
                   format_double(slope)});
  };
  slope_row('N', cfg.n_grid, true);
  slope_row('M', cfg.m_grid, false);
  return out;
}

inline const std::vector<std::string>& convergence_header() {
  static const std::vector<std::string> h = {"route", "sweep", "N",
                                             "M",     "replicate", "mse"};
  return h;
}

/// Accuracy and (when available) exact prompt bias per strategy and m.
inline Rows run_prompt_compare(const ExperimentConfig& cfg) {
  if (cfg.strategies.empty()) throw ConfigError("strategy list is empty");
  const GaussianThetaModel model(cfg.d, cfg.a, cfg.b, cfg.theta, cfg.p);
  struct Cell {
    std::size_t si, mi, rep;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < cfg.strategies.size(); ++si)
    for (std::size_t mi = 0; mi < cfg.m_grid.size(); ++mi)
      for (std::size_t rep = 0; rep < static_cast<std::size_t>(cfg.replicates);
           ++rep)
        cells.push_back({si, mi, rep});

  // Shared evaluation set with analytic x-encodings E[Z | X = x].
  CounterRng eval_rng(CounterRng::mix(cfg.base_seed ^ 0x6576616cULL));
  const auto test = model.sample(cfg.n_test, eval_rng);
  std::vector<Eigen::VectorXd> x_enc;
  x_enc.reserve(test.size());
  for (const auto& s : test) {
    const double px = model.direct_posterior(s.x);
    x_enc.push_back((1.0 - px) * model.z_given_x_mean(0, s.x) +
                    px * model.z_given_x_mean(1, s.x));
  }
  const Eigen::VectorXd v_dir =
      0.5 * (model.cls(1).mu_z - model.cls(0).mu_z);

  std::vector<Rows> buckets(cells.size());
  parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const std::string& name = cfg.strategies[c.si];
    const int m = cfg.m_grid[c.mi];
    const std::uint64_t seed =
        detail::cell_seed(cfg.base_seed, c.rep,
                          4000 + c.si * 101 + static_cast<std::uint64_t>(m));
    PromptSet prompts;
    double bias = std::nan("");
    if (name == "unbiased") {
      prompts = generate_unbiased(model, static_cast<std::size_t>(2 * m), seed);
      bias = 0.0;
    } else if (name == "class_conditional") {
      prompts = generate_class_conditional(model,
                                           static_cast<std::size_t>(m), seed);
      bias = prompt_bias_mc(model, true, CounterRng::mix(seed ^ 0xb1a5ULL))
                 .value;
    } else if (name == "template_based") {
      TemplateStrategy strat{v_dir, 1.0, 2};
      prompts = generate(strat, static_cast<std::size_t>(m), seed);
    } else {
      throw ConfigError("unknown strategy: " + name);
    }
    const auto emb = class_embeddings(
        prompts, [](const Eigen::VectorXd& z) { return z; }, 2);
    std::vector<Eigen::VectorXd> scores;
    std::vector<int> labels;
    for (std::size_t k = 0; k < test.size(); ++k) {
      scores.push_back(score_and_decode(x_enc[k], emb).scores);
      labels.push_back(test[k].y);
    }
    const double acc = topk_accuracy(scores, labels, cfg.topk);
    buckets[i].push_back({name, std::to_string(m), std::to_string(c.rep),
                          std::to_string(cfg.topk), format_double(acc),
                          format_double(bias)});
  });
  Rows out;
  for (auto& b : buckets)
    for (auto& r : b) out.push_back(std::move(r));
  return out;
}

inline const std::vector<std::string>& prompt_compare_header() {
  static const std::vector<std::string> h = {"strategy", "m",        "replicate",
                                             "topk",     "accuracy", "prompt_bias"};
  return h;
}

/// Dependence statistics on a sample from the Gaussian family: the NOCCO
/// MSC estimate, canonical correlations, decay fit, and rate exponents.
inline Rows run_dependence(const ExperimentConfig& cfg) {
  const GaussianThetaModel model(cfg.d, cfg.a, cfg.b, cfg.theta, cfg.p);
  CounterRng root(CounterRng::mix(cfg.base_seed ^ 0x646570ULL));
  const auto sample = model.sample(cfg.n_sample, root);
  std::vector<Eigen::VectorXd> xs, zs;
  for (const auto& s : sample) {
    xs.push_back(s.x);
    zs.push_back(s.z);
  }
  const KernelSpec kx{median_heuristic(xs).bandwidth};
  const KernelSpec kz{median_heuristic(zs).bandwidth};
  const double lam = cfg.lambda > 0.0 ? cfg.lambda : 1e-3;
  Rows out;
  const double msc = msc_estimate(xs, zs, kx, kz, lam);
  out.push_back({"msc", format_double(msc)});
  const CcaResult cca = empirical_cca(xs, zs, kx, kz, lam, cfg.cca_d);
  std::vector<double> sigmas = {1.0};
  for (Eigen::Index i = 0; i < cca.correlations.size(); ++i) {
    out.push_back({"cca_corr_" + std::to_string(i + 1),
                   format_double(cca.correlations(i))});
    sigmas.push_back(cca.correlations(i));
  }
  const DecayFit fit = singular_decay_fit(sigmas);
  out.push_back({"gamma_fit", format_double(fit.gamma)});
  out.push_back({"gamma_msc", format_double(fit.gamma_msc)});
  const double g = std::max(fit.gamma, 0.6);
  const RateReport rate =
      rate_predictor(g, g, g, cfg.t_interp, cfg.omega_rho, cfg.beta);
  out.push_back({"q", format_double(rate.q)});
  out.push_back({"exponent_cm", format_double(rate.exponent_cm)});
  out.push_back({"exponent_prompt", format_double(rate.exponent_prompt)});
  out.push_back({"exponent_rn", format_double(rate.exponent_rn)});
  return out;
}

inline const std::vector<std::string>& dependence_header() {
  static const std::vector<std::string> h = {"statistic", "value"};
  return h;
}

struct IdentityCheck {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool all_pass = true;

  nlohmann::json to_json(std::uint64_t seed) const {
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["seed"] = seed;
    j["all_pass"] = all_pass;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name},
                             {"pass", c.pass},
                             {"max_deviation", c.max_deviation}});
    return j;
  }
};

inline Eigen::MatrixXd random_positive_table(CounterRng& rng, Eigen::Index nr,
                                             Eigen::Index nc) {
  Eigen::MatrixXd t(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) t(i, j) = 0.05 + rng.uniform();
  return t / t.sum();
}

inline DiscreteTriple random_positive_triple(CounterRng& rng, Eigen::Index nx,
                                             Eigen::Index ny,
                                             Eigen::Index nz) {
  std::vector<double> probs(static_cast<std::size_t>(nx * ny * nz));
  double total = 0.0;
  for (auto& v : probs) {
    v = 0.05 + rng.uniform();
    total += v;
  }
  for (auto& v : probs) v /= total;
  // Renormalize exactly against accumulated rounding.
  double check = 0.0;
  for (double v : probs) check += v;
  for (auto& v : probs) v /= check;
  return DiscreteTriple(nx, ny, nz, std::move(probs));
}

/// Seeded identity battery; inject_fault perturbs the VICReg identity so
/// that exactly one check fails.
inline IdentityReport run_identities(const ExperimentConfig& cfg) {
  CounterRng root(CounterRng::mix(cfg.base_seed ^ 0x1d3ULL));
  IdentityReport rep;
  auto add = [&](const std::string& name, double dev, double tol) {
    IdentityCheck c{name, dev <= tol, dev};
    rep.all_pass = rep.all_pass && c.pass;
    rep.checks.push_back(c);
  };

  // Dual MSC computation on random tables.
  {
    double dev = 0.0;
    CounterRng rng = root.derive(1);
    for (int it = 0; it < 50; ++it) {
      const DiscreteJoint joint(random_positive_table(rng, 4, 5));
      const Eigen::MatrixXd r = information_density(joint);
      const Eigen::VectorXd px = joint.marginal_x();
      const Eigen::VectorXd pz = joint.marginal_z();
      double via_density = 0.0;
      for (Eigen::Index x = 0; x < 4; ++x)
        for (Eigen::Index z = 0; z < 5; ++z)
          via_density += px(x) * pz(z) * (r(x, z) - 1.0) * (r(x, z) - 1.0);
      const SpectrumResult spec = conditional_mean_svd(joint);
      double via_spectrum = 0.0;
      for (Eigen::Index i = 1; i < spec.singular_values.size(); ++i)
        via_spectrum += spec.singular_values(i) * spec.singular_values(i);
      dev = std::max(dev, std::abs(via_density - via_spectrum));
    }
    add("msc_dual", dev, 1e-10);
  }

  // Lancaster truncation tail energy.
  {
    double dev = 0.0;
    CounterRng rng = root.derive(2);
    for (int it = 0; it < 50; ++it) {
      const DiscreteJoint joint(random_positive_table(rng, 5, 4));
      const Eigen::MatrixXd r = information_density(joint);
      const Eigen::VectorXd px = joint.marginal_x();
      const Eigen::VectorXd pz = joint.marginal_z();
      const auto [rd, tail] = lancaster_truncate(joint, 2);
      double resid = 0.0;
      for (Eigen::Index x = 0; x < 5; ++x)
        for (Eigen::Index z = 0; z < 4; ++z) {
          const double d = r(x, z) - rd(x, z);
          resid += px(x) * pz(z) * d * d;
        }
      dev = std::max(dev, std::abs(resid - tail));
    }
    add("lancaster_tail", dev, 1e-10);
  }

  // Squared-distance decomposition bound on random triples.
  {
    double dev = 0.0;
    CounterRng rng = root.derive(3);
    for (int it = 0; it < 50; ++it) {
      const DiscreteTriple triple = random_positive_triple(rng, 3, 2, 4);
      const PromptTable prompt(random_positive_table(rng, 2, 4));
      Eigen::VectorXd r(2);
      r << 0.0, 1.0;
      const auto report = predictors_and_bound(triple, prompt, r, 1.0);
      dev = std::max(dev, report.lhs - report.rhs_bound);
    }
    add("decomposition_bound", dev, 1e-10);
  }

  // Distribution-shift inequalities.
  {
    double ok_dev = 0.0;
    CounterRng rng = root.derive(4);
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd p(5), q(5), eta(5);
      for (Eigen::Index i = 0; i < 5; ++i) {
        p(i) = 0.05 + rng.uniform();
        q(i) = 0.05 + rng.uniform();
        eta(i) = 2.0 * rng.uniform() - 1.0;
      }
      p /= p.sum();
      q /= q.sum();
      double b_pq = 0.0;
      for (Eigen::Index i = 0; i < 5; ++i)
        b_pq = std::max(b_pq, p(i) / q(i));
      const auto check = distribution_shift_check(p, q, eta, b_pq);
      if (!check.additive_ok || !check.multiplicative_ok.value_or(false))
        ok_dev = 1.0;
    }
    add("shift_bounds", ok_dev, 0.0);
  }

  // Excess-risk inequality on perturbed posteriors.
  {
    double dev = 0.0;
    CounterRng rng = root.derive(5);
    for (int it = 0; it < 50; ++it) {
      const DiscreteTriple triple = random_positive_triple(rng, 4, 3, 2);
      const Eigen::MatrixXd pxy = triple.marginal_xy();
      const Eigen::VectorXd px = pxy.rowwise().sum();
      std::vector<Eigen::VectorXd> noisy(static_cast<std::size_t>(triple.nx));
      for (Eigen::Index x = 0; x < triple.nx; ++x) {
        Eigen::VectorXd s = pxy.row(x).transpose() / px(x);
        for (Eigen::Index y = 0; y < triple.ny; ++y)
          s(y) += 0.2 * (rng.uniform() - 0.5);
        noisy[static_cast<std::size_t>(x)] = s;
      }
      const auto report = excess_risk_check(
          [&](Eigen::Index x) { return noisy[static_cast<std::size_t>(x)]; },
          triple);
      dev = std::max(dev, report.lhs - report.rhs);
    }
    add("excess_risk_bound", dev, 1e-12);
  }

  // VICReg invariance decomposition.
  {
    double dev = cfg.inject_fault ? 1e-3 : 0.0;
    CounterRng rng = root.derive(6);
    for (int it = 0; it < 50; ++it) {
      EmbeddingBatch b;
      b.a.resize(8, 3);
      b.b.resize(8, 3);
      for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
          b.a(i, j) = rng.normal();
          b.b(i, j) = rng.normal();
        }
      const CovStats s = cov_stats(b);
      const double lhs = (b.a - b.b).squaredNorm() / 16.0;
      const double rhs =
          (s.sigma_aa.trace() + s.sigma_bb.trace() - 2.0 * s.sigma_ab.trace()) /
              16.0 +
          0.5 * (s.mean_a - s.mean_b).squaredNorm();
      dev = std::max(dev, std::abs(lhs - rhs));
    }
    add("vicreg_identity", dev, 1e-12);
  }

  // Spectral contrastive loop vs vectorized.
  {
    double dev = 0.0;
    CounterRng rng = root.derive(7);
    for (int it = 0; it < 50; ++it) {
      EmbeddingBatch b;
      b.a.resize(8, 3);
      b.b.resize(8, 3);
      for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
          b.a(i, j) = rng.normal();
          b.b(i, j) = rng.normal();
        }
      dev = std::max(dev, std::abs(spectral_contrastive_loss(b) -
                                   spectral_contrastive_loss_loop(b)));
    }
    add("spectral_loop_vectorized", dev, 1e-12);
  }

  // CLIP constants: single-pair loss 0, zero-batch loss log n.
  {
    CounterRng rng = root.derive(9);
    EmbeddingBatch one;
    one.a.resize(1, 3);
    one.b.resize(1, 3);
    for (Eigen::Index j = 0; j < 3; ++j) {
      one.a(0, j) = rng.normal();
      one.b(0, j) = rng.normal();
    }
    const double d1 = std::abs(clip_loss(one));
    EmbeddingBatch zero;
    zero.a = Eigen::MatrixXd::Zero(16, 3);
    zero.b = Eigen::MatrixXd::Zero(16, 3);
    const double d2 = std::abs(clip_loss(zero) - std::log(16.0));
    add("clip_constants", std::max(d1, d2), 1e-12);
  }

  // Empirical CCA squared correlations sum to the NOCCO trace statistic.
  {
    CounterRng rng = root.derive(8);
    std::vector<Eigen::VectorXd> xs, zs;
    for (int i = 0; i < 40; ++i) {
      Eigen::VectorXd x = rng.normal_vector(2);
      Eigen::VectorXd z = 0.5 * x + 0.5 * rng.normal_vector(2);
      xs.push_back(x);
      zs.push_back(z);
    }
    const KernelSpec kx{median_heuristic(xs).bandwidth};
    const KernelSpec kz{median_heuristic(zs).bandwidth};
    const double lam = 1e-2;
    const double trace = msc_estimate(xs, zs, kx, kz, lam);
    const CcaResult cca = empirical_cca(xs, zs, kx, kz, lam, 20);
    // Top-d truncation: the omitted directions carry O(mu/(n lambda))
    // energy, far below the tolerance for an RBF spectrum.
    const double sum_sq = cca.correlations.squaredNorm();
    add("cca_trace_consistency", std::abs(trace - sum_sq), 1e-3);
  }

  return rep;
}

}  // namespace zsl
