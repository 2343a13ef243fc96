// strucgp: simulate, identify, predict, select-order and psd on INI-configured shear frames.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strucgp/datasets.hpp"
#include "strucgp/errors.hpp"
#include "strucgp/io.hpp"
#include "strucgp/mmte_kernel.hpp"
#include "strucgp/order_selection.hpp"
#include "strucgp/sequential_inference.hpp"

namespace fs = std::filesystem;
using namespace strucgp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitInvalid = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> modes;
  std::optional<Index> partitions;
  std::optional<Index> partition_size;
  std::optional<std::string> out;
  double horizon = 0.0;
};

struct PsdFlags {
  std::vector<double> variance, len_sq, omega;
  double noise = 0.0;
  double omega_max = 20.0;
  int points = 512;
};

ExperimentConfig load(const Overrides& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) {
    cfg.noise.seed = *o.seed;
    cfg.optimizer.seed = *o.seed;
  }
  if (o.modes) {
    if (*o.modes == "auto") {
      cfg.kernel.modes = 0;
    } else {
      try {
        cfg.kernel.modes = std::stol(*o.modes);
      } catch (const std::exception&) {
        throw ValidationError("--m expects a positive integer or 'auto'");
      }
      if (cfg.kernel.modes < 1) throw ValidationError("--m expects a positive integer or 'auto'");
    }
  }
  if (o.partitions) cfg.partitions.count = *o.partitions;
  if (o.partition_size) cfg.partitions.size = *o.partition_size;
  if (o.out) cfg.output_dir = *o.out;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text << '\n';
}

Index horizon_samples(double horizon, double dt) {
  if (horizon < 0.0) throw ValidationError("--horizon must be non-negative");
  return static_cast<Index>(std::ceil(horizon / dt - 1e-9));
}

std::vector<std::string> theta_header(Index n_theta) {
  std::vector<std::string> h{"partition"};
  for (Index j = 0; j < n_theta; ++j) h.push_back("theta_" + std::to_string(j + 1));
  return h;
}

// ---------------------------------------------------------------------------------------------

int cmd_simulate(const Overrides& o) {
  const ExperimentConfig cfg = load(o);
  if (cfg.partitions.count < 1) throw ValidationError("[partitions] count must be positive to simulate");
  const StructuralSystem system = build_system(cfg.model);
  const Index n = cfg.partitions.size, count = cfg.partitions.count;
  const Index extra = horizon_samples(o.horizon, cfg.model.dt);
  const Index total = n * count + extra;

  Excitation x = generate_gwn_excitation(total, cfg.model.dt, cfg.noise.excitation_std, cfg.noise.seed,
                                         system.inputs());
  // The held-out tail keeps the last partition's θ.
  const auto thetas = draw_partition_thetas(cfg.model.theta_true, cfg.noise.theta_std, count, cfg.noise.seed + 1);
  const TimeSeries clean = simulate_piecewise(system, x, n, thetas);
  TimeSeries y = add_measurement_noise(clean, cfg.noise.rms_fraction, cfg.noise.seed + 2);
  for (Index d : system.observed_dofs) y.labels.push_back("a" + std::to_string(d + 1));
  x.labels = {"x"};

  write_series_csv(cfg.input_path(), x);
  write_series_csv(cfg.output_path(), y);
  MatrixXd rows(count, thetas.front().size() + 1);
  for (Index i = 0; i < count; ++i) {
    rows(i, 0) = static_cast<double>(i + 1);
    rows.row(i).tail(thetas.front().size()) = thetas[static_cast<std::size_t>(i)].transpose();
  }
  write_matrix_csv(cfg.output_dir / "theta_true.csv", rows, theta_header(thetas.front().size()));
  std::printf("wrote %ld samples (%ld partitions of %ld, %ld held out) to %s\n", static_cast<long>(total),
              static_cast<long>(count), static_cast<long>(n), static_cast<long>(extra), cfg.output_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------

struct LoadedData {
  StructuralSystem system;
  Excitation x;
  TimeSeries y;
  std::vector<Partition> partitions;
};

LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData d;
  d.system = build_system(cfg.model);
  const TimeSeries xs = read_series_csv(cfg.input_path());
  d.x.t0 = xs.t0;
  d.x.dt = xs.dt;
  d.x.values = xs.values;
  d.x.labels = xs.labels;
  d.y = read_series_csv(cfg.output_path());
  if (std::abs(d.x.dt - cfg.model.dt) > 1e-9 * cfg.model.dt) {
    throw ValidationError("sampling interval of " + cfg.input_path().string() + " differs from [model] dt");
  }
  if (d.x.values.cols() != d.system.inputs() || d.y.values.cols() != d.system.outputs()) {
    throw ValidationError("data files do not match the model's inputs and observed floors");
  }
  const Index common = std::min(d.x.samples(), d.y.samples());
  Excitation xc = d.x;
  xc.values = d.x.values.topRows(common);
  TimeSeries yc = d.y;
  yc.values = d.y.values.topRows(common);
  PartitionedData parts = partition_dataset(xc, yc, cfg.partitions.size);
  if (cfg.partitions.count > 0) {
    if (cfg.partitions.count > static_cast<Index>(parts.partitions.size())) {
      throw ValidationError("data hold only " + std::to_string(parts.partitions.size()) + " partitions of " +
                            std::to_string(cfg.partitions.size) + " samples");
    }
    parts.partitions.resize(static_cast<std::size_t>(cfg.partitions.count));
  } else if (!parts.warning.empty()) {
    std::fprintf(stderr, "warning: %s\n", parts.warning.c_str());
  }
  d.partitions = std::move(parts.partitions);
  return d;
}

struct Identification {
  PipelineResult result;
  std::vector<BicResult> bic;
  Index modes = 0;
};

Identification identify(const ExperimentConfig& cfg, const LoadedData& d, const std::optional<Excitation>& x_new) {
  Identification id;
  const InferenceOptions inference = inference_options(cfg);
  const VectorXd& nominal = cfg.model.theta_nominal;
  // Start values come from the first three partitions, or more when those are too short for a spectrum.
  std::size_t used = std::min<std::size_t>(3, d.partitions.size());
  Index samples = 0;
  for (std::size_t i = 0; i < used; ++i) samples += d.partitions[i].samples();
  while (samples < kMinPsdSamples && used < d.partitions.size()) samples += d.partitions[used++].samples();
  const std::vector<Partition> screening(d.partitions.begin(), d.partitions.begin() + used);
  id.modes = cfg.kernel.modes;
  if (id.modes == 0) {
    BicOptions bo;
    bo.inference = inference;
    double best = -std::numeric_limits<double>::infinity();
    for (Index m = 1; m <= cfg.kernel.max_modes; ++m) {
      id.bic.push_back(bic_score(d.partitions, d.system, nominal, m, bo));
      if (id.bic.back().score > best) {
        best = id.bic.back().score;
        id.modes = m;
      }
    }
    std::printf("selected m = %ld by BIC\n", static_cast<long>(id.modes));
  }
  const HyperState delta0 =
      initial_delta(nominal_residuals(screening, d.system, nominal), cfg.model.dt, nominal, id.modes);
  PipelineOptions po;
  po.inference = inference;
  po.prediction_samples = cfg.optimizer.prediction_samples;
  po.sample_seed = cfg.optimizer.seed + 6;
  id.result = run_pipeline(d.partitions, d.system, delta0, po, x_new);
  return id;
}

void write_identification(const ExperimentConfig& cfg, const Identification& id) {
  const PipelineResult& r = id.result;
  write_text(cfg.output_dir / "report.json", pipeline_report(r, cfg));
  if (!id.bic.empty()) write_text(cfg.output_dir / "bic.json", bic_report(id.bic));

  const Index size = r.deltas.front().size();
  MatrixXd rows(static_cast<Index>(r.deltas.size()), size + 1);
  for (std::size_t i = 0; i < r.deltas.size(); ++i) {
    rows(static_cast<Index>(i), 0) = static_cast<double>(i);
    rows.row(static_cast<Index>(i)).tail(size) = r.deltas[i].to_unconstrained().transpose();
  }
  std::vector<std::string> header{"partition"};
  const Index n_theta = r.deltas.front().n_theta();
  for (Index j = 0; j < n_theta; ++j) header.push_back("mu_theta_" + std::to_string(j + 1));
  for (Index j = 0; j < n_theta; ++j) header.push_back("log_sigma_theta_sq_" + std::to_string(j + 1));
  for (Index k = 0; k < id.modes; ++k) {
    const std::string s = std::to_string(k + 1);
    for (const char* name : {"log_variance_", "log_len_sq_", "log_omega_"}) header.push_back(name + s);
  }
  header.push_back("log_noise");
  write_matrix_csv(cfg.output_dir / "deltas.csv", rows, header);

  std::vector<std::string> q_header;
  for (std::size_t j = 1; j < header.size(); ++j) q_header.push_back(header[j]);
  write_matrix_csv(cfg.output_dir / "q.csv", r.q.q, q_header);

  for (std::size_t i = 0; i < r.fits.size(); ++i) {
    const FitResult& f = r.fits[i];
    std::string mu;
    for (Index j = 0; j < f.delta.n_theta(); ++j) mu += " " + std::to_string(f.delta.mu_theta(j));
    std::printf("partition %zu: mu_theta%s, objective %.6g, %s, %d evaluations, rank %ld/%ld\n", i + 1, mu.c_str(),
                f.objective, f.converged ? "converged" : "NOT converged", f.evaluations,
                static_cast<long>(f.retained_rank), static_cast<long>(f.dimension));
  }
  std::string summary;
  for (Index j = 0; j < r.theta.mean.size(); ++j) {
    summary += " theta_" + std::to_string(j + 1) + " = " + std::to_string(r.theta.mean(j)) + " +- " +
               std::to_string(r.theta.predictive_std(j));
  }
  std::printf("estimate:%s\n", summary.c_str());
  if (r.frequency_collision()) std::printf("warning: kernel frequencies collide; consider fewer modes\n");
}

int cmd_identify(const Overrides& o) {
  const ExperimentConfig cfg = load(o);
  const LoadedData d = load_data(cfg);
  const Identification id = identify(cfg, d, std::nullopt);
  write_identification(cfg, id);
  return id.result.all_converged() ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------------------------

int cmd_predict(const Overrides& o) {
  const ExperimentConfig cfg = load(o);
  const fs::path out = cfg.output_dir / "prediction.csv";
  const Index h = horizon_samples(o.horizon, cfg.model.dt);
  if (h == 0) {
    write_prediction_csv(out, PredictiveResult{});
    std::printf("empty horizon; wrote %s\n", out.c_str());
    return kExitOk;
  }
  const LoadedData d = load_data(cfg);
  const Partition& last = d.partitions.back();
  const Index begin = last.grid.first + last.grid.count;
  if (begin + h > d.x.samples()) {
    throw ValidationError("the input series ends before the requested horizon; simulate with --horizon");
  }
  Excitation x_new;
  x_new.dt = d.x.dt;
  x_new.t0 = d.x.time(begin);
  x_new.values = d.x.values.middleRows(begin, h);

  const Identification id = identify(cfg, d, x_new);
  write_identification(cfg, id);
  const PredictiveResult& p = *id.result.prediction;
  write_prediction_csv(out, p, d.y.labels);
  std::printf("predicted %ld samples from %d parameter draws (%d dropped) into %s\n", static_cast<long>(h), p.used,
              p.dropped, out.c_str());

  if (begin + h <= d.y.samples()) {
    const VectorXd y = stack_channels(d.y.values.middleRows(begin, h));
    Index inside = 0;
    for (Index i = 0; i < y.size(); ++i) {
      if (std::abs(y(i) - p.mean(i)) <= 3.0 * std::sqrt(p.variance(i))) ++inside;
    }
    std::printf("held-out coverage of the +-3 SD band: %.1f%%\n",
                100.0 * static_cast<double>(inside) / static_cast<double>(y.size()));
  }
  return id.result.all_converged() ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------------------------

int cmd_select_order(const Overrides& o) {
  Overrides no_modes = o;
  no_modes.modes.reset();
  const ExperimentConfig cfg = load(no_modes);
  Index m_max = cfg.kernel.max_modes;
  if (o.modes) {
    try {
      m_max = std::stol(*o.modes);
    } catch (const std::exception&) {
      throw ValidationError("select-order expects --m to give the largest order to try");
    }
    if (m_max < 1) throw ValidationError("select-order expects --m to give the largest order to try");
  }
  const LoadedData d = load_data(cfg);
  BicOptions bo;
  bo.inference = inference_options(cfg);
  std::vector<BicResult> scores;
  bool converged = true;
  std::printf("%4s %16s %16s %6s %s\n", "m", "BIC", "log L", "N_d", "converged");
  for (Index m = 1; m <= m_max; ++m) {
    scores.push_back(bic_score(d.partitions, d.system, cfg.model.theta_nominal, m, bo));
    const BicResult& r = scores.back();
    converged = converged && r.converged;
    std::printf("%4ld %16.6f %16.6f %6ld %s\n", static_cast<long>(m), r.score, r.log_likelihood,
                static_cast<long>(r.parameters), r.converged ? "yes" : "no");
  }
  const auto best = std::max_element(scores.begin(), scores.end(),
                                     [](const BicResult& a, const BicResult& b) { return a.score < b.score; });
  std::printf("argmax m = %ld\n", static_cast<long>(best->modes));
  write_text(cfg.output_dir / "bic.json", bic_report(scores));
  return converged ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------------------------

int cmd_psd(const Overrides& o, const PsdFlags& f) {
  const bool kernel_given = !f.variance.empty() || !f.len_sq.empty() || !f.omega.empty();
  if (kernel_given) {
    if (f.variance.size() != f.len_sq.size() || f.variance.size() != f.omega.size()) {
      throw ValidationError("--variance, --len-sq and --omega need one value per mode");
    }
    if (f.points < 2 || !(f.omega_max > 0.0)) throw ValidationError("--points must be >= 2 and --omega-max positive");
    MmteParams phi;
    phi.variance = Eigen::Map<const VectorXd>(f.variance.data(), static_cast<Index>(f.variance.size()));
    phi.len_sq = Eigen::Map<const VectorXd>(f.len_sq.data(), static_cast<Index>(f.len_sq.size()));
    phi.omega = Eigen::Map<const VectorXd>(f.omega.data(), static_cast<Index>(f.omega.size()));
    phi.noise = f.noise;
    phi.validate();
    MatrixXd rows(f.points, 2);
    for (int i = 0; i < f.points; ++i) {
      const double w = f.omega_max * i / (f.points - 1);
      rows(i, 0) = w;
      rows(i, 1) = kernel_psd(w, phi);
    }
    const fs::path out = fs::path(o.out.value_or(".")) / "psd.csv";
    write_matrix_csv(out, rows, {"omega", "psd"});
    std::printf("wrote %d points of the kernel spectrum to %s\n", f.points, out.c_str());
    for (int i = 1; i + 1 < f.points; ++i) {
      if (rows(i, 1) > rows(i - 1, 1) && rows(i, 1) >= rows(i + 1, 1)) std::printf("local maximum at %.4f rad/s\n", rows(i, 0));
    }
    return kExitOk;
  }
  if (o.config.empty()) throw ValidationError("psd needs either kernel parameters or --config");

  const ExperimentConfig cfg = load(o);
  const LoadedData d = load_data(cfg);
  const MatrixXd residual = nominal_residuals(d.partitions, d.system, cfg.model.theta_nominal);
  const SpectrumEstimate s = residual_psd(residual, cfg.model.dt);
  MatrixXd rows(s.frequency.size(), 2);
  rows.col(0) = s.frequency;
  rows.col(1) = s.power;
  write_matrix_csv(cfg.output_dir / "residual_psd.csv", rows, {"frequency_hz", "power"});
  std::printf("residual spectrum: %ld segments of %ld samples\n", static_cast<long>(s.segments),
              static_cast<long>(s.segment_length));
  for (double w : suggest_modes(s, cfg.kernel.max_modes)) std::printf("peak at %.4f rad/s\n", w);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed Gaussian process identification of linear structures"};
  app.require_subcommand(1);
  Overrides o;
  PsdFlags psd;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "INI configuration file");
    if (config_required) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed for data generation and the optimizer");
    sub->add_option("--m", o.modes, "Number of kernel modes, or 'auto'");
    sub->add_option("--partitions", o.partitions, "Number of partitions N_D");
    sub->add_option("--partition-size", o.partition_size, "Samples per partition n");
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate synthetic excitation and noisy responses");
  add_common(simulate, true);
  simulate->add_option("--horizon", o.horizon, "Extra held-out seconds after the last partition");

  auto* ident = app.add_subcommand("identify", "Sequential hyper-parameter estimation over all partitions");
  add_common(ident, true);

  auto* predict = app.add_subcommand("predict", "Identify, then predict the responses of the following window");
  add_common(predict, true);
  predict->add_option("--horizon", o.horizon, "Prediction window in seconds");

  auto* select = app.add_subcommand("select-order", "BIC score for m = 1 .. m_max (--m sets m_max)");
  add_common(select, true);

  auto* spectrum = app.add_subcommand("psd", "Kernel spectrum from parameters, or the residual spectrum of the data");
  add_common(spectrum, false);
  spectrum->add_option("--variance", psd.variance, "Mode variances")->delimiter(',');
  spectrum->add_option("--len-sq", psd.len_sq, "Squared length scales")->delimiter(',');
  spectrum->add_option("--omega", psd.omega, "Mode frequencies (rad/s)")->delimiter(',');
  spectrum->add_option("--noise", psd.noise, "White-noise variance");
  spectrum->add_option("--omega-max", psd.omega_max, "Upper end of the frequency grid (rad/s)");
  spectrum->add_option("--points", psd.points, "Number of grid points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*ident) return cmd_identify(o);
    if (*predict) return cmd_predict(o);
    if (*select) return cmd_select_order(o);
    return cmd_psd(o, psd);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
}
