#include "strucgp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "strucgp/errors.hpp"

namespace strucgp {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// List values accept commas and/or whitespace as separators.
Eigen::VectorXd parse_vector(const std::string& text, const std::string& key) {
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream in(normalized);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    double v = 0.0;
    if (!parse_number(token, v)) throw ValidationError("config key '" + key + "': '" + token + "' is not a number");
    values.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

std::vector<Index> parse_indices(const std::string& text, const std::string& key) {
  const Eigen::VectorXd v = parse_vector(text, key);
  std::vector<Index> out;
  for (Index i = 0; i < v.size(); ++i) {
    if (v(i) != std::floor(v(i)) || v(i) < 0) {
      throw ValidationError("config key '" + key + "' must list non-negative integers");
    }
    out.push_back(static_cast<Index>(v(i)));
  }
  return out;
}

class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  [[nodiscard]] bool present() const noexcept { return tree_ != nullptr; }

  [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
    used_.insert(key);
    if (tree_ == nullptr) return std::nullopt;
    const auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return std::string(trim(*v));
  }

  [[nodiscard]] std::string required(const std::string& key) const {
    auto v = text(key);
    if (!v || v->empty()) throw ValidationError("config section [" + name_ + "] is missing '" + key + "'");
    return *v;
  }

  double number(const std::string& key, double fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    double out = 0.0;
    if (!parse_number(*v, out)) throw ValidationError("config key '" + name_ + "." + key + "' is not a number");
    return out;
  }

  template <typename Int>
  Int integer(const std::string& key, Int fallback) const {
    const double v = number(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ValidationError("config key '" + name_ + "." + key + "' must be an integer");
    return static_cast<Int>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto v = text(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ValidationError("config key '" + name_ + "." + key + "' must be true or false");
  }

  void reject_unknown() const {
    if (tree_ == nullptr) return;
    for (const auto& [key, child] : *tree_) {
      if (!used_.count(key)) throw ValidationError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  mutable std::set<std::string> used_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'));
  return Section(child ? &*child : nullptr, name);
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

json to_json(const HyperState& h) {
  return json{{"mu_theta", to_json(h.mu_theta)},
              {"sigma_theta_sq", to_json(h.sigma_theta_sq)},
              {"kernel",
               {{"variance", to_json(h.phi.variance)},
                {"len_sq", to_json(h.phi.len_sq)},
                {"omega", to_json(h.phi.omega)},
                {"noise", h.phi.noise}}}};
}

}  // namespace

void write_series_csv(const fs::path& path, const TimeSeries& series) {
  std::ofstream out = open_output(path);
  out << "time";
  for (Index c = 0; c < series.channels(); ++c) {
    const auto idx = static_cast<std::size_t>(c);
    out << ',' << (idx < series.labels.size() ? series.labels[idx] : "ch" + std::to_string(c + 1));
  }
  out << '\n';
  for (Index k = 0; k < series.samples(); ++k) {
    out << format_double(series.time(k));
    for (Index c = 0; c < series.channels(); ++c) out << ',' << format_double(series.values(k, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TimeSeries parse_series_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  TimeSeries out;
  std::vector<double> times;
  std::vector<double> values;
  Index channels = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split(row, ',');
    if (!header_seen) {
      header_seen = true;
      double probe = 0.0;
      if (!parse_number(fields.front(), probe)) {
        if (fields.size() < 2) throw ParseError(source + ": header needs a time column and at least one channel", line_no);
        for (std::size_t j = 1; j < fields.size(); ++j) out.labels.emplace_back(fields[j]);
        channels = static_cast<Index>(fields.size()) - 1;
        continue;
      }
    }
    if (channels < 0) channels = static_cast<Index>(fields.size()) - 1;
    if (static_cast<Index>(fields.size()) != channels + 1) {
      throw ParseError(source + ": expected " + std::to_string(channels + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      if (!parse_number(fields[j], v) || !std::isfinite(v)) {
        throw ParseError(source + ": field " + std::to_string(j + 1) + " ('" + std::string(fields[j]) +
                             "') is not a finite number",
                         line_no);
      }
      (j == 0 ? times : values).push_back(v);
    }
    const std::size_t k = times.size() - 1;
    if (k > 0 && !(times[k] > times[k - 1])) throw ParseError(source + ": time stamps must increase", line_no);
  }
  if (times.empty()) throw ValidationError(source + " contains no data rows");
  if (channels < 1) throw ValidationError(source + " has no channel columns");

  const auto n = static_cast<Index>(times.size());
  out.t0 = times.front();
  out.dt = n > 1 ? (times.back() - times.front()) / static_cast<double>(n - 1) : 0.0;
  for (Index k = 1; k < n; ++k) {
    if (std::abs(times[static_cast<std::size_t>(k)] - out.time(k)) > 1e-6 * out.dt) {
      throw ValidationError(source + ": time stamps are not uniformly spaced near sample " + std::to_string(k + 1));
    }
  }
  out.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n,
                                                                                                   channels);
  if (out.labels.empty()) {
    for (Index c = 0; c < channels; ++c) out.labels.push_back("ch" + std::to_string(c + 1));
  }
  return out;
}

TimeSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (trim(text).empty()) throw ValidationError(path.string() + " is empty");
  return parse_series_csv(text, path.string());
}

void write_prediction_csv(const fs::path& path, const PredictiveResult& prediction,
                          const std::vector<std::string>& labels) {
  std::ofstream out = open_output(path);
  const Index n = prediction.grid.count;
  out << "time";
  for (Index c = 0; c < prediction.channels; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    const std::string name = idx < labels.size() ? labels[idx] : "y" + std::to_string(c + 1);
    out << ',' << name << "_mean," << name << "_sd";
  }
  out << '\n';
  for (Index k = 0; k < n; ++k) {
    out << format_double(prediction.grid.stamp(k));
    for (Index c = 0; c < prediction.channels; ++c) {
      out << ',' << format_double(prediction.mean(c * n + k)) << ','
          << format_double(std::sqrt(prediction.variance(c * n + k)));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& rows, const std::vector<std::string>& header) {
  std::ofstream out = open_output(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << format_double(rows(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

fs::path ExperimentConfig::input_path() const { return input_file.empty() ? output_dir / "x.csv" : input_file; }
fs::path ExperimentConfig::output_path() const { return output_file.empty() ? output_dir / "y.csv" : output_file; }

void ExperimentConfig::validate() const {
  if (model.masses.size() < 1) throw ValidationError("[model] masses must not be empty");
  if (!(model.dt > 0.0)) throw ValidationError("[model] dt must be positive");
  if (partitions.size < 16) throw ValidationError("[partitions] size must be at least 16");
  if (partitions.count < 0) throw ValidationError("[partitions] count must be non-negative");
  if (kernel.modes < 0 || kernel.max_modes < 1) throw ValidationError("[kernel] mode counts must be positive");
  if (!(kernel.truncation > 0.0 && kernel.truncation < 1.0)) throw ValidationError("[kernel] truncation must lie in (0, 1)");
  if (optimizer.starts < 1 || optimizer.max_evaluations < 1 || optimizer.prediction_samples < 1) {
    throw ValidationError("[optimizer] counts must be positive");
  }
  if (noise.rms_fraction < 0.0 || noise.theta_std < 0.0 || !(noise.excitation_std > 0.0)) {
    throw ValidationError("[noise] levels must be non-negative and the excitation std positive");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("configuration: " + e.message(), e.line());
  }
  static const std::set<std::string> known = {"model", "kernel", "partitions", "noise", "optimizer", "output", "data"};
  for (const auto& [name, child] : root) {
    if (!known.count(name)) throw ValidationError("unknown config section [" + name + "]");
  }
  for (const char* name : {"model", "partitions"}) {
    if (!root.get_child_optional(pt::ptree::path_type(name, '\0'))) {
      throw ValidationError(std::string("configuration is missing the [") + name + "] section");
    }
  }

  ExperimentConfig cfg;
  const Section model = section(root, "model");
  ModelConfig& m = cfg.model;
  m.masses = parse_vector(model.required("masses"), "model.masses");
  m.dt = model.number("dt", 0.0);
  m.story_stiffness = parse_vector(model.required("story_stiffness"), "model.story_stiffness");
  if (const auto s = model.text("scaled_stories")) {
    m.scaled_stories = parse_indices(*s, "model.scaled_stories");
  } else {
    for (Index i = 0; i < m.masses.size(); ++i) m.scaled_stories.push_back(i);
  }
  const auto n_theta = static_cast<Index>(m.scaled_stories.size());
  m.theta_nominal = model.text("theta_nominal") ? parse_vector(*model.text("theta_nominal"), "model.theta_nominal")
                                                : Eigen::VectorXd(Eigen::VectorXd::Ones(n_theta));
  m.theta_true = model.text("theta_true") ? parse_vector(*model.text("theta_true"), "model.theta_true") : m.theta_nominal;
  const std::string damping = model.text("damping").value_or("rayleigh");
  if (damping == "rayleigh") {
    m.damping = RayleighDamping{model.number("alpha", 0.0), model.number("beta", 0.0)};
  } else if (damping == "modal") {
    m.damping = ModalDamping{parse_vector(model.required("modal_ratios"), "model.modal_ratios"), {}, {}};
  } else {
    throw ValidationError("[model] damping must be 'rayleigh' or 'modal'");
  }
  (void)model.text("alpha");
  (void)model.text("beta");
  (void)model.text("modal_ratios");
  m.input = model.text("input").value_or("base");
  if (m.input != "base" && m.input != "force") throw ValidationError("[model] input must be 'base' or 'force'");
  m.force_dof = model.integer<Index>("force_dof", m.masses.size() - 1);
  if (const auto s = model.text("observed_dofs")) m.observed_dofs = parse_indices(*s, "model.observed_dofs");
  model.reject_unknown();

  const Section kernel = section(root, "kernel");
  const std::string modes = kernel.text("modes").value_or("auto");
  cfg.kernel.modes = modes == "auto" ? 0 : kernel.integer<Index>("modes", 0);
  cfg.kernel.max_modes = kernel.integer<Index>("max_modes", cfg.kernel.max_modes);
  cfg.kernel.truncation = kernel.number("truncation", cfg.kernel.truncation);
  cfg.kernel.truncate = kernel.flag("truncate", cfg.kernel.truncate);
  const std::string convention = kernel.text("convention").value_or("eigenvalue_floor");
  if (convention == "eigenvalue_floor") {
    cfg.kernel.convention = DensityConvention::eigenvalue_floor;
  } else if (convention == "pseudo_inverse") {
    cfg.kernel.convention = DensityConvention::pseudo_inverse;
  } else {
    throw ValidationError("[kernel] convention must be 'eigenvalue_floor' or 'pseudo_inverse'");
  }
  kernel.reject_unknown();

  const Section parts = section(root, "partitions");
  cfg.partitions.size = parts.integer<Index>("size", 0);
  cfg.partitions.count = parts.integer<Index>("count", 0);
  parts.reject_unknown();

  const Section noise = section(root, "noise");
  cfg.noise.rms_fraction = noise.number("rms_fraction", cfg.noise.rms_fraction);
  cfg.noise.excitation_std = noise.number("excitation_std", cfg.noise.excitation_std);
  cfg.noise.theta_std = noise.number("theta_std", cfg.noise.theta_std);
  cfg.noise.seed = noise.integer<std::uint64_t>("seed", cfg.noise.seed);
  noise.reject_unknown();

  const Section opt = section(root, "optimizer");
  cfg.optimizer.max_evaluations = opt.integer<int>("max_evaluations", cfg.optimizer.max_evaluations);
  cfg.optimizer.starts = opt.integer<int>("starts", cfg.optimizer.starts);
  cfg.optimizer.f_tolerance = opt.number("f_tolerance", cfg.optimizer.f_tolerance);
  cfg.optimizer.x_tolerance = opt.number("x_tolerance", cfg.optimizer.x_tolerance);
  cfg.optimizer.prediction_samples = opt.integer<int>("prediction_samples", cfg.optimizer.prediction_samples);
  cfg.optimizer.seed = opt.integer<std::uint64_t>("seed", cfg.optimizer.seed);
  opt.reject_unknown();

  const Section output = section(root, "output");
  if (const auto dir = output.text("directory")) cfg.output_dir = *dir;
  output.reject_unknown();
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') cfg.output_dir = env;

  const Section data = section(root, "data");
  if (const auto f = data.text("input")) cfg.input_file = *f;
  if (const auto f = data.text("output")) cfg.output_file = *f;
  data.reject_unknown();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open configuration " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

StructuralSystem build_system(const ModelConfig& model) {
  StructuralSystem system = build_scaled_shear_frame(model.masses, model.story_stiffness, model.scaled_stories,
                                                     model.theta_nominal, model.damping, model.dt);
  if (model.input == "force") {
    if (model.force_dof < 0 || model.force_dof >= system.dofs()) throw ValidationError("[model] force_dof out of range");
    system.input_map = Eigen::MatrixXd::Zero(system.dofs(), 1);
    system.input_map(model.force_dof, 0) = 1.0;
  }
  if (!model.observed_dofs.empty()) system.observed_dofs = model.observed_dofs;
  system.validate();
  return system;
}

InferenceOptions inference_options(const ExperimentConfig& config) {
  InferenceOptions o;
  o.factorization = FactorizationPolicy{config.kernel.truncate, config.kernel.truncation, config.kernel.convention};
  o.simplex.max_evaluations = config.optimizer.max_evaluations;
  o.simplex.f_tolerance = config.optimizer.f_tolerance;
  o.simplex.x_tolerance = config.optimizer.x_tolerance;
  o.starts = config.optimizer.starts;
  o.seed = config.optimizer.seed;
  return o;
}

std::string pipeline_report(const PipelineResult& result, const ExperimentConfig& config) {
  json parts = json::array();
  for (std::size_t i = 0; i < result.fits.size(); ++i) {
    const FitResult& f = result.fits[i];
    json entry = to_json(f.delta);
    entry["partition"] = result.states[i].index();
    entry["objective"] = f.objective;
    entry["converged"] = f.converged;
    entry["evaluations"] = f.evaluations;
    entry["penalized_evaluations"] = f.penalized_evaluations;
    entry["retained_rank"] = f.retained_rank;
    entry["dimension"] = f.dimension;
    entry["frequency_collision"] = f.frequency_collision;
    entry["seconds"] = f.seconds;
    parts.push_back(std::move(entry));
  }
  json report{
      {"initial_state", to_json(result.deltas.front())},
      {"partitions", std::move(parts)},
      {"random_walk_covariance", to_json(result.q.q)},
      {"theta",
       {{"mean", to_json(result.theta.mean)},
        {"walk_std", to_json(result.theta.walk_std)},
        {"hyper_std", to_json(result.theta.hyper_std)},
        {"predictive_std", to_json(result.theta.predictive_std)}}},
      {"diagnostics",
       {{"all_converged", result.all_converged()},
        {"frequency_collision", result.frequency_collision()},
        {"seconds", result.seconds},
        {"partition_size", config.partitions.size},
        {"density_convention",
         config.kernel.convention == DensityConvention::eigenvalue_floor ? "eigenvalue_floor" : "pseudo_inverse"},
        {"truncation", config.kernel.truncation}}},
  };
  if (result.prediction) {
    report["prediction"] = {{"samples", result.prediction->samples.size()},
                            {"used", result.prediction->used},
                            {"dropped", result.prediction->dropped},
                            {"horizon_samples", result.prediction->grid.count}};
  }
  return report.dump(2);
}

std::string bic_report(const std::vector<BicResult>& scores) {
  json rows = json::array();
  for (const auto& s : scores) {
    rows.push_back({{"modes", s.modes},
                    {"score", s.score},
                    {"log_likelihood", s.log_likelihood},
                    {"parameters", s.parameters},
                    {"samples", s.samples},
                    {"omega", to_json(s.delta.phi.omega)},
                    {"converged", s.converged}});
  }
  return json{{"convention", "score = log L - 0.5 * N_delta * log(n * N_o * N_D), larger is better"},
              {"scores", std::move(rows)}}
      .dump(2);
}

}  // namespace strucgp
