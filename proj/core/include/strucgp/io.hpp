#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strucgp/linear_structure.hpp"
#include "strucgp/order_selection.hpp"
#include "strucgp/sequential_inference.hpp"

namespace strucgp {

/**
 * @brief Writes a series as comma-separated text: a header row, then time and one column per channel.
 *
 * Values are printed with 17 significant digits so that reading them back is lossless.
 */
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);

/// Reads a file written by write_series_csv. Throws ParseError with the offending line.
[[nodiscard]] TimeSeries read_series_csv(const std::filesystem::path& path);

/// Same as read_series_csv on in-memory text; `source` names the input in error messages.
[[nodiscard]] TimeSeries parse_series_csv(const std::string& text, const std::string& source = "input");

/// Predictive mean and standard deviation per channel: time, mean_1, sd_1, mean_2, sd_2, ...
void write_prediction_csv(const std::filesystem::path& path, const PredictiveResult& prediction,
                          const std::vector<std::string>& labels = {});

/// Writes rows of (θ_1, ..., θ_p), one per partition.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows,
                      const std::vector<std::string>& header);

struct ModelConfig {
  Eigen::VectorXd masses;
  Eigen::VectorXd story_stiffness;        ///< nominal stiffness of each story
  std::vector<Index> scaled_stories;      ///< 0-based stories multiplied by θ
  Eigen::VectorXd theta_nominal;
  Eigen::VectorXd theta_true;             ///< used by `simulate`; nominal when unset
  DampingSpec damping = RayleighDamping{};
  std::string input = "base";             ///< "base" (ground acceleration) or "force"
  Index force_dof = 0;
  std::vector<Index> observed_dofs;       ///< all floors when empty
  double dt = 0.0;
};

struct KernelConfig {
  Index modes = 0;  ///< 0 selects the order by BIC
  Index max_modes = 4;
  double truncation = kInferenceTruncation;
  DensityConvention convention = DensityConvention::eigenvalue_floor;
  bool truncate = true;
};

struct PartitionConfig {
  Index size = 0;
  Index count = 0;
};

struct NoiseConfig {
  double rms_fraction = 0.05;
  double excitation_std = 1.0;
  double theta_std = 0.0;  ///< partition-to-partition θ variability of the synthetic truth
  std::uint64_t seed = 1;
};

struct OptimizerConfig {
  int max_evaluations = 4000;
  int starts = 3;
  double f_tolerance = 1e-8;
  double x_tolerance = 1e-6;
  int prediction_samples = 200;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  ModelConfig model;
  KernelConfig kernel;
  PartitionConfig partitions;
  NoiseConfig noise;
  OptimizerConfig optimizer;
  std::filesystem::path output_dir = "out";
  std::filesystem::path input_file;   ///< defaults to output_dir/x.csv
  std::filesystem::path output_file;  ///< defaults to output_dir/y.csv

  [[nodiscard]] std::filesystem::path input_path() const;
  [[nodiscard]] std::filesystem::path output_path() const;
  void validate() const;
};

/// Environment variable that, when set, replaces [output] directory.
inline constexpr const char* kOutputDirEnv = "STRUCGP_OUTPUT_DIR";

/// Reads an INI-style configuration with sections [model] [kernel] [partitions] [noise] [optimizer] [output].
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);

[[nodiscard]] StructuralSystem build_system(const ModelConfig& model);
[[nodiscard]] InferenceOptions inference_options(const ExperimentConfig& config);

/// JSON report of a pipeline run.
[[nodiscard]] std::string pipeline_report(const PipelineResult& result, const ExperimentConfig& config);
[[nodiscard]] std::string bic_report(const std::vector<BicResult>& scores);

}  // namespace strucgp
