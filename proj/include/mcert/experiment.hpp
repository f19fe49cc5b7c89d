#ifndef MCERT_EXPERIMENT_HPP
#define MCERT_EXPERIMENT_HPP

#include "mcert/concentration.hpp"
#include "mcert/constants.hpp"
#include "mcert/coupling.hpp"
#include "mcert/models.hpp"
#include "mcert/samplers.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcert {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;
inline constexpr const char *result_schema_tag = "mcert.experiment-result/1";

struct FamilySpec {
  std::string family;
  std::map<std::string, double> params;
};

struct ModelConfig {
  FamilySpec target{"gaussian", {{"center", 1.0}, {"variance", 0.5}}};
  FamilySpec proposal{"gaussian", {{"scale", 1.0}, {"decay_alpha", 1.0}}};
  FamilySpec lyapunov{"exp_abs", {{"s", 0.4}}};
  /// x1 of the tail condition; also the regenerative drift threshold.
  double tail_threshold{2.0};
};

struct ExperimentSettings {
  std::string kind{"fig2"};
  std::string chain{"regen"};
  std::uint64_t n{2000};
  std::uint64_t reps{1000};
  std::uint64_t seed{1};
  /// Inner-step / proposal budget of the three-sampler comparison; n when absent.
  std::optional<std::uint64_t> budget;
  double x_dev{2.0};
  std::optional<double> y_tune;
  double lambda{0.01};
  double d{1.7};
  std::uint64_t horizon{200};
  std::string aggregation{"mean"};
  double alpha{0.01};
  double a{0.1};
  std::string variant{"eq4"};
  std::string off_set_moves{"independent"};
};

struct OutputSettings {
  std::string path;
  std::string format{"json"};
};

struct ExperimentConfig {
  int schema_version{config_schema_version};
  ModelConfig model;
  ExperimentSettings experiment;
  OutputSettings output;
};

/// Parses and validates; ConfigError messages name the failing field.
ExperimentConfig config_from_json(const json &j);
json to_json(const ExperimentConfig &c);
ExperimentConfig load_config(const std::string &path);
/// Re-runs the load-time checks on an in-memory config.
void validate(const ExperimentConfig &c);

UnnormalizedTarget build_target(const ModelConfig &m);
SymmetricProposal build_proposal(const ModelConfig &m);
LyapunovFunction build_lyapunov(const ModelConfig &m);

json to_json(const DriftCertificate &c);

/// Certificate used for intervals on the configured chain: the regenerative
/// certificate at the R minimizing K, or the AR(1) small-set certificate at
/// experiment.d. `eq_v2` is the matching second-moment factor.
struct ChainCertificate {
  DriftCertificate certificate;
  double eq_v2;
};
ChainCertificate certificate_for_chain(const ExperimentConfig &c, ChainKind kind);

struct ReplicationRecord {
  std::string group;
  std::uint64_t rep{0};
  double estimate{0.0};
  std::uint64_t n{0};
  std::uint64_t inner_steps{0};
  double accepted_fraction{0.0};
};

struct GroupSummary {
  std::string group;
  std::uint64_t count{0};
  double mean{0.0};
  double se{0.0}; ///< standard error of the replication mean
  double median{0.0};
  double q05{0.0}, q25{0.0}, q50{0.0}, q75{0.0}, q95{0.0};
  double iqr{0.0};
  double mean_accepted_fraction{0.0};
};

struct ExperimentResult {
  std::string schema{result_schema_tag};
  std::string experiment;
  json config_echo;
  std::vector<ReplicationRecord> records;
  std::vector<GroupSummary> summary;
  /// Experiment-specific diagnostics.
  json diagnostics = json::object();
};

/// Per-group summaries in first-appearance order of the groups.
std::vector<GroupSummary> summarize(const std::vector<ReplicationRecord> &records);
json to_json(const ExperimentResult &r);
/// CSV of the per-replication records.
std::string records_csv(const ExperimentResult &r);

/// Regenerative (inner-step budget), rejection (same proposal budget,
/// optimal envelope) and RWM (budget steps from 0), reps replications each.
/// Stream ids: regen i, rejection reps + i, RWM 2 reps + i.
ExperimentResult run_three_sampler_experiment(const ExperimentConfig &c);

struct ConstantsRow {
  std::string family; ///< "toy" or "regen"
  double param;       ///< d for toy, R for regen
  double R;
  double beta_bar;
  double c;
  double K_eq4;
  double K_sec4;
  bool valid;
  std::string note;
};

struct ConstantsTable {
  std::vector<ConstantsRow> rows;
  ConstantsRow toy_optimum;
  ConstantsRow regen_optimum_eq4;
  ConstantsRow regen_optimum_sec4;
};

/// Toy sweep over d in [1, 40] and regenerative sweep over R in [1, 1e5]
/// with invalid rows flagged, plus optimum rows from optimize_K_over_R.
ConstantsTable constants_table(const ExperimentConfig &c);
json to_json(const ConstantsTable &t);
std::string to_csv(const ConstantsTable &t);

/// Mean-vs-median aggregation: each aggregate draws m_median chains of
/// length n; the mean aggregate uses the first m_mean of them, the median
/// aggregate all of them, and the matched-budget pair both use m_median.
/// reps is the number of aggregates.
ExperimentResult replication_study(const ExperimentConfig &c);

} // namespace mcert

#endif
