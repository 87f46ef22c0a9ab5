#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lass/datagen.hpp"
#include "lass/model.hpp"

namespace lass::metrics {

// Least-squares decomposition of an estimate against L-tap delayed copies of
// the references. All component vectors live in the zero-padded space of
// length n + L - 1, where the delayed-copy Gram matrix is exactly Toeplitz;
// s_target + e_interf + e_artif reproduces the (padded) estimate exactly.
struct Decomposition {
  std::vector<double> s_target;
  std::vector<double> e_interf;
  std::vector<double> e_artif;
  std::vector<double> estimate_padded;
  size_t filter_len = 0;
};

Decomposition bss_decompose(const std::vector<double>& estimate,
                            const std::vector<double>& ref_target,
                            const std::vector<double>& ref_interf, size_t filter_len = 512);

// dB ratios; denominators below 1e-12 * ||s_target||^2 give +infinity.
double sdr(const Decomposition& d);
double sir(const Decomposition& d);
double sar(const Decomposition& d);

// Scale-invariant SDR; both signals are zero-meaned before the projection.
double si_sdr(const std::vector<double>& estimate, const std::vector<double>& reference);

struct MetricValues {
  double sdr = 0.0, sir = 0.0, sar = 0.0, si_sdr = 0.0;
};

struct Aggregate {
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0;
  size_t inf_count = 0;
  size_t count = 0;  // finite values included
};

Aggregate aggregate(const std::vector<double>& values);
double median_of(std::vector<double> values);

struct ExampleResult {
  std::string id;
  MetricValues values;
  bool ok = true;
  std::string error;
};

struct ReportRow {
  std::string name;  // "unprocessed", "model"
  std::vector<ExampleResult> examples;
  Aggregate sdr, sir, sar, si_sdr;
  void recompute_aggregates();
};

struct MetricsReport {
  std::string manifest_path;
  std::string checkpoint_path;
  std::string caption_mode;
  std::vector<ReportRow> rows;

  const ReportRow* row(const std::string& name) const;
};

enum class CaptionMode { Manifest, Heldout, Average };

struct EvalOptions {
  CaptionMode caption_mode = CaptionMode::Manifest;
  bool use_tags = false;  // query with the target's tag multi-hot instead of text
  size_t bss_taps = 512;
  std::string audio_dir;  // directory of manifest-relative WAV paths
};

// Runs the model over every manifest record and reports metrics for both the
// unprocessed mixture and the model estimate. Per-example failures are
// recorded, not fatal. Deterministic given (model, manifest, options).
MetricsReport evaluate_testset(model::LassNet<float>& net,
                               const std::vector<data::MixtureRecord>& manifest,
                               const EvalOptions& opt);

void write_report_json(const std::string& path, const MetricsReport& report);
// Table layout: one row per system, columns SDR, SIR, SAR, SI-SDR; medians
// and means are emitted as separate labeled rows.
std::string report_csv(const MetricsReport& report);

}  // namespace lass::metrics
