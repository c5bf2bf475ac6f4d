#pragma once

#include "noisyerm/experiment.hpp"
#include "noisyerm/losses.hpp"
#include "noisyerm/risk.hpp"
#include "noisyerm/solver.hpp"
#include "noisyerm/theory_checks.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisyerm {

/// Fixed-column table. Cells are preformatted; doubles use %.17g so a CSV
/// round-trips bit-exactly.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  Table& add(std::vector<std::string> row);
  bool empty() const noexcept { return rows.empty(); }
};

std::string format_double(double x);
std::string to_csv(const Table& table);

// Table builders; the column order is part of the output contract.
Table results_table(const ExperimentResult& r);      // n,rho,trial,status,risk_corrupted_fit,risk_se,risk_clean_fit_if_rho0,w_norm,seed_used,flagged
Table summary_table(const ExperimentResult& r);      // n,rho,mean_risk,se,diverged_count
Table population_table(const ExperimentResult& r);   // rho,status,risk,risk_se,w_norm
Table risk_table(const std::vector<RiskEstimate>& risks, const std::vector<double>& w_norms,
                 const std::vector<double>& rhos);   // kind,value,std_error,n_samples,w_norm,rho
Table fit_table(const std::vector<std::string>& labels, const std::vector<FitResult>& fits);  // label,status,w_norm,objective,grad_norm,iters
nlohmann::json fit_json(const FitResult& fit);
Table identity_table(const IdentityReport& r);
Table sandwich_table(const SandwichReport& r);
Table shrinkage_table(const ShrinkageReport& r);
Table risk_gap_table(const RiskGapReport& r);
Table sweep_table(const SweepReport& r);             // n,rho,trials,mean_excess,se,diverged_count
Table sweep_best_table(const SweepReport& r);        // n,best_rho,bound_rho,small_rho_competitive
Table conc_table(const std::vector<ConcentrationReport>& reports);          // quantity,n,trial,estimate
Table conc_summary_table(const std::vector<ConcentrationReport>& reports);  // quantity,n,mean,se,trend_slope
Table feature_certificate_table(const FeatureCertificate& c);
Table loss_certificate_table(const std::vector<CertificateReport>& reports);

// ---------------------------------------------------------------------------
// SVG line charts.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // half-widths of vertical bars; empty for none
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = true;
  bool dashed = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Panels side by side, each with labelled axes, ticks and a legend.
std::string render_svg(const std::string& title, const std::vector<Panel>& panels);

/// Risk against rho, one panel per n: empirical means with SE bars for the
/// clean fit (rho = 0) and corrupted fits, plus the population minimizers.
std::string figure1_svg(const ExperimentResult& r);
/// Mean excess risk against rho, one line per n.
std::string sweep_svg(const SweepReport& r);

// ---------------------------------------------------------------------------

struct EmptyTableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputFile {
  std::string name;
  std::string content;
  bool empty_table = false;
};

struct ReportSet {
  std::vector<OutputFile> files;

  void add_table(std::string name, const Table& table);
  void add_text(std::string name, std::string content);
  std::vector<std::string> names() const;
};

/// Writes every file into out_dir (created if needed). Nothing is written
/// if any table is empty (EmptyTableError); an unwritable directory raises
/// std::filesystem::filesystem_error or std::runtime_error.
void emit_reports(const ReportSet& reports, const std::filesystem::path& out_dir);

}  // namespace noisyerm
