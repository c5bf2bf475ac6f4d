#include "noisyerm/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace noisyerm {

Table& Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("Table: row width does not match the header");
  rows.push_back(std::move(row));
  return *this;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string fmt(double x) { return format_double(x); }
template <typename Int>
std::string fmt_int(Int x) {
  return std::to_string(x);
}
std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_status(FitStatus s) { return std::string(to_string(s)); }

std::string csv_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_cell(cells[i]);
    }
    out += '\n';
  };
  line(table.columns);
  for (const auto& row : table.rows) line(row);
  return out;
}

Table results_table(const ExperimentResult& r) {
  Table t{{"n", "rho", "trial", "status", "risk_corrupted_fit", "risk_se", "risk_clean_fit_if_rho0", "w_norm",
           "seed_used", "flagged"},
          {}};
  for (const TrialResult& row : r.trials)
    t.add({fmt_int(row.n), fmt(row.rho), fmt_int(row.trial_index), fmt_status(row.status), fmt(row.risk_corrupted_fit),
           fmt(row.risk_se), row.risk_clean_fit_if_rho0 ? fmt(*row.risk_clean_fit_if_rho0) : "", fmt(row.w_norm),
           fmt_int(row.seed_used), fmt_bool(row.flagged)});
  return t;
}

Table summary_table(const ExperimentResult& r) {
  Table t{{"n", "rho", "mean_risk", "se", "diverged_count"}, {}};
  for (const CellSummary& c : r.summary)
    t.add({fmt_int(c.n), fmt(c.rho), fmt(c.mean_risk), fmt(c.se), fmt_int(c.diverged_count)});
  return t;
}

Table population_table(const ExperimentResult& r) {
  Table t{{"rho", "status", "risk", "risk_se", "w_norm"}, {}};
  for (const PopulationPoint& p : r.population)
    t.add({fmt(p.rho), fmt_status(p.status), fmt(p.risk), fmt(p.risk_se), fmt(p.w_norm)});
  return t;
}

Table risk_table(const std::vector<RiskEstimate>& risks, const std::vector<double>& w_norms,
                 const std::vector<double>& rhos) {
  if (risks.size() != w_norms.size() || risks.size() != rhos.size())
    throw std::invalid_argument("risk_table: column lengths differ");
  Table t{{"kind", "value", "std_error", "n_samples", "w_norm", "rho"}, {}};
  for (std::size_t i = 0; i < risks.size(); ++i)
    t.add({std::string(to_string(risks[i].kind)), fmt(risks[i].value), fmt(risks[i].std_error),
           fmt_int(risks[i].n_samples), fmt(w_norms[i]), fmt(rhos[i])});
  return t;
}

Table fit_table(const std::vector<std::string>& labels, const std::vector<FitResult>& fits) {
  if (labels.size() != fits.size()) throw std::invalid_argument("fit_table: column lengths differ");
  Table t{{"label", "status", "w_norm", "objective", "grad_norm", "iters"}, {}};
  for (std::size_t i = 0; i < fits.size(); ++i)
    t.add({labels[i], fmt_status(fits[i].status), fmt(fits[i].w.norm()), fmt(fits[i].objective),
           fmt(fits[i].grad_norm), fmt_int(fits[i].iters)});
  return t;
}

nlohmann::json fit_json(const FitResult& fit) {
  return {{"status", to_string(fit.status)},
          {"w_norm", fit.w.norm()},
          {"objective", fit.objective},
          {"grad_norm", fit.grad_norm},
          {"iters", fit.iters},
          {"w", std::vector<double>(fit.w.data(), fit.w.data() + fit.w.size())}};
}

Table identity_table(const IdentityReport& r) {
  Table t{{"rho", "resampled_mean", "resampled_se", "predicted", "z_score", "within_4se"}, {}};
  for (const IdentityRow& row : r.rows)
    t.add({fmt(row.rho), fmt(row.resampled_mean), fmt(row.resampled_se), fmt(row.predicted), fmt(row.z_score),
           fmt_bool(row.within_4se)});
  return t;
}

Table sandwich_table(const SandwichReport& r) {
  Table t{{"norm", "direction", "estimate", "std_error", "lower", "upper", "violated"}, {}};
  for (const SandwichPoint& p : r.samples)
    t.add({fmt(p.norm), fmt_int(p.direction), fmt(p.estimate), fmt(p.std_error), fmt(p.lower), fmt(p.upper),
           fmt_bool(p.violated)});
  return t;
}

Table shrinkage_table(const ShrinkageReport& r) {
  Table t{{"rho", "status", "w_norm", "scaled_norm"}, {}};
  for (const ShrinkageRow& row : r.rows)
    t.add({fmt(row.rho), fmt_status(row.status), fmt(row.w_norm), fmt(row.scaled_norm)});
  return t;
}

Table risk_gap_table(const RiskGapReport& r) {
  Table t{{"rho", "status", "risk", "risk_se", "gap", "gap_se", "gap_over_sqrt_rho"}, {}};
  for (const RiskGapRow& row : r.rows)
    t.add({fmt(row.rho), fmt_status(row.status), fmt(row.risk), fmt(row.risk_se), fmt(row.gap), fmt(row.gap_se),
           fmt(row.gap_over_sqrt_rho)});
  return t;
}

Table sweep_table(const SweepReport& r) {
  Table t{{"n", "rho", "trials", "mean_excess", "se", "diverged_count"}, {}};
  for (const SweepCell& c : r.cells)
    t.add({fmt_int(c.n), fmt(c.rho), fmt_int(c.trials), fmt(c.mean_excess), fmt(c.se), fmt_int(c.diverged_count)});
  return t;
}

Table sweep_best_table(const SweepReport& r) {
  Table t{{"n", "best_rho", "bound_rho", "small_rho_competitive"}, {}};
  for (std::size_t i = 0; i < r.n_grid.size(); ++i)
    t.add({fmt_int(r.n_grid[i]), fmt(r.best_rho[i]), fmt(r.bound_rho[i]), fmt_bool(r.small_rho_competitive[i])});
  return t;
}

Table conc_table(const std::vector<ConcentrationReport>& reports) {
  Table t{{"quantity", "n", "trial", "estimate"}, {}};
  for (const ConcentrationReport& r : reports)
    for (Index i = 0; i < r.estimates.rows(); ++i)
      for (Index j = 0; j < r.estimates.cols(); ++j)
        t.add({std::string(to_string(r.quantity)), fmt_int(r.n_grid[static_cast<std::size_t>(i)]), fmt_int(j),
               fmt(r.estimates(i, j))});
  return t;
}

Table conc_summary_table(const std::vector<ConcentrationReport>& reports) {
  Table t{{"quantity", "n", "mean", "se", "trend_slope"}, {}};
  for (const ConcentrationReport& r : reports)
    for (std::size_t i = 0; i < r.n_grid.size(); ++i)
      t.add({std::string(to_string(r.quantity)), fmt_int(r.n_grid[i]), fmt(r.mean[i]), fmt(r.se[i]),
             fmt(r.trend_slope)});
  return t;
}

Table feature_certificate_table(const FeatureCertificate& c) {
  Table t{{"a0", "a1", "a2", "feasible", "max_relative_se", "decay_log_slope", "directions", "mc_samples", "message"},
          {}};
  t.add({fmt(c.constants.a0), fmt(c.constants.a1), fmt(c.constants.a2), fmt_bool(c.feasible), fmt(c.max_relative_se),
         fmt(c.decay_log_slope), fmt_int(c.directions), fmt_int(c.mc_samples), c.message});
  return t;
}

Table loss_certificate_table(const std::vector<CertificateReport>& reports) {
  Table t{{"loss", "check", "passed", "worst_margin", "worst_t"}, {}};
  for (const CertificateReport& r : reports)
    for (const InequalityCheck& c : r.checks)
      t.add({r.loss, c.name, fmt_bool(c.passed), fmt(c.worst_margin), fmt(c.worst_t)});
  return t;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kPanelW = 480, kPanelH = 360;
constexpr double kLeft = 72, kRight = 16, kTop = 40, kBottom = 56;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x, double step) {
  const int digits = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(double pad_fraction) {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi == lo) {
      const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
    const double pad = pad_fraction * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

void render_panel(std::ostringstream& svg, const Panel& panel, double x0) {
  Range xr, yr;
  for (const Series& s : panel.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      yr.include(s.y[i] - e);
      yr.include(s.y[i] + e);
    }
  xr.finish(0.03);
  yr.finish(0.06);

  const double pw = kPanelW - kLeft - kRight, ph = kPanelH - kTop - kBottom;
  auto px = [&](double x) { return x0 + kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  svg << "<g>\n";
  svg << "<text x=\"" << num(x0 + kPanelW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(panel.title) << "</text>\n";
  svg << "<rect x=\"" << num(x0 + kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
      << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";

  const double xs = nice_step(xr.hi - xr.lo), ys = nice_step(yr.hi - yr.lo);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-12; t += xs) {
    svg << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t)) << "\" y2=\""
        << num(kTop + ph + 5) << "\" stroke=\"#333\"/>";
    svg << "<text x=\"" << num(px(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
        << tick_label(std::abs(t) < 1e-12 ? 0.0 : t, xs) << "</text>\n";
  }
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-12; t += ys) {
    svg << "<line x1=\"" << num(x0 + kLeft - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(x0 + kLeft)
        << "\" y2=\"" << num(py(t)) << "\" stroke=\"#333\"/>";
    svg << "<text x=\"" << num(x0 + kLeft - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << tick_label(std::abs(t) < 1e-12 ? 0.0 : t, ys) << "</text>\n";
  }
  svg << "<text x=\"" << num(x0 + kLeft + pw / 2) << "\" y=\"" << num(kPanelH - 14)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(panel.x_label) << "</text>\n";
  const double ylx = x0 + 18, yly = kTop + ph / 2;
  svg << "<text x=\"" << num(ylx) << "\" y=\"" << num(yly) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
      << num(ylx) << ' ' << num(yly) << ")\">" << escape(panel.y_label) << "</text>\n";

  for (const Series& s : panel.series) {
    if (s.line && s.x.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
          << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) svg << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      svg << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size() && i < s.err.size(); ++i) {
      const double x = px(s.x[i]), lo = py(s.y[i] - s.err[i]), hi = py(s.y[i] + s.err[i]);
      svg << "<path d=\"M" << num(x) << ' ' << num(lo) << "V" << num(hi) << "M" << num(x - 3) << ' ' << num(lo) << "H"
          << num(x + 3) << "M" << num(x - 3) << ' ' << num(hi) << "H" << num(x + 3) << "\" stroke=\"" << s.color
          << "\" fill=\"none\"/>\n";
    }
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
  }

  double ly = kTop + 14;
  for (const Series& s : panel.series) {
    const double lx = x0 + kLeft + 10;
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 18) << "\" y2=\"" << num(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"4 3\"" : "")
        << "/>";
    svg << "<text x=\"" << num(lx + 24) << "\" y=\"" << num(ly) << "\" font-size=\"11\">" << escape(s.label)
        << "</text>\n";
    ly += 15;
  }
  svg << "</g>\n";
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<Panel>& panels) {
  std::ostringstream svg;
  const double width = kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(kPanelH)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(kPanelH) << "\" font-family=\"sans-serif\">\n";
  svg << "<title>" << escape(title) << "</title>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) render_panel(svg, panels[i], kPanelW * static_cast<double>(i));
  svg << "</svg>\n";
  return svg.str();
}

std::string figure1_svg(const ExperimentResult& r) {
  std::vector<Panel> panels;
  const PopulationPoint* star = nullptr;
  Series pop{"population minimizer of the penalized risk", {}, {}, {}, "#2ca02c", true, false, false};
  for (const PopulationPoint& p : r.population) {
    if (p.rho == 0.0) star = &p;
    if (p.rho > 0.0) {
      pop.x.push_back(p.rho);
      pop.y.push_back(p.risk);
    }
  }
  double rho_lo = r.config.rho_grid.front(), rho_hi = r.config.rho_grid.back();
  for (double rho : r.config.rho_grid) {
    rho_lo = std::min(rho_lo, rho);
    rho_hi = std::max(rho_hi, rho);
  }

  for (Index n : r.config.n_values) {
    Panel panel{"n = " + std::to_string(n), "corruption level ρ", "test risk", {}};
    Series clean{"clean ERM (ρ = 0), mean ± SE", {}, {}, {}, "#d62728", false, true, false};
    Series noisy{"corrupted-label ERM, mean ± SE", {}, {}, {}, "#1f77b4", true, true, false};
    for (const CellSummary& c : r.summary) {
      if (c.n != n) continue;
      Series& s = c.rho == 0.0 ? clean : noisy;
      s.x.push_back(c.rho);
      s.y.push_back(c.mean_risk);
      s.err.push_back(c.se);
    }
    if (!noisy.x.empty()) panel.series.push_back(noisy);
    if (!clean.x.empty()) panel.series.push_back(clean);
    if (star)
      panel.series.push_back(Series{"population minimizer (ρ = 0)", {rho_lo, rho_hi}, {star->risk, star->risk}, {},
                                    "#7f7f7f", true, false, true});
    if (!pop.x.empty()) panel.series.push_back(pop);
    panels.push_back(std::move(panel));
  }
  return render_svg("Test risk against the corruption level", panels);
}

std::string sweep_svg(const SweepReport& r) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  Panel panel{"excess risk over the infimum proxy", "corruption level ρ", "mean excess risk", {}};
  for (std::size_t i = 0; i < r.n_grid.size(); ++i) {
    Series s{"n = " + std::to_string(r.n_grid[i]), {}, {}, {}, kColors[i % 6], true, true, false};
    for (const SweepCell& c : r.cells) {
      if (c.n != r.n_grid[i]) continue;
      s.x.push_back(c.rho);
      s.y.push_back(c.mean_excess);
      s.err.push_back(c.se);
    }
    panel.series.push_back(std::move(s));
  }
  return render_svg("Excess risk against the corruption level", {panel});
}

// ---------------------------------------------------------------------------

void ReportSet::add_table(std::string name, const Table& table) {
  files.push_back(OutputFile{std::move(name), to_csv(table), table.empty()});
}

void ReportSet::add_text(std::string name, std::string content) {
  files.push_back(OutputFile{std::move(name), std::move(content), false});
}

std::vector<std::string> ReportSet::names() const {
  std::vector<std::string> out;
  for (const OutputFile& f : files) out.push_back(f.name);
  return out;
}

void emit_reports(const ReportSet& reports, const std::filesystem::path& out_dir) {
  if (reports.files.empty()) throw EmptyTableError("no reports to write");
  for (const OutputFile& f : reports.files)
    if (f.empty_table) throw EmptyTableError("table '" + f.name + "' is empty");
  std::filesystem::create_directories(out_dir);

  // Stage every file first so a failure leaves no partial set behind.
  std::vector<std::filesystem::path> staged;
  try {
    for (const OutputFile& f : reports.files) {
      const std::filesystem::path tmp = out_dir / ("." + f.name + ".tmp");
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write to " + out_dir.string());
      staged.push_back(tmp);
      out << f.content;
      out.close();
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : staged) std::filesystem::remove(p, ec);
    throw;
  }
  for (std::size_t i = 0; i < staged.size(); ++i)
    std::filesystem::rename(staged[i], out_dir / reports.files[i].name);
}

}  // namespace noisyerm
