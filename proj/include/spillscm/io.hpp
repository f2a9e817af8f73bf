#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spillscm/effects.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/pipeline.hpp"
#include "spillscm/simulate.hpp"

namespace spillscm {

using json = nlohmann::ordered_json;

/// Every artifact carries this string so readers can detect format drift.
inline constexpr const char* kSchema = "spillscm/1";

// ---------------------------------------------------------------------------
// Posterior draws
// ---------------------------------------------------------------------------

struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  int require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw DataError("table lacks column '" + name + "'");
    return c;
  }
};

inline NumericTable read_numeric_table(std::istream& in) {
  NumericTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file is empty");
  for (auto& h : csv::split_record(line)) t.header.push_back(csv::trim(h));
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != t.header.size()) throw DataError("CSV row has wrong width");
    std::vector<double> row;
    for (const auto& f : fields) {
      const auto v = csv::parse_double(f);
      row.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_weights_posterior(std::ostream& out, const WeightsPosterior& post,
                                    const std::vector<std::string>& control_labels) {
  out << "draw";
  for (const auto& l : control_labels) out << ',' << csv::quote("alpha_" + l);
  out << ",sigma1_sq\n";
  for (int m = 0; m < post.draws(); ++m) {
    out << m;
    for (Eigen::Index i = 0; i < post.alpha.cols(); ++i)
      out << ',' << csv::format_exact(post.alpha(m, i));
    out << ',' << csv::format_exact(post.sigma1_sq[m]) << '\n';
  }
}

inline WeightsPosterior read_weights_posterior(std::istream& in) {
  const NumericTable t = read_numeric_table(in);
  std::vector<int> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].rfind("alpha_", 0) == 0) cols.push_back(static_cast<int>(c));
  const int sigma = t.require("sigma1_sq");
  WeightsPosterior p;
  p.alpha.resize(t.rows.size(), cols.size());
  p.sigma1_sq.resize(t.rows.size());
  for (std::size_t m = 0; m < t.rows.size(); ++m) {
    for (std::size_t i = 0; i < cols.size(); ++i) p.alpha(m, i) = t.rows[m][cols[i]];
    p.sigma1_sq[m] = t.rows[m][sigma];
  }
  return p;
}

inline void write_sar_posterior(std::ostream& out, const SarPosterior& post,
                                const std::vector<std::string>& covariate_names) {
  out << "draw,rho";
  for (const auto& n : covariate_names) out << ',' << csv::quote("beta_" + n);
  out << ",sigma2_sq,phi_gamma,sigma_gamma_sq,sigma_eta_sq\n";
  for (int m = 0; m < post.draws(); ++m) {
    out << m << ',' << csv::format_exact(post.rho[m]);
    for (Eigen::Index j = 0; j < post.beta.cols(); ++j)
      out << ',' << csv::format_exact(post.beta(m, j));
    out << ',' << csv::format_exact(post.sigma2_sq[m]) << ','
        << csv::format_exact(post.phi_gamma[m]) << ','
        << csv::format_exact(post.sigma_gamma_sq[m]) << ','
        << csv::format_exact(post.sigma_eta_sq[m]) << '\n';
  }
}

inline SarPosterior read_sar_posterior(std::istream& in) {
  const NumericTable t = read_numeric_table(in);
  std::vector<int> beta_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].rfind("beta_", 0) == 0) beta_cols.push_back(static_cast<int>(c));
  const int rho = t.require("rho");
  const int s2 = t.require("sigma2_sq");
  const int phi = t.require("phi_gamma");
  const int sg = t.require("sigma_gamma_sq");
  const int se = t.require("sigma_eta_sq");
  const auto m = static_cast<Eigen::Index>(t.rows.size());
  SarPosterior p;
  p.rho.resize(m);
  p.beta.resize(m, beta_cols.size());
  p.sigma2_sq.resize(m);
  p.phi_gamma.resize(m);
  p.sigma_gamma_sq.resize(m);
  p.sigma_eta_sq.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = t.rows[r];
    p.rho[r] = row[rho];
    for (std::size_t j = 0; j < beta_cols.size(); ++j) p.beta(r, j) = row[beta_cols[j]];
    p.sigma2_sq[r] = row[s2];
    p.phi_gamma[r] = row[phi];
    p.sigma_gamma_sq[r] = row[sg];
    p.sigma_eta_sq[r] = row[se];
  }
  return p;
}

inline json sar_diagnostics_json(const SarPosterior& post) {
  return json{{"schema", kSchema},
              {"draws", post.draws()},
              {"accepted", post.accepted},
              {"proposed", post.proposed},
              {"acceptance_rate", post.acceptance_rate()},
              {"metropolis_scale", post.metropolis_scale},
              {"rho_mean", post.draws() > 0 ? post.rho.mean() : 0.0}};
}

// ---------------------------------------------------------------------------
// Effects
// ---------------------------------------------------------------------------

/// Long format: draw, period, unit, effect. Masked periods are left out.
inline void write_effect_draws(std::ostream& out, const EffectDraws& d, const PanelData& panel) {
  out << "draw,period,unit,effect\n";
  for (int m = 0; m < d.draws(); ++m) {
    for (int j = 0; j < d.n_post(); ++j) {
      if (!d.computable[j]) continue;
      const std::string period = csv::quote(panel.time_labels[d.periods[j]]);
      out << d.kept[m] << ',' << period << ',' << csv::quote(panel.unit_labels[0]) << ','
          << csv::format_exact(d.treatment(m, j)) << '\n';
      for (int i = 0; i < d.n_controls(); ++i) {
        out << d.kept[m] << ',' << period << ',' << csv::quote(panel.unit_labels[i + 1]) << ','
            << csv::format_exact(d.spillover[j](m, i)) << '\n';
      }
    }
  }
}

namespace detail {

inline json interval_json(const std::string& unit, const std::string& period, const char* kind,
                          const std::optional<Interval>& iv) {
  json j{{"unit", unit}, {"period", period}, {"effect", kind}};
  if (iv) {
    j["mean"] = iv->mean;
    j["lower"] = iv->lower;
    j["upper"] = iv->upper;
    j["computable"] = true;
  } else {
    j["mean"] = nullptr;
    j["lower"] = nullptr;
    j["upper"] = nullptr;
    j["computable"] = false;
  }
  return j;
}

}  // namespace detail

inline json summary_json(const EffectSummary& s, const PanelData& panel) {
  json effects = json::array();
  for (int j = 0; j < s.n_post(); ++j) {
    const std::string period = panel.time_labels[s.periods[j]];
    effects.push_back(detail::interval_json(panel.unit_labels[0], period, "treatment", s.treatment[j]));
    for (std::size_t i = 0; i < s.spillover[j].size(); ++i) {
      effects.push_back(
          detail::interval_json(panel.unit_labels[i + 1], period, "spillover", s.spillover[j][i]));
    }
  }
  json losses = json::array();
  for (Eigen::Index i = 0; i < s.cumulative_loss_pct.size(); ++i) {
    losses.push_back({{"unit", panel.unit_labels[i]}, {"cumulative_loss_pct", s.cumulative_loss_pct[i]}});
  }
  return json{{"schema", kSchema},     {"level", s.level},       {"draws", s.draws},
              {"excluded_draws", s.excluded}, {"effects", effects}, {"cumulative_loss", losses}};
}

/// unit, period, effect, mean, lower, upper, status ("ok" or "masked").
inline void write_summary_csv(std::ostream& out, const EffectSummary& s, const PanelData& panel) {
  out << "unit,period,effect,mean,lower,upper,status\n";
  auto row = [&](const std::string& unit, const std::string& period, const char* kind,
                 const std::optional<Interval>& iv) {
    out << csv::quote(unit) << ',' << csv::quote(period) << ',' << kind << ',';
    if (iv) {
      out << csv::format_exact(iv->mean) << ',' << csv::format_exact(iv->lower) << ','
          << csv::format_exact(iv->upper) << ",ok\n";
    } else {
      out << "NA,NA,NA,masked\n";
    }
  };
  for (int j = 0; j < s.n_post(); ++j) {
    const std::string& period = panel.time_labels[s.periods[j]];
    row(panel.unit_labels[0], period, "treatment", s.treatment[j]);
    for (std::size_t i = 0; i < s.spillover[j].size(); ++i)
      row(panel.unit_labels[i + 1], period, "spillover", s.spillover[j][i]);
  }
}

/// Figure data: observed and synthetic (no-treatment) paths for every unit
/// and period, with effect bands after treatment. Before treatment the
/// treated unit's synthetic path is the posterior-mean weighted sum of the
/// controls and a control's synthetic path is its observed one.
inline void write_plot_bundle(std::ostream& out, const EffectSummary& s, const PanelData& panel,
                              const VectorXd& alpha_mean) {
  out << "unit,period,phase,observed,synthetic,synthetic_lower,synthetic_upper,effect,"
         "effect_lower,effect_upper\n";
  const auto fmt = [](double v) { return std::isfinite(v) ? csv::format_exact(v) : std::string("NA"); };
  for (int i = 0; i <= panel.n_controls(); ++i) {
    for (int t = 0; t < panel.n_periods(); ++t) {
      const double y = panel.outcomes(i, t);
      out << csv::quote(panel.unit_labels[i]) << ',' << csv::quote(panel.time_labels[t]) << ',';
      if (t < panel.t0) {
        const double synth = i == 0 ? alpha_mean.dot(panel.controls(t)) : y;
        out << "pre," << fmt(y) << ',' << fmt(synth) << ",NA,NA,NA,NA,NA\n";
        continue;
      }
      const int j = t - panel.t0;
      const std::optional<Interval>& iv = i == 0 ? s.treatment[j] : s.spillover[j][i - 1];
      if (!iv) {
        out << "post," << fmt(y) << ",NA,NA,NA,NA,NA,NA\n";
        continue;
      }
      out << "post," << fmt(y) << ',' << fmt(y - iv->mean) << ',' << fmt(y - iv->upper) << ','
          << fmt(y - iv->lower) << ',' << fmt(iv->mean) << ',' << fmt(iv->lower) << ','
          << fmt(iv->upper) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo reports
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& metrics_csv_columns() {
  static const std::vector<std::string> cols = {
      "n_controls", "t_total", "t0", "rho", "method", "bias", "rmse", "coverage",
      "replications", "failures"};
  return cols;
}

namespace detail {

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string rho_label(double rho) { return fixed(rho, 2); }

}  // namespace detail

/// Long format, one row per (scenario, method). Runtime is deliberately
/// absent so identical seeds give identical bytes.
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  const auto& cols = metrics_csv_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  for (const auto& r : reports) {
    for (const auto& m : r.methods) {
      out << r.scenario.n_controls << ',' << r.scenario.t_total << ',' << r.scenario.t0 << ','
          << detail::rho_label(r.scenario.rho) << ',' << m.method << ','
          << csv::format_exact(m.bias) << ',' << csv::format_exact(m.rmse) << ',';
      if (m.method == "proposed" && r.has_coverage) out << csv::format_exact(r.coverage);
      else out << "NA";
      out << ',' << r.replications << ',' << r.failures << '\n';
    }
  }
}

/// Wide table: one row per rho, one column per (N, T0, method), holding the
/// bias (panel a) or the RMSE (panel b), rounded to three decimals.
inline void write_table1(std::ostream& out, const std::vector<MetricsReport>& reports, bool rmse) {
  std::vector<std::string> columns;
  std::vector<double> rhos;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& r : reports) {
    const std::string rho = detail::rho_label(r.scenario.rho);
    if (std::find(rhos.begin(), rhos.end(), r.scenario.rho) == rhos.end()) rhos.push_back(r.scenario.rho);
    for (const auto& m : r.methods) {
      const std::string col = "N" + std::to_string(r.scenario.n_controls) + "_T0" +
                              std::to_string(r.scenario.t0) + "_" + m.method;
      if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
      cells[{rho, col}] = rmse ? m.rmse : m.bias;
    }
  }
  std::sort(rhos.begin(), rhos.end());
  out << "rho";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (double rv : rhos) {
    const std::string rho = detail::rho_label(rv);
    out << rho;
    for (const auto& c : columns) {
      const auto it = cells.find({rho, c});
      out << ',' << (it == cells.end() ? std::string("NA") : detail::fixed(it->second, 3));
    }
    out << '\n';
  }
}

/// Coverage of the proposed method's 95% intervals, one row per rho and one
/// column per (N, T0).
inline void write_table2(std::ostream& out, const std::vector<MetricsReport>& reports) {
  std::vector<std::string> columns;
  std::vector<double> rhos;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& r : reports) {
    if (!r.has_coverage) continue;
    const std::string rho = detail::rho_label(r.scenario.rho);
    if (std::find(rhos.begin(), rhos.end(), r.scenario.rho) == rhos.end()) rhos.push_back(r.scenario.rho);
    const std::string col =
        "N" + std::to_string(r.scenario.n_controls) + "_T0" + std::to_string(r.scenario.t0);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    cells[{rho, col}] = r.coverage;
  }
  std::sort(rhos.begin(), rhos.end());
  out << "rho";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (double rv : rhos) {
    const std::string rho = detail::rho_label(rv);
    out << rho;
    for (const auto& c : columns) {
      const auto it = cells.find({rho, c});
      out << ',' << (it == cells.end() ? std::string("NA") : detail::fixed(it->second, 3));
    }
    out << '\n';
  }
}

/// Everything in the CSV plus Monte Carlo standard errors, acceptance rates,
/// failures and runtime.
inline json metrics_json(const std::vector<MetricsReport>& reports) {
  json arr = json::array();
  double runtime = 0.0;
  for (const auto& r : reports) {
    json methods = json::array();
    for (const auto& m : r.methods) {
      methods.push_back({{"method", m.method},
                         {"bias", m.bias},
                         {"bias_se", m.bias_se},
                         {"rmse", m.rmse},
                         {"rmse_se", m.rmse_se}});
    }
    json entry{{"n_controls", r.scenario.n_controls},
               {"t_total", r.scenario.t_total},
               {"t0", r.scenario.t0},
               {"rho", r.scenario.rho},
               {"beta", r.scenario.beta},
               {"seed", r.scenario.seed},
               {"draws", r.scenario.sampler.chain.iterations},
               {"burn_in", r.scenario.sampler.chain.burn_in},
               {"jacobian", r.scenario.sampler.jacobian == RhoJacobian::spatial ? "spatial"
                                                                                 : "simultaneous"},
               {"replications", r.replications},
               {"failures", r.failures},
               {"failure_messages", r.failure_messages},
               {"methods", methods},
               {"runtime_seconds", r.runtime_seconds}};
    if (r.has_coverage) {
      entry["coverage"] = r.coverage;
      entry["coverage_se"] = r.coverage_se;
      entry["coverage_cells"] = r.coverage_cells;
      entry["mean_acceptance"] = r.mean_acceptance;
      entry["mean_rho"] = r.mean_rho;
    }
    runtime += r.runtime_seconds;
    arr.push_back(std::move(entry));
  }
  return json{{"schema", kSchema}, {"scenarios", arr}, {"total_runtime_seconds", runtime}};
}

}  // namespace spillscm
