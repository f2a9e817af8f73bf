#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spillscm/errors.hpp"

namespace spillscm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

namespace csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

inline bool is_missing_token(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "." ||
         t == "..";
}

inline std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// PanelData
// ---------------------------------------------------------------------------

/// Outcomes for units 0..N over periods 0..T-1. Unit 0 is the only treated
/// unit and is treated in periods t >= t0 (0-based), i.e. after the first
/// t0 pretreatment periods.
struct PanelData {
  MatrixXd outcomes;                  // (N + 1) x T; NaN where missing
  std::vector<MatrixXd> covariates;   // one N x k block per period
  BoolMatrix missing;                 // aligned with outcomes
  int t0 = 0;
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  std::vector<std::string> covariate_names;

  int n_controls() const { return static_cast<int>(outcomes.rows()) - 1; }
  int n_periods() const { return static_cast<int>(outcomes.cols()); }
  int n_post() const { return n_periods() - t0; }
  int n_covariates() const {
    return covariates.empty() ? 0 : static_cast<int>(covariates.front().cols());
  }

  double treated(int t) const { return outcomes(0, t); }
  VectorXd controls(int t) const {
    return outcomes.col(t).tail(n_controls());
  }

  /// True when every unit's outcome is observed at period t.
  bool period_complete(int t) const { return !missing.col(t).any(); }

  void validate() const;
};

/// Pretreatment slices only. Samplers take this type, so they can never
/// touch post-treatment outcomes.
struct PretreatmentData {
  VectorXd treated;                  // T0
  MatrixXd controls;                 // T0 x N, row t is (Y_t^c)'
  std::vector<MatrixXd> covariates;  // T0 blocks of N x k

  int t0() const { return static_cast<int>(treated.size()); }
  int n_controls() const { return static_cast<int>(controls.cols()); }
  int n_covariates() const {
    return covariates.empty() ? 0 : static_cast<int>(covariates.front().cols());
  }
};

inline void PanelData::validate() const {
  const Eigen::Index units = outcomes.rows();
  const Eigen::Index periods = outcomes.cols();
  if (units < 2) throw DataError("panel needs the treated unit and at least one control");
  if (t0 < 1 || t0 >= periods) {
    throw DataError("t0 must satisfy 1 <= t0 < T (got t0=" + std::to_string(t0) +
                    ", T=" + std::to_string(periods) + ")");
  }
  if (missing.rows() != units || missing.cols() != periods) {
    throw DataError("missing mask does not match outcome dimensions");
  }
  if (static_cast<Eigen::Index>(covariates.size()) != periods) {
    throw DataError("covariates must have one block per period");
  }
  for (const auto& block : covariates) {
    if (block.rows() != units - 1 || block.cols() != n_covariates()) {
      throw DataError("covariate block has inconsistent dimensions");
    }
  }
  if (!unit_labels.empty() && static_cast<Eigen::Index>(unit_labels.size()) != units) {
    throw DataError("unit label count does not match outcomes");
  }
  if (!time_labels.empty() && static_cast<Eigen::Index>(time_labels.size()) != periods) {
    throw DataError("time label count does not match outcomes");
  }
  auto unit_name = [&](Eigen::Index i) {
    return unit_labels.empty() ? std::to_string(i) : unit_labels[i];
  };
  auto time_name = [&](Eigen::Index t) {
    return time_labels.empty() ? std::to_string(t) : time_labels[t];
  };
  for (int t = 0; t < t0; ++t) {
    if (missing(0, t)) {
      throw DataError("treated unit outcome missing in pretreatment period " +
                      time_name(t));
    }
    for (Eigen::Index i = 1; i < units; ++i) {
      if (missing(i, t)) {
        throw DataError("control unit " + unit_name(i) +
                        " outcome missing in pretreatment period " + time_name(t));
      }
    }
    if (!covariates[t].allFinite()) {
      throw DataError("covariates missing in pretreatment period " + time_name(t));
    }
  }
}

inline PretreatmentData extract_pretreatment(const PanelData& panel) {
  PretreatmentData pre;
  const int t0 = panel.t0;
  const int n = panel.n_controls();
  pre.treated = panel.outcomes.row(0).head(t0).transpose();
  pre.controls = panel.outcomes.block(1, 0, n, t0).transpose();
  pre.covariates.assign(panel.covariates.begin(), panel.covariates.begin() + t0);
  return pre;
}

/// Column mapping for long-format panel CSVs. When `covariates` is empty,
/// every column not named here is read as a covariate.
struct PanelSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string outcome = "outcome";
  std::string treated = "treated";
  std::vector<std::string> covariates;
};

namespace detail {

inline std::vector<std::string> ordered_times(const std::vector<std::string>& seen) {
  std::vector<std::string> times = seen;
  const bool numeric = std::all_of(times.begin(), times.end(), [](const auto& s) {
    return csv::parse_double(s).has_value();
  });
  if (numeric) {
    std::stable_sort(times.begin(), times.end(), [](const auto& a, const auto& b) {
      return *csv::parse_double(a) < *csv::parse_double(b);
    });
  }
  return times;
}

inline bool truthy(const std::string& s) {
  const std::string t = csv::trim(s);
  if (t == "1" || t == "true" || t == "TRUE" || t == "True" || t == "yes") return true;
  if (t.empty() || t == "0" || t == "false" || t == "FALSE" || t == "False" || t == "no") {
    return false;
  }
  throw DataError("unrecognised treated flag '" + t + "'");
}

}  // namespace detail

/// Reads a long-format panel: one row per (unit, time) with the outcome, a
/// unit-level treated flag and optional covariate columns. Missing outcome
/// cells (empty or NA) are recorded in the mask. A (unit, time) pair with no
/// row counts as missing.
inline PanelData load_panel(std::istream& in, const PanelSchema& schema, int t0) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("panel CSV is empty");
  std::vector<std::string> header = csv::split_record(line);
  for (auto& h : header) h = csv::trim(h);

  auto find_col = [&](const std::string& name, bool required) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError("panel CSV lacks column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int unit_col = find_col(schema.unit, true);
  const int time_col = find_col(schema.time, true);
  const int outcome_col = find_col(schema.outcome, true);
  const int treated_col = find_col(schema.treated, true);

  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
      if (c != unit_col && c != time_col && c != outcome_col && c != treated_col) {
        cov_cols.push_back(c);
        cov_names.push_back(header[c]);
      }
    }
  } else {
    for (const auto& name : schema.covariates) {
      cov_cols.push_back(find_col(name, true));
      cov_names.push_back(name);
    }
  }

  struct Row {
    std::optional<double> outcome;
    std::vector<double> covariates;
  };
  std::vector<std::string> units_seen;
  std::vector<std::string> times_seen;
  std::set<std::string> unit_set, time_set, treated_units;
  std::map<std::pair<std::string, std::string>, Row> rows;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != header.size()) {
      throw DataError("panel CSV line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    const std::string unit = csv::trim(fields[unit_col]);
    const std::string time = csv::trim(fields[time_col]);
    if (unit.empty() || time.empty()) {
      throw DataError("panel CSV line " + std::to_string(line_no) + " lacks unit or time");
    }
    if (unit_set.insert(unit).second) units_seen.push_back(unit);
    if (time_set.insert(time).second) times_seen.push_back(time);
    if (detail::truthy(fields[treated_col])) treated_units.insert(unit);

    Row row;
    if (!csv::is_missing_token(fields[outcome_col])) {
      row.outcome = csv::parse_double(fields[outcome_col]);
      if (!row.outcome) {
        throw DataError("panel CSV line " + std::to_string(line_no) +
                        ": outcome is not a number");
      }
    }
    for (int c : cov_cols) {
      if (csv::is_missing_token(fields[c])) {
        row.covariates.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        const auto v = csv::parse_double(fields[c]);
        if (!v) {
          throw DataError("panel CSV line " + std::to_string(line_no) + ": covariate '" +
                          header[c] + "' is not a number");
        }
        row.covariates.push_back(*v);
      }
    }
    if (!rows.emplace(std::make_pair(unit, time), std::move(row)).second) {
      throw DataError("duplicate row for unit '" + unit + "' at time '" + time + "'");
    }
  }

  if (treated_units.size() != 1) {
    throw DataError("panel must flag exactly one treated unit (found " +
                    std::to_string(treated_units.size()) + ")");
  }

  PanelData panel;
  panel.unit_labels.push_back(*treated_units.begin());
  for (const auto& u : units_seen) {
    if (u != panel.unit_labels.front()) panel.unit_labels.push_back(u);
  }
  panel.time_labels = detail::ordered_times(times_seen);
  panel.covariate_names = cov_names;
  panel.t0 = t0;

  const int units = static_cast<int>(panel.unit_labels.size());
  const int periods = static_cast<int>(panel.time_labels.size());
  const int k = static_cast<int>(cov_cols.size());
  if (t0 < 1 || t0 >= periods) {
    throw ConfigError("t0 must satisfy 1 <= t0 < T (got t0=" + std::to_string(t0) +
                      ", T=" + std::to_string(periods) + ")");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  panel.outcomes = MatrixXd::Constant(units, periods, nan);
  panel.missing = BoolMatrix::Constant(units, periods, true);
  panel.covariates.assign(periods, MatrixXd::Constant(units - 1, k, nan));
  for (int i = 0; i < units; ++i) {
    for (int t = 0; t < periods; ++t) {
      const auto it = rows.find({panel.unit_labels[i], panel.time_labels[t]});
      if (it == rows.end()) continue;
      if (it->second.outcome) {
        panel.outcomes(i, t) = *it->second.outcome;
        panel.missing(i, t) = false;
      }
      if (i > 0) {
        for (int c = 0; c < k; ++c) panel.covariates[t](i - 1, c) = it->second.covariates[c];
      }
    }
  }
  panel.validate();
  return panel;
}

/// Writes the panel in the long format read by load_panel.
inline void save_panel(std::ostream& out, const PanelData& panel) {
  out << "unit,time,treated,outcome";
  for (const auto& name : panel.covariate_names) out << ',' << csv::quote(name);
  out << '\n';
  const int k = panel.n_covariates();
  for (int i = 0; i <= panel.n_controls(); ++i) {
    for (int t = 0; t < panel.n_periods(); ++t) {
      out << csv::quote(panel.unit_labels[i]) << ',' << csv::quote(panel.time_labels[t])
          << ',' << (i == 0 ? 1 : 0) << ','
          << (panel.missing(i, t) ? std::string("NA") : csv::format_exact(panel.outcomes(i, t)));
      for (int c = 0; c < k; ++c) {
        out << ',';
        if (i == 0) {
          out << "NA";
        } else {
          out << csv::format_exact(panel.covariates[t](i - 1, c));
        }
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// SpatialWeights
// ---------------------------------------------------------------------------

/// Row i of the N x (1 + N) block (w | W) holds the weights of control i on
/// the treated unit (w_i) and on the other controls (W_i.).
struct SpatialWeights {
  VectorXd w;
  MatrixXd W;
  bool normalized = false;
  std::vector<int> zero_rows;  // rows of (w | W) with no nonzero entry

  int n_controls() const { return static_cast<int>(w.size()); }

  MatrixXd block() const {
    MatrixXd b(w.size(), W.cols() + 1);
    b.col(0) = w;
    b.rightCols(W.cols()) = W;
    return b;
  }

  static SpatialWeights from_block(const MatrixXd& b) {
    SpatialWeights s;
    s.w = b.col(0);
    s.W = b.rightCols(b.cols() - 1);
    return s;
  }
};

namespace detail {

inline std::vector<int> find_zero_rows(const MatrixXd& block) {
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    if ((block.row(i).array() == 0.0).all()) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

}  // namespace detail

/// Divides each nonzero row of (w | W) by its sum. Zero rows pass through
/// and are listed in zero_rows.
inline SpatialWeights row_normalize(const SpatialWeights& weights) {
  MatrixXd b = weights.block();
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const double s = b.row(i).sum();
    if (s != 0.0) b.row(i) /= s;
  }
  SpatialWeights out = SpatialWeights::from_block(b);
  out.normalized = true;
  out.zero_rows = detail::find_zero_rows(b);
  return out;
}

/// 0/1 adjacency weights. Units are indexed 0..N with 0 the treated unit; an
/// edge (0, j) sets w_j = 1 and an edge (i, j) between controls sets
/// W_ij = W_ji = 1.
inline SpatialWeights build_adjacency_weights(const std::vector<std::pair<int, int>>& edges,
                                              int n_controls) {
  if (n_controls < 1) throw DataError("adjacency weights need at least one control");
  SpatialWeights s;
  s.w = VectorXd::Zero(n_controls);
  s.W = MatrixXd::Zero(n_controls, n_controls);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a > n_controls || b > n_controls) {
      throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                      ") references a unit outside 0.." + std::to_string(n_controls));
    }
    if (a == b) throw DataError("self-loop on unit " + std::to_string(a));
    if (a == 0) {
      s.w[b - 1] = 1.0;
    } else if (b == 0) {
      s.w[a - 1] = 1.0;
    } else {
      s.W(a - 1, b - 1) = 1.0;
      s.W(b - 1, a - 1) = 1.0;
    }
  }
  s.zero_rows = detail::find_zero_rows(s.block());
  return s;
}

/// Trade-share weights w_ij = flow(i, j) / sum_j flow(i, j) for controls i.
/// `trade` is the (N + 1) x (N + 1) matrix of average pairwise flows over
/// the pre-intervention window (the caller's responsibility); its diagonal
/// is ignored.
inline SpatialWeights build_trade_weights(const MatrixXd& trade) {
  if (trade.rows() != trade.cols() || trade.rows() < 2) {
    throw DataError("trade matrix must be square with at least two units");
  }
  if ((trade.array() < 0.0).any()) throw DataError("trade flows must be nonnegative");
  if (!trade.allFinite()) throw DataError("trade flows must be finite");
  const Eigen::Index n = trade.rows() - 1;
  MatrixXd raw = trade.bottomRows(n);
  for (Eigen::Index i = 0; i < n; ++i) raw(i, i + 1) = 0.0;
  return row_normalize(SpatialWeights::from_block(raw));
}

// ---------------------------------------------------------------------------
// Weight file formats
// ---------------------------------------------------------------------------

inline int resolve_unit(const std::string& token, const std::vector<std::string>& labels) {
  const std::string t = csv::trim(token);
  const auto it = std::find(labels.begin(), labels.end(), t);
  if (it != labels.end()) return static_cast<int>(it - labels.begin());
  const auto v = csv::parse_double(t);
  if (v && *v == std::floor(*v)) return static_cast<int>(*v);
  throw DataError("unknown unit '" + t + "' in weights input");
}

/// Edge list: one "i,j" pair per line, by unit label or 0-based index
/// (0 = treated). Blank lines and lines starting with '#' are skipped.
inline std::vector<std::pair<int, int>> read_edge_list(std::istream& in,
                                                       const std::vector<std::string>& labels) {
  std::vector<std::pair<int, int>> edges;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = csv::split_record(t);
    if (fields.size() != 2) throw DataError("edge list line must hold two units: '" + t + "'");
    edges.emplace_back(resolve_unit(fields[0], labels), resolve_unit(fields[1], labels));
  }
  return edges;
}

namespace detail {

/// Square labelled matrix CSV: header row of column labels (first cell is
/// ignored) and one row per label. Reordered to `labels` when given.
inline MatrixXd read_labelled_matrix(std::istream& in, const std::vector<std::string>& labels,
                                     bool square) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("matrix CSV is empty");
  auto header = csv::split_record(line);
  std::vector<std::string> cols(header.begin() + 1, header.end());
  for (auto& c : cols) c = csv::trim(c);
  std::vector<std::string> rows;
  std::vector<std::vector<double>> values;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_record(line);
    if (fields.size() != cols.size() + 1) throw DataError("matrix CSV row has wrong width");
    rows.push_back(csv::trim(fields[0]));
    std::vector<double> r;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto v = csv::parse_double(fields[c]);
      if (!v) throw DataError("matrix CSV entry is not a number: '" + fields[c] + "'");
      r.push_back(*v);
    }
    values.push_back(std::move(r));
  }
  MatrixXd m(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) m(i, j) = values[i][j];
  if (square && m.rows() != m.cols()) throw DataError("matrix CSV must be square");
  if (labels.empty()) return m;

  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    const auto it = std::find(v.begin(), v.end(), s);
    if (it == v.end()) throw DataError("matrix CSV lacks unit '" + s + "'");
    return static_cast<Eigen::Index>(it - v.begin());
  };
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index row_offset = square ? 0 : 1;
  MatrixXd out(n - row_offset, n);
  for (Eigen::Index i = row_offset; i < n; ++i) {
    const Eigen::Index ri = index_of(rows, labels[i]);
    for (Eigen::Index j = 0; j < n; ++j) out(i - row_offset, j) = m(ri, index_of(cols, labels[j]));
  }
  return out;
}

}  // namespace detail

/// Trade matrix CSV with unit labels as header and index, (N+1) x (N+1).
inline MatrixXd read_trade_matrix(std::istream& in, const std::vector<std::string>& labels) {
  return detail::read_labelled_matrix(in, labels, true);
}

/// Dense weights CSV: one row per control, columns for every unit (treated
/// first), i.e. the (w | W) block with labels.
inline SpatialWeights read_weights_matrix(std::istream& in, const std::vector<std::string>& labels) {
  const MatrixXd b = detail::read_labelled_matrix(in, labels, false);
  if (b.cols() != b.rows() + 1) throw DataError("weights CSV must be N x (N + 1)");
  if ((b.rightCols(b.rows()).diagonal().array() != 0.0).any()) {
    throw DataError("weights CSV has a nonzero self-weight");
  }
  SpatialWeights s = SpatialWeights::from_block(b);
  s.zero_rows = detail::find_zero_rows(b);
  return s;
}

inline void write_weights_matrix(std::ostream& out, const SpatialWeights& weights,
                                 const std::vector<std::string>& labels) {
  const MatrixXd b = weights.block();
  out << "unit";
  for (const auto& l : labels) out << ',' << csv::quote(l);
  out << '\n';
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    out << csv::quote(labels[i + 1]);
    for (Eigen::Index j = 0; j < b.cols(); ++j) out << ',' << csv::format_exact(b(i, j));
    out << '\n';
  }
}

}  // namespace spillscm
