// Copyright 2026 The MuCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mucs/errors.hpp"
#include "mucs/harness.hpp"

namespace mucs::harness {

using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt4(double v) { return fmt(v, "%.4f"); }
std::string fmt2(double v) { return fmt(v, "%.2f"); }

std::string budget_label(double fraction) { return fmt(fraction * 100.0, "%g%%"); }

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_quote(fields[i]);
  }
  out += '\n';
  return out;
}

json opt_to_json(const std::optional<double>& v) {
  if (!v.has_value()) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json cell_to_json(const ImprovementCell& c) {
  return json{{"baseline", opt_to_json(c.baseline)},
              {"treated", opt_to_json(c.treated)},
              {"pct", opt_to_json(c.pct)},
              {"direction", c.direction}};
}

ImprovementCell cell_from_json(const json& j) {
  ImprovementCell c;
  c.baseline = opt_from_json(j.at("baseline"));
  c.treated = opt_from_json(j.at("treated"));
  c.pct = opt_from_json(j.at("pct"));
  c.direction = j.at("direction").get<std::string>();
  return c;
}

json calibration_to_json(const CalibrationBlock& b) {
  return json{{"avg_confidence", b.avg_confidence},
              {"ece", b.ece},
              {"histogram", b.histogram},
              {"diversity", b.diversity}};
}

CalibrationBlock calibration_from_json(const json& j) {
  CalibrationBlock b;
  b.avg_confidence = j.at("avg_confidence").get<double>();
  b.ece = j.at("ece").get<double>();
  b.histogram = j.at("histogram").get<std::vector<std::size_t>>();
  b.diversity = j.at("diversity").get<double>();
  return b;
}

detectors::Method method_from_json(const json& j) {
  const std::string name = j.get<std::string>();
  const std::optional<detectors::Method> m = detectors::method_from_name(name);
  if (!m.has_value()) throw DataError("unknown method '" + name + "' in report");
  return *m;
}

// TRC table cell with the paper's annotation style: value then direction
// and percent, e.g. "0.4500 (up 50.00%)", "(- *)" for skipped baselines.
std::string improvement_cell_text(const ImprovementCell& c) {
  if (!c.treated.has_value()) return "-";
  std::string text = fmt4(*c.treated);
  if (c.direction == "missing") return text;
  if (c.direction == "skipped") return text + " (- *)";
  if (c.direction == "flat") return text + " (- 0.00%)";
  return text + " (" + c.direction + " " + fmt2(std::abs(*c.pct)) + "%)";
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const MethodRow& row : report.rows) {
    json cells = json::array();
    for (const std::optional<double>& c : row.trc_per_budget) cells.push_back(opt_to_json(c));
    rows.push_back(json{{"method", detectors::method_name(row.method)},
                        {"display", detectors::method_display_name(row.method, report.mucs_enabled)},
                        {"trc", std::move(cells)},
                        {"average", opt_to_json(row.average)},
                        {"skipped_reason", row.skipped_reason}});
  }
  json j{{"task_id", report.task_id},
         {"seed", report.seed},
         {"mucs_enabled", report.mucs_enabled},
         {"budgets", report.budgets},
         {"budget_counts", report.budget_counts},
         {"methods", std::move(rows)},
         {"calibration",
          json{{"original", calibration_to_json(report.original_calibration)},
               {"smoothed", report.smoothed_calibration.has_value()
                                ? calibration_to_json(*report.smoothed_calibration)
                                : json(nullptr)}}},
         {"accuracy", json{{"original", report.accuracy.original},
                           {"mutated", opt_to_json(report.accuracy.mutated)},
                           {"drift", opt_to_json(report.accuracy.drift)},
                           {"drift_flagged", report.accuracy.drift_flagged}}},
         {"smoothing_fallback_ids", report.smoothing_fallback_ids}};
  j["improvement"] = report.improvement.has_value() ? improvement_to_json(*report.improvement)
                                                    : json(nullptr);
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport report;
  report.task_id = j.at("task_id").get<std::string>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.mucs_enabled = j.at("mucs_enabled").get<bool>();
  report.budgets = j.at("budgets").get<std::vector<double>>();
  report.budget_counts = j.at("budget_counts").get<std::vector<std::size_t>>();
  for (const json& row : j.at("methods")) {
    MethodRow r;
    r.method = method_from_json(row.at("method"));
    for (const json& c : row.at("trc")) r.trc_per_budget.push_back(opt_from_json(c));
    r.average = opt_from_json(row.at("average"));
    r.skipped_reason = row.at("skipped_reason").get<std::string>();
    report.rows.push_back(std::move(r));
  }
  report.original_calibration = calibration_from_json(j.at("calibration").at("original"));
  if (!j.at("calibration").at("smoothed").is_null())
    report.smoothed_calibration = calibration_from_json(j.at("calibration").at("smoothed"));
  report.accuracy.original = j.at("accuracy").at("original").get<double>();
  report.accuracy.mutated = opt_from_json(j.at("accuracy").at("mutated"));
  report.accuracy.drift = opt_from_json(j.at("accuracy").at("drift"));
  report.accuracy.drift_flagged = j.at("accuracy").at("drift_flagged").get<bool>();
  report.smoothing_fallback_ids =
      j.at("smoothing_fallback_ids").get<std::vector<std::string>>();
  if (!j.at("improvement").is_null())
    report.improvement = improvement_from_json(j.at("improvement"));
  return report;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report to '" + path.string() + "'");
  out << report_to_json(report).dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("report '" + path.string() + "': " + e.what());
  }
  return report_from_json(j);
}

json improvement_to_json(const ImprovementTable& table) {
  json rows = json::array();
  for (const ImprovementRow& row : table.rows) {
    json cells = json::array();
    for (const ImprovementCell& c : row.cells) cells.push_back(cell_to_json(c));
    rows.push_back(json{{"method", detectors::method_name(row.method)},
                        {"cells", std::move(cells)},
                        {"average_per_budget", cell_to_json(row.average_per_budget)},
                        {"average_ratio", cell_to_json(row.average_ratio)}});
  }
  json treated_only = json::array();
  for (const ImprovementTable::TreatedOnly& t : table.treated_only) {
    json cells = json::array();
    for (const std::optional<double>& c : t.trc_per_budget) cells.push_back(opt_to_json(c));
    treated_only.push_back(json{{"method", detectors::method_name(t.method)},
                                {"trc", std::move(cells)},
                                {"average", opt_to_json(t.average)}});
  }
  return json{{"baseline", table.baseline_name},
              {"treated", table.treated_name},
              {"treated_mucs", table.treated_mucs},
              {"budgets", table.budgets},
              {"rows", std::move(rows)},
              {"treated_only", std::move(treated_only)}};
}

ImprovementTable improvement_from_json(const json& j) {
  ImprovementTable table;
  table.baseline_name = j.at("baseline").get<std::string>();
  table.treated_name = j.at("treated").get<std::string>();
  table.treated_mucs = j.at("treated_mucs").get<bool>();
  table.budgets = j.at("budgets").get<std::vector<double>>();
  for (const json& row : j.at("rows")) {
    ImprovementRow r;
    r.method = method_from_json(row.at("method"));
    for (const json& c : row.at("cells")) r.cells.push_back(cell_from_json(c));
    r.average_per_budget = cell_from_json(row.at("average_per_budget"));
    r.average_ratio = cell_from_json(row.at("average_ratio"));
    table.rows.push_back(std::move(r));
  }
  for (const json& t : j.at("treated_only")) {
    ImprovementTable::TreatedOnly to;
    to.method = method_from_json(t.at("method"));
    for (const json& c : t.at("trc")) to.trc_per_budget.push_back(opt_from_json(c));
    to.average = opt_from_json(t.at("average"));
    table.treated_only.push_back(std::move(to));
  }
  return table;
}

std::string trc_table_csv(const EvalReport& report) {
  std::vector<std::string> header{"Budget"};
  for (const MethodRow& row : report.rows)
    header.push_back(detectors::method_display_name(row.method, report.mucs_enabled));
  std::string out = csv_row(header);
  for (std::size_t bi = 0; bi < report.budgets.size(); ++bi) {
    std::vector<std::string> fields{budget_label(report.budgets[bi])};
    for (const MethodRow& row : report.rows)
      fields.push_back(row.trc_per_budget[bi].has_value() ? fmt4(*row.trc_per_budget[bi]) : "-");
    out += csv_row(fields);
  }
  std::vector<std::string> avg{"Average"};
  for (const MethodRow& row : report.rows)
    avg.push_back(row.average.has_value() ? fmt4(*row.average) : "-");
  out += csv_row(avg);
  return out;
}

std::string calibration_csv(const EvalReport& report) {
  std::string out = csv_row({"Task", "Confidence Before", "Confidence After", "ECE Before",
                             "ECE After", "Diversity Before", "Diversity After"});
  const CalibrationBlock& orig = report.original_calibration;
  std::vector<std::string> fields{report.task_id, fmt4(orig.avg_confidence)};
  if (report.smoothed_calibration.has_value()) {
    const CalibrationBlock& smoothed = *report.smoothed_calibration;
    fields.push_back(fmt4(smoothed.avg_confidence));
    fields.push_back(fmt4(orig.ece));
    fields.push_back(fmt4(smoothed.ece));
    fields.push_back(fmt2(orig.diversity));
    fields.push_back(fmt2(smoothed.diversity));
  } else {
    fields.push_back("-");
    fields.push_back(fmt4(orig.ece));
    fields.push_back("-");
    fields.push_back(fmt2(orig.diversity));
    fields.push_back("-");
  }
  out += csv_row(fields);
  return out;
}

std::string improvement_csv(const ImprovementTable& table) {
  std::vector<std::string> header{"Budget"};
  for (const ImprovementRow& row : table.rows)
    header.push_back(detectors::method_display_name(row.method, table.treated_mucs));
  for (const ImprovementTable::TreatedOnly& t : table.treated_only)
    header.push_back(detectors::method_display_name(t.method, false));
  std::string out = csv_row(header);

  for (std::size_t bi = 0; bi < table.budgets.size(); ++bi) {
    std::vector<std::string> fields{budget_label(table.budgets[bi])};
    for (const ImprovementRow& row : table.rows)
      fields.push_back(improvement_cell_text(row.cells[bi]));
    for (const ImprovementTable::TreatedOnly& t : table.treated_only)
      fields.push_back(t.trc_per_budget[bi].has_value() ? fmt4(*t.trc_per_budget[bi]) : "-");
    out += csv_row(fields);
  }

  // Both averaging conventions, clearly labeled: the per-budget mean of
  // relative improvements and the change between the row averages.
  std::vector<std::string> avg1{"Average (mean of per-budget improvements)"};
  for (const ImprovementRow& row : table.rows)
    avg1.push_back(improvement_cell_text(row.average_per_budget));
  for (const ImprovementTable::TreatedOnly& t : table.treated_only)
    avg1.push_back(t.average.has_value() ? fmt4(*t.average) : "-");
  out += csv_row(avg1);

  std::vector<std::string> avg2{"Average (ratio of averages)"};
  for (const ImprovementRow& row : table.rows)
    avg2.push_back(improvement_cell_text(row.average_ratio));
  for (const ImprovementTable::TreatedOnly& t : table.treated_only)
    avg2.push_back(t.average.has_value() ? fmt4(*t.average) : "-");
  out += csv_row(avg2);
  return out;
}

}  // namespace mucs::harness
