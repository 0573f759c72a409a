#include "scdonor/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "scdonor/error.hpp"

namespace scdonor {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& tok, std::size_t line_no,
                    const std::string& column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_validation("csv line " + std::to_string(line_no) + ", column '" +
                     column + "': non-numeric cell '" + tok + "'");
  }
  if (!std::isfinite(v)) {
    throw_validation("csv line " + std::to_string(line_no) + ", column '" +
                     column + "': non-finite value '" + tok + "'");
  }
  return v;
}

std::int64_t parse_time(const std::string& tok, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_validation("csv line " + std::to_string(line_no) +
                     ", column 'time': not an integer: '" + tok + "'");
  }
  return v;
}

}  // namespace

Eigen::Index Panel::donor_index(const std::string& id) const {
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(donor_ids.size()); ++i) {
    if (donor_ids[static_cast<std::size_t>(i)] == id) return i;
  }
  throw_validation("unknown donor id '" + id + "'");
}

void Panel::validate() const {
  const auto T = n_times();
  if (T < 2) throw_validation("panel needs at least 2 time points");
  if (target.size() != T) throw_validation("target length != number of times");
  if (donors.rows() != T) throw_validation("donor rows != number of times");
  if (static_cast<Eigen::Index>(donor_ids.size()) != donors.cols()) {
    throw_validation("donor_ids length != number of donor columns");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) {
      throw_validation("times must be strictly increasing");
    }
  }
  if (intervention_time < 1 || intervention_time > T - 1) {
    throw_validation(
        "intervention_time index must leave at least one pre and one post "
        "point");
  }
  if (!target.allFinite() || !donors.allFinite()) {
    throw_validation("panel contains non-finite values");
  }
}

std::pair<Panel, NormalizationParams> normalize(const Panel& panel) {
  panel.validate();
  const Eigen::Index n_pre = panel.n_pre();
  const Eigen::Index N = panel.n_donors();
  if (n_pre < 2) {
    throw_validation("normalize: need at least 2 pre-intervention points");
  }

  NormalizationParams params;
  params.mean.resize(N);
  params.std.resize(N);

  Panel out = panel;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto pre = panel.donors.col(i).head(n_pre);
    const double m = pre.mean();
    const double ss = (pre.array() - m).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n_pre - 1));
    if (!(sd > 0.0)) {
      throw_validation("normalize: donor '" +
                       panel.donor_ids[static_cast<std::size_t>(i)] +
                       "' is constant over the pre-intervention period");
    }
    params.mean(i) = m;
    params.std(i) = sd;
    out.donors.col(i) = (panel.donors.col(i).array() - m) / sd;
  }
  return {std::move(out), std::move(params)};
}

Panel denormalize(const Panel& panel, const NormalizationParams& params) {
  if (params.mean.size() != panel.n_donors() ||
      params.std.size() != panel.n_donors()) {
    throw_validation("denormalize: parameter size mismatch");
  }
  Panel out = panel;
  for (Eigen::Index i = 0; i < panel.n_donors(); ++i) {
    out.donors.col(i) = panel.donors.col(i).array() * params.std(i) + params.mean(i);
  }
  return out;
}

Panel time_average(const Panel& panel, int bucket) {
  panel.validate();
  if (bucket < 1) throw_validation("time_average: bucket must be >= 1");
  if (bucket == 1) return panel;

  const Eigen::Index n_pre = panel.n_pre();
  const Eigen::Index n_post = panel.n_post();
  const Eigen::Index pre_buckets = n_pre / bucket;
  const Eigen::Index post_buckets = n_post / bucket;
  if (pre_buckets < 1 || post_buckets < 1) {
    throw_validation(
        "time_average: bucket of " + std::to_string(bucket) +
        " does not fit in the pre span (" + std::to_string(n_pre) +
        ") and post span (" + std::to_string(n_post) + ")");
  }

  const Eigen::Index B = pre_buckets + post_buckets;
  // First kept row: pre buckets are anchored so the last one ends at the
  // final pre point; a leading partial bucket is dropped. Post buckets start
  // exactly at the intervention; a trailing partial bucket is dropped.
  const Eigen::Index start = panel.intervention_time - pre_buckets * bucket;

  Panel out;
  out.times.resize(static_cast<std::size_t>(B));
  std::iota(out.times.begin(), out.times.end(), 0);
  out.target.resize(B);
  out.donors.resize(B, panel.n_donors());
  out.donor_ids = panel.donor_ids;
  out.intervention_time = pre_buckets;

  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Index row = start + b * bucket;
    out.target(b) = panel.target.segment(row, bucket).mean();
    out.donors.row(b) = panel.donors.middleRows(row, bucket).colwise().mean();
  }
  return out;
}

Panel ingest_csv(const std::string& path, const std::string& target_column,
                 std::int64_t intervention_time) {
  std::ifstream in(path);
  if (!in) throw_validation("cannot open csv file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw_validation("csv file '" + path + "' is empty");
  const auto header = split_csv_line(line);

  std::size_t time_col = header.size();
  std::size_t target_col = header.size();
  std::vector<std::size_t> donor_cols;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!seen.insert(header[c]).second) {
      throw_validation("csv header: duplicate column '" + header[c] + "'");
    }
    if (header[c] == "time") {
      time_col = c;
    } else if (header[c] == target_column) {
      target_col = c;
    } else {
      donor_cols.push_back(c);
    }
  }
  if (time_col == header.size()) throw_validation("csv is missing a 'time' column");
  if (target_col == header.size()) {
    throw_validation("csv is missing target column '" + target_column + "'");
  }
  if (donor_cols.empty()) throw_validation("csv has no donor columns");

  struct Row {
    std::int64_t time;
    double target;
    std::vector<double> donors;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw_validation("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Row r;
    r.time = parse_time(fields[time_col], line_no);
    r.target = parse_double(fields[target_col], line_no, header[target_col]);
    r.donors.reserve(donor_cols.size());
    for (auto c : donor_cols) {
      r.donors.push_back(parse_double(fields[c], line_no, header[c]));
    }
    rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw_validation("csv needs at least 2 data rows");

  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].time == rows[i - 1].time) {
      throw_validation("csv: duplicate time index " + std::to_string(rows[i].time));
    }
  }

  Panel panel;
  const Eigen::Index T = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index N = static_cast<Eigen::Index>(donor_cols.size());
  panel.times.resize(rows.size());
  panel.target.resize(T);
  panel.donors.resize(T, N);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& r = rows[static_cast<std::size_t>(t)];
    panel.times[static_cast<std::size_t>(t)] = r.time;
    panel.target(t) = r.target;
    for (Eigen::Index i = 0; i < N; ++i) {
      panel.donors(t, i) = r.donors[static_cast<std::size_t>(i)];
    }
  }
  for (auto c : donor_cols) panel.donor_ids.push_back(header[c]);

  auto it = std::find(panel.times.begin(), panel.times.end(), intervention_time);
  if (it == panel.times.end()) {
    throw_validation("intervention_time " + std::to_string(intervention_time) +
                     " is not an observed time index");
  }
  panel.intervention_time = static_cast<Eigen::Index>(it - panel.times.begin());
  if (panel.intervention_time < 1) {
    throw_validation("intervention_time " + std::to_string(intervention_time) +
                     " leaves no pre-intervention data");
  }
  panel.validate();
  return panel;
}

void emit_csv(const Panel& panel, const std::string& path) {
  panel.validate();
  std::ofstream out(path);
  if (!out) throw_validation("cannot write csv file '" + path + "'");

  out << "time,target";
  for (const auto& id : panel.donor_ids) out << ',' << id;
  out << '\n';

  char buf[64];
  for (Eigen::Index t = 0; t < panel.n_times(); ++t) {
    out << panel.times[static_cast<std::size_t>(t)];
    std::snprintf(buf, sizeof(buf), "%.17g", panel.target(t));
    out << ',' << buf;
    for (Eigen::Index i = 0; i < panel.n_donors(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", panel.donors(t, i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace scdonor
