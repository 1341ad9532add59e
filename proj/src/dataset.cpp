#include "fairaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fairaudit {

using nlohmann::json;

const char* task_name(TaskKind t) {
  return t == TaskKind::adoption ? "adoption" : "spending";
}

TaskKind task_from_name(const std::string& name) {
  if (name == "adoption") return TaskKind::adoption;
  if (name == "spending") return TaskKind::spending;
  throw std::invalid_argument("unknown task '" + name + "' (expected adoption or spending)");
}

int ProtectedAttribute::level_index(const std::string& level) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return static_cast<int>(i);
  return -1;
}

int ProtectedAttribute::unspecified_index() const {
  int i = level_index(kUnspecified);
  require(i >= 0, "attribute '" + name + "' lacks the unspecified level");
  return i;
}

int Dataset::attribute_column(const std::string& name) const {
  for (std::size_t j = 0; j < attributes.size(); ++j)
    if (attributes[j].name == name) return static_cast<int>(j);
  return -1;
}

void Dataset::validate() const {
  const int n = rows();
  require(targets.rows() == n, "targets row count differs from features");
  require(protected_codes.rows() == n, "protected codes row count differs from features");
  require(protected_codes.cols() == attribute_count(),
          "protected code columns differ from attribute list");
  require(static_cast<int>(feature_names.size()) == feature_count(),
          "feature name count differs from feature columns");
  require(static_cast<int>(label_names.size()) == label_count(),
          "label name count differs from target columns");
  for (const auto& a : attributes)
    require(a.level_index(kUnspecified) >= 0,
            "attribute '" + a.name + "' lacks the unspecified level");
  for (int j = 0; j < attribute_count(); ++j) {
    const int levels = static_cast<int>(attributes[j].levels.size());
    for (int i = 0; i < n; ++i) {
      int c = protected_codes(i, j);
      require(c >= 0 && c < levels, "protected code out of range for attribute '" +
                                        attributes[j].name + "' at row " + std::to_string(i));
    }
  }
  for (int k = 0; k < label_count(); ++k) {
    for (int i = 0; i < n; ++i) {
      double y = targets(i, k);
      require(std::isfinite(y), "non-finite target at row " + std::to_string(i));
      if (task == TaskKind::adoption)
        require(y == 0.0 || y == 1.0, "adoption flag not 0/1 at row " + std::to_string(i) +
                                           ", label '" + label_names[k] + "'");
      else
        require(y >= 0.0, "negative spend at row " + std::to_string(i) + ", label '" +
                               label_names[k] + "'");
    }
  }
  for (int j = 0; j < feature_count(); ++j)
    for (int i = 0; i < n; ++i)
      require(std::isfinite(features(i, j)), "non-finite feature at row " + std::to_string(i));
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  h = fnv1a64(std::string_view(static_cast<const char*>(data), len), h);
}

void hash_matrix(std::uint64_t& h, const Eigen::MatrixXd& m) {
  std::int64_t dims[2] = {m.rows(), m.cols()};
  hash_bytes(h, dims, sizeof dims);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double v = m(i, j);
      hash_bytes(h, &v, sizeof v);
    }
}

}  // namespace

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  hash_matrix(h, ds.features);
  hash_matrix(h, ds.targets);
  std::int64_t dims[2] = {ds.protected_codes.rows(), ds.protected_codes.cols()};
  hash_bytes(h, dims, sizeof dims);
  for (Eigen::Index j = 0; j < ds.protected_codes.cols(); ++j)
    for (Eigen::Index i = 0; i < ds.protected_codes.rows(); ++i) {
      std::int32_t c = ds.protected_codes(i, j);
      hash_bytes(h, &c, sizeof c);
    }
  auto hash_str = [&](const std::string& s) {
    h = fnv1a64(s, h);
    hash_bytes(h, "\0", 1);
  };
  for (const auto& s : ds.feature_names) hash_str(s);
  for (const auto& s : ds.label_names) hash_str(s);
  for (const auto& a : ds.attributes) {
    hash_str(a.name);
    for (const auto& l : a.levels) hash_str(l);
  }
  hash_str(task_name(ds.task));
  return h;
}

std::string IntersectionIndex::group_name(int g) const {
  require(g >= 0 && g < group_count(), "group id out of range");
  if (attribute_names.empty()) return "all";
  std::string out;
  for (std::size_t a = 0; a < attribute_names.size(); ++a) {
    if (a) out += '|';
    out += attribute_levels[a][groups[g].level_codes[a]];
  }
  return out;
}

std::vector<int> IntersectionIndex::group_of_rows(int n) const {
  std::vector<int> gid(n, -1);
  for (int g = 0; g < group_count(); ++g)
    for (int r : members[g]) {
      require(r >= 0 && r < n, "index member row out of range");
      gid[r] = g;
    }
  return gid;
}

// --- CSV ---------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  require_data(!quoted, "unterminated quote at line " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double_field(const std::string& s, const std::string& column, int line_no) {
  require_data(!s.empty(),
               "missing value in column '" + column + "' at line " + std::to_string(line_no));
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require_data(ec == std::errc() && ptr == s.data() + s.size(),
               "non-numeric value '" + s + "' in column '" + column + "' at line " +
                   std::to_string(line_no));
  return v;
}

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

ColumnRole role_from_name(const std::string& s) {
  if (s == "feature") return ColumnRole::feature;
  if (s == "label") return ColumnRole::label;
  if (s == "protected") return ColumnRole::protected_attr;
  if (s == "ignore") return ColumnRole::ignore;
  throw std::invalid_argument("unknown column role '" + s + "'");
}

}  // namespace

ColumnSchema ColumnSchema::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ColumnSchema s;
  require(j.contains("columns") && j["columns"].is_object(), "schema needs a columns object");
  s.task = j.contains("task") ? task_from_name(j["task"].get<std::string>()) : TaskKind::adoption;
  for (const auto& [name, role] : j["columns"].items())
    s.columns.emplace_back(name, role_from_name(role.get<std::string>()));
  if (j.contains("levels")) {
    for (const auto& [attr, levels] : j["levels"].items()) {
      std::vector<std::string> lv = levels.get<std::vector<std::string>>();
      require(!lv.empty(), "declared level list for '" + attr + "' is empty");
      s.declared_levels[attr] = std::move(lv);
    }
  }
  return s;
}

ColumnSchema ColumnSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open data file '" + path + "'");

  std::string line;
  require_data(static_cast<bool>(std::getline(in, line)), "empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line, 1);

  std::map<std::string, ColumnRole> roles(schema.columns.begin(), schema.columns.end());
  require(roles.size() == schema.columns.size(), "schema lists a column twice");

  std::set<std::string> seen;
  std::vector<ColumnRole> col_role(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    require_data(seen.insert(header[c]).second, "duplicate column '" + header[c] + "' in header");
    auto it = roles.find(header[c]);
    require_data(it != roles.end(), "column '" + header[c] + "' missing from schema");
    col_role[c] = it->second;
  }
  for (const auto& [name, role] : roles) {
    (void)role;
    require_data(seen.count(name) > 0, "schema column '" + name + "' not in file");
  }

  std::vector<int> feature_cols, label_cols, attr_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    switch (col_role[c]) {
      case ColumnRole::feature: feature_cols.push_back(static_cast<int>(c)); break;
      case ColumnRole::label: label_cols.push_back(static_cast<int>(c)); break;
      case ColumnRole::protected_attr: attr_cols.push_back(static_cast<int>(c)); break;
      case ColumnRole::ignore: break;
    }
  }
  require(!label_cols.empty(), "schema declares no label column");

  std::vector<std::vector<double>> fvals(feature_cols.size()), lvals(label_cols.size());
  std::vector<std::vector<std::string>> avals(attr_cols.size());
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    std::vector<std::string> fields = split_csv_line(line, line_no);
    require_data(fields.size() == header.size(),
                 "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                     " fields, expected " + std::to_string(header.size()));
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      fvals[j].push_back(parse_double_field(fields[feature_cols[j]], header[feature_cols[j]], line_no));
    for (std::size_t j = 0; j < label_cols.size(); ++j) {
      double v = parse_double_field(fields[label_cols[j]], header[label_cols[j]], line_no);
      if (schema.task == TaskKind::adoption)
        require_data(v == 0.0 || v == 1.0, "label '" + header[label_cols[j]] + "' not 0/1 at line " +
                                               std::to_string(line_no));
      else
        require_data(v >= 0.0, "negative spend in '" + header[label_cols[j]] + "' at line " +
                                   std::to_string(line_no));
      lvals[j].push_back(v);
    }
    for (std::size_t j = 0; j < attr_cols.size(); ++j) {
      const std::string& raw = fields[attr_cols[j]];
      avals[j].push_back(raw.empty() ? std::string(kUnspecified) : raw);
    }
  }
  const int n = static_cast<int>(lvals[0].size());
  require_data(n >= 1, "file '" + path + "' has no data rows");

  Dataset ds;
  ds.task = schema.task;
  ds.features.resize(n, static_cast<int>(feature_cols.size()));
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    ds.feature_names.push_back(header[feature_cols[j]]);
    for (int i = 0; i < n; ++i) ds.features(i, static_cast<int>(j)) = fvals[j][i];
  }
  ds.targets.resize(n, static_cast<int>(label_cols.size()));
  for (std::size_t j = 0; j < label_cols.size(); ++j) {
    ds.label_names.push_back(header[label_cols[j]]);
    for (int i = 0; i < n; ++i) ds.targets(i, static_cast<int>(j)) = lvals[j][i];
  }
  ds.protected_codes.resize(n, static_cast<int>(attr_cols.size()));
  for (std::size_t j = 0; j < attr_cols.size(); ++j) {
    ProtectedAttribute attr;
    attr.name = header[attr_cols[j]];
    auto declared = schema.declared_levels.find(attr.name);
    if (declared != schema.declared_levels.end()) {
      attr.levels = declared->second;
      if (attr.level_index(kUnspecified) < 0) attr.levels.push_back(kUnspecified);
    } else {
      std::set<std::string> uniq(avals[j].begin(), avals[j].end());
      uniq.erase(kUnspecified);
      attr.levels.assign(uniq.begin(), uniq.end());  // lexicographic
      attr.levels.push_back(kUnspecified);
    }
    for (int i = 0; i < n; ++i) {
      int code = attr.level_index(avals[j][i]);
      require_data(code >= 0, "value '" + avals[j][i] + "' for attribute '" + attr.name +
                                  "' is outside the declared level set");
      ds.protected_codes(i, static_cast<int>(j)) = code;
    }
    ds.attributes.push_back(std::move(attr));
  }
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_data(out.good(), "cannot open '" + path + "' for writing");
  std::string header;
  for (const auto& s : ds.feature_names) header += s + ",";
  for (const auto& s : ds.label_names) header += s + ",";
  for (const auto& a : ds.attributes) header += a.name + ",";
  require(!header.empty(), "dataset has no columns");
  header.back() = '\n';
  out << header;
  const int n = ds.rows();
  for (int i = 0; i < n; ++i) {
    std::string row;
    for (int j = 0; j < ds.feature_count(); ++j) row += format_double(ds.features(i, j)) + ",";
    for (int k = 0; k < ds.label_count(); ++k) row += format_double(ds.targets(i, k)) + ",";
    for (int a = 0; a < ds.attribute_count(); ++a)
      row += ds.attributes[a].levels[ds.protected_codes(i, a)] + ",";
    row.back() = '\n';
    out << row;
  }
  require_data(out.good(), "write to '" + path + "' failed");
}

ColumnSchema schema_for(const Dataset& ds) {
  ColumnSchema s;
  s.task = ds.task;
  for (const auto& name : ds.feature_names) s.columns.emplace_back(name, ColumnRole::feature);
  for (const auto& name : ds.label_names) s.columns.emplace_back(name, ColumnRole::label);
  for (const auto& a : ds.attributes) {
    s.columns.emplace_back(a.name, ColumnRole::protected_attr);
    s.declared_levels[a.name] = a.levels;
  }
  return s;
}

// --- intersections ------------------------------------------------------

IntersectionIndex derive_intersections(const Dataset& ds,
                                       const std::vector<std::string>& attrs,
                                       int min_support) {
  require(min_support >= 0, "min_support must be nonnegative");
  IntersectionIndex idx;
  idx.min_support = min_support;
  const int n = ds.rows();

  if (attrs.empty()) {
    idx.groups.push_back(GroupKey{});
    idx.members.emplace_back();
    idx.members[0].resize(n);
    for (int i = 0; i < n; ++i) idx.members[0][i] = i;
    idx.below_support.push_back(n < min_support);
    return idx;
  }

  std::set<std::string> dup(attrs.begin(), attrs.end());
  require(dup.size() == attrs.size(), "attribute listed twice in intersection request");

  for (const auto& name : attrs) {
    int col = ds.attribute_column(name);
    require(col >= 0, "unknown protected attribute '" + name + "'");
    idx.attribute_names.push_back(name);
    idx.attribute_columns.push_back(col);
    idx.attribute_levels.push_back(ds.attributes[col].levels);
  }
  const int d = static_cast<int>(attrs.size());

  // Observed level codes per attribute, ascending.
  std::vector<std::vector<int>> observed(d);
  for (int a = 0; a < d; ++a) {
    std::set<int> seen;
    for (int i = 0; i < n; ++i) seen.insert(ds.protected_codes(i, idx.attribute_columns[a]));
    observed[a].assign(seen.begin(), seen.end());
  }

  // Enumerate the Cartesian product in lexicographic order; keep nonempty cells.
  std::map<std::vector<int>, std::vector<int>> cells;
  for (int i = 0; i < n; ++i) {
    std::vector<int> key(d);
    for (int a = 0; a < d; ++a) key[a] = ds.protected_codes(i, idx.attribute_columns[a]);
    cells[key].push_back(i);
  }
  std::vector<int> combo(d, 0);
  auto emit = [&](const std::vector<int>& codes) {
    auto it = cells.find(codes);
    if (it == cells.end()) return;
    idx.groups.push_back(GroupKey{codes});
    idx.members.push_back(it->second);
    idx.below_support.push_back(static_cast<int>(it->second.size()) < min_support);
  };
  std::vector<int> pos(d, 0);
  for (;;) {
    std::vector<int> codes(d);
    for (int a = 0; a < d; ++a) codes[a] = observed[a][pos[a]];
    emit(codes);
    int a = d - 1;
    while (a >= 0) {
      if (++pos[a] < static_cast<int>(observed[a].size())) break;
      pos[a] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return idx;
}

// --- split ---------------------------------------------------------------

namespace detail {

std::vector<int> stratified_allocation(const std::vector<std::vector<int>>& strata,
                                       double fraction) {
  const int s_count = static_cast<int>(strata.size());
  std::int64_t n = 0;
  for (const auto& s : strata) n += static_cast<std::int64_t>(s.size());
  const int total = static_cast<int>(std::llround(static_cast<double>(n) * fraction));

  std::vector<int> base(s_count);
  std::vector<double> rem(s_count);
  int assigned = 0;
  for (int s = 0; s < s_count; ++s) {
    double exact = static_cast<double>(strata[s].size()) * fraction;
    base[s] = static_cast<int>(std::floor(exact));
    rem[s] = exact - base[s];
    assigned += base[s];
  }
  int leftover = total - assigned;
  require(leftover >= 0 && leftover <= s_count, "allocation arithmetic out of range");

  // Distribute by largest remainder; ties broken by stratum size, then by the
  // smallest member row, never by stratum position, so the result does not
  // depend on how strata are labeled.
  std::vector<int> order(s_count);
  for (int s = 0; s < s_count; ++s) order[s] = s;
  auto min_member = [&](int s) {
    return strata[s].empty() ? -1 : *std::min_element(strata[s].begin(), strata[s].end());
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    if (strata[a].size() != strata[b].size()) return strata[a].size() > strata[b].size();
    return min_member(a) < min_member(b);
  });
  for (int i = 0; i < leftover; ++i) base[order[i]] += 1;
  return base;
}

}  // namespace detail

Dataset take_rows(const Dataset& ds, const std::vector<int>& rows) {
  Dataset out;
  out.task = ds.task;
  out.feature_names = ds.feature_names;
  out.label_names = ds.label_names;
  out.attributes = ds.attributes;
  const int m = static_cast<int>(rows.size());
  out.features.resize(m, ds.feature_count());
  out.targets.resize(m, ds.label_count());
  out.protected_codes.resize(m, ds.attribute_count());
  for (int i = 0; i < m; ++i) {
    require(rows[i] >= 0 && rows[i] < ds.rows(), "row index out of range");
    out.features.row(i) = ds.features.row(rows[i]);
    out.targets.row(i) = ds.targets.row(rows[i]);
    out.protected_codes.row(i) = ds.protected_codes.row(rows[i]);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double holdout_fraction,
                                  std::uint64_t seed, std::optional<int> stratify_label) {
  const int n = ds.rows();
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0,
          "holdout fraction must lie strictly between 0 and 1");
  require(n >= 2, "need at least 2 rows to split");

  Rng rng = Rng(seed).child("split.shuffle");
  std::vector<int> perm = rng.permutation(n);

  std::vector<char> in_holdout(n, 0);
  if (!stratify_label) {
    int h = static_cast<int>(std::llround(n * holdout_fraction));
    require(h >= 1 && h <= n - 1, "split would leave one part empty");
    for (int i = 0; i < h; ++i) in_holdout[perm[i]] = 1;
  } else {
    int k = *stratify_label;
    require(ds.task == TaskKind::adoption, "stratified split needs a binary adoption label");
    require(k >= 0 && k < ds.label_count(), "stratify label out of range");
    std::vector<std::vector<int>> strata(2);  // [positives, negatives]
    for (int i = 0; i < n; ++i) strata[ds.targets(i, k) == 1.0 ? 0 : 1].push_back(i);
    require(!strata[0].empty() && !strata[1].empty(),
            "stratification impossible: label has a single class");
    require(strata[0].size() >= 2 && strata[1].size() >= 2,
            "stratification impossible: a class has fewer than 2 rows");
    std::vector<int> quota = detail::stratified_allocation(strata, holdout_fraction);
    int h = quota[0] + quota[1];
    require(h >= 1 && h <= n - 1, "split would leave one part empty");
    // Walk the shuffled order, filling each stratum's holdout quota.
    std::vector<int> stratum_of(n);
    for (int i : strata[0]) stratum_of[i] = 0;
    for (int i : strata[1]) stratum_of[i] = 1;
    for (int i = 0; i < n; ++i) {
      int r = perm[i];
      if (quota[stratum_of[r]] > 0) {
        in_holdout[r] = 1;
        quota[stratum_of[r]] -= 1;
      }
    }
  }

  std::vector<int> train_rows, hold_rows;
  for (int i = 0; i < n; ++i) (in_holdout[i] ? hold_rows : train_rows).push_back(i);
  return {take_rows(ds, train_rows), take_rows(ds, hold_rows)};
}

// --- synthetic generator -------------------------------------------------

namespace {

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

double sigmoid_stable(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

void SynthConfig::validate() const {
  require(n >= 1, "n must be positive");
  require(p >= 1, "p must be positive");
  require(k >= 1, "k must be positive");
  require(!attributes.empty(), "at least one protected attribute is required");
  for (const auto& a : attributes) {
    require(!a.name.empty(), "attribute name is empty");
    require(!a.levels.empty(), "attribute '" + a.name + "' has no levels");
    require(a.levels.size() == a.level_probs.size(),
            "attribute '" + a.name + "' level/prob length mismatch");
    double total = 0;
    for (double w : a.level_probs) {
      require(w >= 0, "attribute '" + a.name + "' has a negative level probability");
      total += w;
    }
    require(total > 0, "attribute '" + a.name + "' level probabilities sum to zero");
    require(a.unspecified_rate >= 0 && a.unspecified_rate <= 1,
            "attribute '" + a.name + "' unspecified rate outside [0,1]");
    for (const auto& l : a.levels)
      require(l != kUnspecified, "attribute '" + a.name + "' declares unspecified explicitly");
  }
  if (task == TaskKind::adoption || !label_positive_rates.empty())
    require(static_cast<int>(label_positive_rates.size()) == k,
            "label_positive_rates must have one entry per label");
  for (double r : label_positive_rates)
    require(r >= 0 && r <= 1, "label positive rate outside [0,1]");
  if (task == TaskKind::spending) {
    require(spend_mean_log.empty() || static_cast<int>(spend_mean_log.size()) == k,
            "spend_mean_log must have one entry per label");
    require(spend_sd_log.empty() || static_cast<int>(spend_sd_log.size()) == k,
            "spend_sd_log must have one entry per label");
    for (double s : spend_sd_log) require(s >= 0, "negative spend log-sd");
  }
  require(bimodal_sd >= 0, "bimodal sd must be nonnegative");
  require(bimodal_mix >= 0 && bimodal_mix <= 1, "bimodal mix outside [0,1]");
  std::set<int> pair_targets;
  for (const auto& cp : correlated_pairs) {
    require(cp.source >= 0 && cp.source < p, "correlated pair source out of range");
    require(cp.target >= 0 && cp.target < p, "correlated pair target out of range");
    require(cp.source != cp.target, "correlated pair maps a feature to itself");
    require(std::abs(cp.r) <= 1, "correlation target outside [-1,1]");
    require(pair_targets.insert(cp.target).second, "feature is target of two correlated pairs");
    require(pair_targets.count(cp.source) == 0, "pair source is itself a pair target");
  }
  auto check_planted = [&](const PlantedDependence& d, int bound, const char* what) {
    require(d.index >= 0 && d.index < bound, std::string(what) + " index out of range");
    require(d.strength >= 0, std::string(what) + " strength must be nonnegative");
    bool found = false;
    for (const auto& a : attributes) {
      if (a.name != d.attribute) continue;
      found = true;
      bool has = false;
      for (const auto& l : a.levels) has = has || l == d.level;
      require(has, std::string(what) + " level '" + d.level + "' not declared for attribute '" +
                       d.attribute + "'");
    }
    require(found, std::string(what) + " names unknown attribute '" + d.attribute + "'");
  };
  if (proxy) {
    check_planted(*proxy, p, "proxy");
    require(pair_targets.count(proxy->index) == 0, "proxy feature is a correlated-pair target");
  }
  if (label_signal) check_planted(*label_signal, k, "label signal");
  for (const auto& fe : feature_effects) {
    require(fe.label >= 0 && fe.label < k, "feature effect label out of range");
    require(fe.feature >= 0 && fe.feature < p, "feature effect feature out of range");
  }
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  const int n = cfg.n;

  Dataset ds;
  ds.task = cfg.task;

  // Attributes first: one stream per column, one mixture draw then one level
  // draw per row, so every row consumes the same amount of stream.
  const int d = static_cast<int>(cfg.attributes.size());
  ds.protected_codes.resize(n, d);
  for (int a = 0; a < d; ++a) {
    const auto& ac = cfg.attributes[a];
    ProtectedAttribute attr;
    attr.name = ac.name;
    attr.levels = ac.levels;
    attr.levels.push_back(kUnspecified);
    const int unspec = static_cast<int>(attr.levels.size()) - 1;
    Rng s = root.child("attribute", static_cast<std::uint64_t>(a));
    for (int i = 0; i < n; ++i) {
      bool miss = s.bernoulli(ac.unspecified_rate);
      int lvl = s.categorical(ac.level_probs);
      ds.protected_codes(i, a) = miss ? unspec : lvl;
    }
    ds.attributes.push_back(std::move(attr));
  }

  // Planted-dependence indicators (unspecified rows count as 0).
  auto indicator = [&](const PlantedDependence& dep) {
    int col = ds.attribute_column(dep.attribute);
    int code = ds.attributes[col].level_index(dep.level);
    Eigen::ArrayXd z(n);
    for (int i = 0; i < n; ++i) z[i] = ds.protected_codes(i, col) == code ? 1.0 : 0.0;
    return z;
  };

  // Features: independent columns are two-mode Gaussian mixtures; correlated
  // targets mix the source column with an independent copy so the Pearson
  // correlation hits r in expectation; the proxy feature's high-mode
  // probability shifts with the planted indicator.
  ds.features.resize(n, cfg.p);
  const double mix_mean = cfg.bimodal_mix * cfg.bimodal_high + (1 - cfg.bimodal_mix) * cfg.bimodal_low;
  Eigen::ArrayXd proxy_z;
  if (cfg.proxy && cfg.proxy->strength > 0) proxy_z = indicator(*cfg.proxy);
  auto draw_mixture = [&](Rng& s, int j, Eigen::Ref<Eigen::VectorXd> out) {
    const bool is_proxy = proxy_z.size() > 0 && cfg.proxy->index == j;
    for (int i = 0; i < n; ++i) {
      double p_hi = cfg.bimodal_mix;
      if (is_proxy) p_hi = clamp01(p_hi + cfg.proxy->strength * (proxy_z[i] - 0.5));
      bool hi = s.bernoulli(p_hi);
      out[i] = s.normal(hi ? cfg.bimodal_high : cfg.bimodal_low, cfg.bimodal_sd);
    }
  };
  std::vector<const CorrelatedPair*> pair_of(cfg.p, nullptr);
  for (const auto& cp : cfg.correlated_pairs) pair_of[cp.target] = &cp;
  for (int j = 0; j < cfg.p; ++j) {
    Rng s = root.child("feature", static_cast<std::uint64_t>(j));
    Eigen::VectorXd col(n);
    draw_mixture(s, j, col);
    ds.features.col(j) = col;
  }
  for (const auto& cp : cfg.correlated_pairs) {
    Eigen::VectorXd src = ds.features.col(cp.source);
    Eigen::VectorXd ind = ds.features.col(cp.target);
    double w = std::sqrt(1.0 - cp.r * cp.r);
    ds.features.col(cp.target) =
        (cp.r * (src.array() - mix_mean) + w * (ind.array() - mix_mean) + mix_mean).matrix();
  }
  for (int j = 0; j < cfg.p; ++j) ds.feature_names.push_back("f" + std::to_string(j + 1));

  // Labels: the base rate enters through a logistic link when any effect or
  // signal touches the label, and stays an exact Bernoulli otherwise.
  const double mix_var = cfg.bimodal_mix * (1 - cfg.bimodal_mix) *
                             (cfg.bimodal_high - cfg.bimodal_low) * (cfg.bimodal_high - cfg.bimodal_low) +
                         cfg.bimodal_sd * cfg.bimodal_sd;
  const double mix_sd = std::sqrt(std::max(mix_var, 1e-300));
  Eigen::ArrayXd signal_z;
  if (cfg.label_signal && cfg.label_signal->strength > 0) signal_z = indicator(*cfg.label_signal);
  ds.targets.resize(n, cfg.k);
  for (int k = 0; k < cfg.k; ++k) {
    Rng s = root.child("label", static_cast<std::uint64_t>(k));
    std::vector<const FeatureEffect*> effects;
    for (const auto& fe : cfg.feature_effects)
      if (fe.label == k) effects.push_back(&fe);
    const bool has_signal = signal_z.size() > 0 && cfg.label_signal->index == k;
    const double base =
        cfg.label_positive_rates.empty() ? 0.5 : cfg.label_positive_rates[k];
    const bool structural = has_signal || !effects.empty();
    if (structural)
      require(base > 0 && base < 1,
              "label rate must lie strictly inside (0,1) when effects or signals apply");
    const double eta0 = structural ? std::log(base / (1 - base)) : 0.0;

    Eigen::ArrayXd rate(n);
    if (!structural) {
      rate.setConstant(base);
    } else {
      for (int i = 0; i < n; ++i) {
        double eta = eta0;
        for (const auto* fe : effects)
          eta += fe->coef * (ds.features(i, fe->feature) - mix_mean) / mix_sd;
        if (has_signal) eta += cfg.label_signal->strength * (signal_z[i] - 0.5);
        rate[i] = sigmoid_stable(eta);
      }
    }

    if (cfg.task == TaskKind::adoption) {
      for (int i = 0; i < n; ++i) ds.targets(i, k) = s.bernoulli(rate[i]) ? 1.0 : 0.0;
    } else {
      const double mu = cfg.spend_mean_log.empty() ? 3.0 : cfg.spend_mean_log[k];
      const double sg = cfg.spend_sd_log.empty() ? 1.0 : cfg.spend_sd_log[k];
      for (int i = 0; i < n; ++i) {
        bool adopt = s.bernoulli(rate[i]);
        double amount = std::exp(s.normal(mu, sg));
        ds.targets(i, k) = adopt ? amount : 0.0;
      }
    }
    ds.label_names.push_back("label_" + std::to_string(k + 1));
  }

  ds.validate();
  return ds;
}

// --- quality report -------------------------------------------------------

QualityReport data_quality_report(const Dataset& ds, const QualityOptions& opts) {
  QualityReport rep;
  rep.correlation_threshold = opts.correlation_threshold;
  rep.min_support = opts.min_support;
  const int n = ds.rows();
  require(n >= 1, "empty dataset");

  for (int a = 0; a < ds.attribute_count(); ++a) {
    int unspec = ds.attributes[a].unspecified_index();
    double miss = 0;
    for (int i = 0; i < n; ++i) miss += ds.protected_codes(i, a) == unspec ? 1.0 : 0.0;
    rep.unspecified_rates.emplace_back(ds.attributes[a].name, miss / n);
  }

  if (ds.task == TaskKind::adoption) {
    for (int k = 0; k < ds.label_count(); ++k)
      rep.label_positive_rates.emplace_back(ds.label_names[k], ds.targets.col(k).mean());
  } else {
    for (int k = 0; k < ds.label_count(); ++k) {
      Eigen::VectorXd y = ds.targets.col(k);
      SpendSummary s;
      s.mean = y.mean();
      s.sd = std::sqrt((y.array() - s.mean).square().mean());
      s.min = y.minCoeff();
      s.max = y.maxCoeff();
      std::vector<double> sorted(y.data(), y.data() + n);
      std::sort(sorted.begin(), sorted.end());
      s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      s.zero_fraction = (y.array() == 0.0).cast<double>().mean();
      rep.spend_summaries.emplace_back(ds.label_names[k], s);
    }
  }

  const int p = ds.feature_count();
  rep.feature_correlation.setConstant(p, p, std::numeric_limits<double>::quiet_NaN());
  Eigen::VectorXd mean = ds.features.colwise().mean();
  Eigen::MatrixXd centered = ds.features.rowwise() - mean.transpose();
  Eigen::VectorXd sd = (centered.array().square().colwise().mean()).sqrt();
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (sd[i] == 0 || sd[j] == 0) continue;  // constant column: undefined
      double cov = (centered.col(i).array() * centered.col(j).array()).mean();
      rep.feature_correlation(i, j) = cov / (sd[i] * sd[j]);
    }
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      double r = rep.feature_correlation(i, j);
      if (std::isfinite(r) && std::abs(r) >= opts.correlation_threshold)
        rep.high_correlation_pairs.push_back({i, j, r});
    }

  std::vector<std::string> attrs = opts.attrs;
  if (attrs.empty())
    for (const auto& a : ds.attributes) attrs.push_back(a.name);
  if (!attrs.empty()) {
    IntersectionIndex idx = derive_intersections(ds, attrs, opts.min_support);
    for (int g = 0; g < idx.group_count(); ++g) {
      rep.group_names.push_back(idx.group_name(g));
      rep.group_sizes.push_back(static_cast<int>(idx.members[g].size()));
      rep.group_below_support.push_back(idx.below_support[g]);
    }
  }
  return rep;
}

// --- JSON ------------------------------------------------------------------

SynthConfig SynthConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  SynthConfig c;
  if (j.contains("spec_version"))
    require(j["spec_version"].get<int>() == 1, "unsupported config spec_version");
  c.n = j.value("n", c.n);
  c.p = j.value("p", c.p);
  c.k = j.value("k", c.k);
  if (j.contains("task")) c.task = task_from_name(j["task"].get<std::string>());
  c.seed = j.value("seed", c.seed);
  if (j.contains("attributes")) {
    for (const auto& a : j["attributes"]) {
      SynthAttribute sa;
      sa.name = a.at("name").get<std::string>();
      sa.levels = a.at("levels").get<std::vector<std::string>>();
      if (a.contains("level_probs"))
        sa.level_probs = a["level_probs"].get<std::vector<double>>();
      else
        sa.level_probs.assign(sa.levels.size(), 1.0);
      sa.unspecified_rate = a.value("unspecified_rate", 0.0);
      c.attributes.push_back(std::move(sa));
    }
  }
  if (j.contains("label_positive_rates"))
    c.label_positive_rates = j["label_positive_rates"].get<std::vector<double>>();
  if (j.contains("spend_mean_log")) c.spend_mean_log = j["spend_mean_log"].get<std::vector<double>>();
  if (j.contains("spend_sd_log")) c.spend_sd_log = j["spend_sd_log"].get<std::vector<double>>();
  if (j.contains("bimodal")) {
    const auto& b = j["bimodal"];
    c.bimodal_low = b.value("low", c.bimodal_low);
    c.bimodal_high = b.value("high", c.bimodal_high);
    c.bimodal_sd = b.value("sd", c.bimodal_sd);
    c.bimodal_mix = b.value("mix", c.bimodal_mix);
  }
  if (j.contains("correlated_pairs")) {
    for (const auto& cp : j["correlated_pairs"]) {
      CorrelatedPair pair;
      pair.source = cp.at("source").get<int>();
      pair.target = cp.at("target").get<int>();
      pair.r = cp.at("r").get<double>();
      c.correlated_pairs.push_back(pair);
    }
  }
  auto read_planted = [](const json& src) {
    PlantedDependence dep;
    dep.index = src.contains("feature") ? src["feature"].get<int>() : src.value("label", 0);
    dep.attribute = src.at("attribute").get<std::string>();
    dep.level = src.at("level").get<std::string>();
    dep.strength = src.value("strength", 0.0);
    return dep;
  };
  if (j.contains("proxy")) c.proxy = read_planted(j["proxy"]);
  if (j.contains("label_signal")) c.label_signal = read_planted(j["label_signal"]);
  if (j.contains("feature_effects")) {
    for (const auto& fe : j["feature_effects"]) {
      FeatureEffect e;
      e.label = fe.at("label").get<int>();
      e.feature = fe.at("feature").get<int>();
      e.coef = fe.at("coef").get<double>();
      c.feature_effects.push_back(e);
    }
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string SynthConfig::to_json_text() const {
  json j;
  j["spec_version"] = 1;
  j["task"] = task_name(task);
  j["n"] = n;
  j["p"] = p;
  j["k"] = k;
  j["seed"] = seed;
  json attrs = json::array();
  for (const auto& a : attributes) {
    json ja;
    ja["name"] = a.name;
    ja["levels"] = a.levels;
    ja["level_probs"] = a.level_probs;
    ja["unspecified_rate"] = a.unspecified_rate;
    attrs.push_back(ja);
  }
  j["attributes"] = attrs;
  if (!label_positive_rates.empty()) j["label_positive_rates"] = label_positive_rates;
  if (!spend_mean_log.empty()) j["spend_mean_log"] = spend_mean_log;
  if (!spend_sd_log.empty()) j["spend_sd_log"] = spend_sd_log;
  j["bimodal"] = {{"low", bimodal_low}, {"high", bimodal_high}, {"sd", bimodal_sd}, {"mix", bimodal_mix}};
  if (!correlated_pairs.empty()) {
    json pairs = json::array();
    for (const auto& cp : correlated_pairs)
      pairs.push_back({{"source", cp.source}, {"target", cp.target}, {"r", cp.r}});
    j["correlated_pairs"] = pairs;
  }
  auto planted = [](const PlantedDependence& d, const char* key) {
    return json{{key, d.index}, {"attribute", d.attribute}, {"level", d.level}, {"strength", d.strength}};
  };
  if (proxy) j["proxy"] = planted(*proxy, "feature");
  if (label_signal) j["label_signal"] = planted(*label_signal, "label");
  if (!feature_effects.empty()) {
    json fx = json::array();
    for (const auto& fe : feature_effects)
      fx.push_back({{"label", fe.label}, {"feature", fe.feature}, {"coef", fe.coef}});
    j["feature_effects"] = fx;
  }
  return j.dump(2);
}

std::string QualityReport::to_json_text() const {
  json j;
  j["unspecified_rates"] = json::object();
  for (const auto& [name, rate] : unspecified_rates) j["unspecified_rates"][name] = rate;
  if (!label_positive_rates.empty()) {
    j["label_positive_rates"] = json::object();
    for (const auto& [name, rate] : label_positive_rates) j["label_positive_rates"][name] = rate;
  }
  if (!spend_summaries.empty()) {
    j["spend_summaries"] = json::object();
    for (const auto& [name, s] : spend_summaries)
      j["spend_summaries"][name] = {{"mean", s.mean},     {"sd", s.sd},
                                    {"min", s.min},       {"max", s.max},
                                    {"median", s.median}, {"zero_fraction", s.zero_fraction}};
  }
  json corr = json::array();
  for (Eigen::Index i = 0; i < feature_correlation.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < feature_correlation.cols(); ++c) {
      double v = feature_correlation(i, c);
      if (std::isfinite(v))
        row.push_back(v);
      else
        row.push_back(nullptr);
    }
    corr.push_back(row);
  }
  j["feature_correlation"] = corr;
  json pairs = json::array();
  for (const auto& f : high_correlation_pairs)
    pairs.push_back({{"i", f.i}, {"j", f.j}, {"r", f.r}});
  j["high_correlation_pairs"] = pairs;
  j["correlation_threshold"] = correlation_threshold;
  json groups = json::array();
  for (std::size_t g = 0; g < group_names.size(); ++g)
    groups.push_back({{"group", group_names[g]},
                      {"size", group_sizes[g]},
                      {"below_min_support", static_cast<bool>(group_below_support[g])}});
  j["groups"] = groups;
  j["min_support"] = min_support;
  return j.dump(2);
}

}  // namespace fairaudit
