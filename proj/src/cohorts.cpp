#include "topicforge/cohorts.hpp"

#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace topicforge {

namespace {

std::size_t require_column(const CsvTable& t, std::string_view name, std::string_view file) {
  auto c = t.column(name);
  if (!c) throw ValidationError(std::string(file) + ": missing column '" + std::string(name) + "'");
  return *c;
}

double parse_at(const std::string& text, std::string_view what, std::size_t line) {
  try {
    return parse_double(text, what);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), line);
  }
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", v * 100.0);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

CensusTable parse_census(std::string_view csv_text) {
  auto t = parse_csv(csv_text);
  const auto c_da = require_column(t, "da_id", "census");
  const auto c_inc = require_column(t, "avg_income", "census");
  const std::array<std::size_t, 4> c_edu{require_column(t, "edu_high_school", "census"),
                                         require_column(t, "edu_college", "census"),
                                         require_column(t, "edu_bachelor", "census"),
                                         require_column(t, "edu_advanced", "census")};
  CensusTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.lines[r];
    if (row.size() != t.header.size()) throw ParseError("census: wrong number of fields", line);
    CensusRow c;
    c.da_id = std::string(trim(row[c_da]));
    if (c.da_id.empty()) throw ParseError("census: empty da_id", line);
    c.avg_income = parse_at(row[c_inc], "avg_income", line);
    if (!(c.avg_income >= 0)) throw ParseError("census: avg_income must be >= 0", line);
    double sum = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      c.edu[i] = parse_at(row[c_edu[i]], "education share", line);
      if (!(c.edu[i] >= 0)) throw ParseError("census: education shares must be >= 0", line);
      sum += c.edu[i];
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ParseError("census: education shares must sum to 1", line);
    if (!out.emplace(c.da_id, c).second) throw ValidationError("census: duplicate da_id '" + c.da_id + "'");
  }
  return out;
}

CensusTable load_census(const std::string& path) { return parse_census(read_file(path)); }

std::string normalize_postal_code(std::string_view code) {
  std::string out;
  for (char ch : code) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '-') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return out;
}

PostalMap parse_postal_map(std::string_view csv_text) {
  auto t = parse_csv(csv_text);
  const auto c_pc = require_column(t, "postal_code", "postal map");
  const auto c_da = require_column(t, "da_id", "postal map");
  PostalMap out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw ParseError("postal map: wrong number of fields", t.lines[r]);
    auto code = normalize_postal_code(row[c_pc]);
    std::string da(trim(row[c_da]));
    if (code.empty() || da.empty()) throw ParseError("postal map: empty field", t.lines[r]);
    auto [it, inserted] = out.emplace(code, da);
    if (!inserted && it->second != da)
      throw ParseError("postal map: '" + code + "' maps to both " + it->second + " and " + da, t.lines[r]);
  }
  return out;
}

PostalMap load_postal_map(const std::string& path) { return parse_postal_map(read_file(path)); }

std::string_view to_string(IncomeGroup g) {
  switch (g) {
    case IncomeGroup::low: return "low";
    case IncomeGroup::mid: return "mid";
    case IncomeGroup::high: return "high";
  }
  return "";
}

std::string_view to_string(EduGroup g) { return g == EduGroup::low ? "low" : "high"; }

std::vector<CohortRecord> join_census(std::span<const RawRecord> records, const PostalMap& postal,
                                      const CensusTable& census, JoinReport* report) {
  JoinReport rep;
  std::vector<CohortRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    CohortRecord c;
    c.doc_id = r.doc_id;
    c.gender = r.gender;
    c.nationality = r.nationality;
    ++rep.total;
    if (r.nationality != Nationality::domestic) {
      ++rep.international;
    } else if (!r.postal_code || normalize_postal_code(*r.postal_code).empty()) {
      ++rep.missing_postal_code;
    } else if (auto p = postal.find(normalize_postal_code(*r.postal_code)); p == postal.end()) {
      ++rep.unmapped_postal_code;
    } else if (auto row = census.find(p->second); row == census.end()) {
      ++rep.unknown_da;
    } else {
      c.da_id = row->second.da_id;
      c.income = row->second.avg_income;
      c.edu = row->second.edu;
      ++rep.joined;
    }
    out.push_back(std::move(c));
  }
  if (report) *report = rep;
  return out;
}

void attach_topics(std::vector<CohortRecord>& records, std::span<const DocTopics> docs) {
  std::unordered_map<std::string, const DocTopics*> by_id;
  for (const auto& d : docs) by_id[d.doc_id] = &d;
  for (auto& r : records) {
    auto it = by_id.find(r.doc_id);
    r.topics = it == by_id.end() ? std::set<int>{} : it->second->topics;
  }
}

IncomeCuts income_groups(std::vector<CohortRecord>& records) {
  std::vector<double> incomes;
  for (const auto& r : records)
    if (r.income) incomes.push_back(*r.income);
  if (incomes.size() < 4) throw ValidationError("income grouping needs at least 4 records with income");
  std::sort(incomes.begin(), incomes.end());
  const auto n = incomes.size();
  auto rank = [n](double q) { return static_cast<std::size_t>(std::ceil(q * static_cast<double>(n))); };
  IncomeCuts cuts{incomes[rank(0.25) - 1], incomes[rank(0.75) - 1]};
  const bool flat = incomes.front() == incomes.back();
  if (flat) log_warning("all incomes are identical; every record is placed in the mid group");
  for (auto& r : records) {
    if (!r.income) {
      r.income_group.reset();
      continue;
    }
    if (flat)
      r.income_group = IncomeGroup::mid;
    else if (*r.income <= cuts.q1)
      r.income_group = IncomeGroup::low;
    else if (*r.income > cuts.q3)
      r.income_group = IncomeGroup::high;
    else
      r.income_group = IncomeGroup::mid;
  }
  return cuts;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  if (k == 0) throw ValidationError("kmeans: k must be >= 1");
  if (points.empty()) throw ValidationError("kmeans: no points");
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw ValidationError("kmeans: points differ in dimension");

  auto distinct = points;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < k)
    throw ValidationError("kmeans: " + std::to_string(distinct.size()) + " distinct points for k = " + std::to_string(k));

  KMeansResult res;
  Rng rng(seed);
  res.centroids.push_back(distinct[rng.index(distinct.size())]);
  std::vector<double> nearest(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) nearest[i] = sq_dist(distinct[i], res.centroids[0]);
  while (res.centroids.size() < k) {
    const auto far = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
    res.centroids.push_back(distinct[far]);
    for (std::size_t i = 0; i < distinct.size(); ++i)
      nearest[i] = std::min(nearest[i], sq_dist(distinct[i], res.centroids.back()));
  }

  res.labels.assign(points.size(), 0);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double objective = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (iter == 0 || res.labels[i] != best) changed = true;
      res.labels[i] = best;
      objective += best_d;
    }
    res.objective.push_back(objective);
    res.iterations = iter + 1;
    if (!changed) {
      res.converged = true;
      break;
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      ++counts[res.labels[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[res.labels[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) res.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  return res;
}

KMeansResult education_groups(std::vector<CohortRecord>& records, std::uint64_t seed) {
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> owners;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].edu) {
      points.emplace_back(records[i].edu->begin(), records[i].edu->end());
      owners.push_back(i);
    }
  if (points.size() < 2) throw ValidationError("education grouping needs at least 2 records with education data");
  auto res = kmeans(points, 2, seed);
  auto share = [&](std::size_t c) { return res.centroids[c][2] + res.centroids[c][3]; };
  const std::size_t high = share(1) > share(0) ? 1 : 0;
  for (auto& r : records) r.edu_group.reset();
  for (std::size_t i = 0; i < owners.size(); ++i)
    records[owners[i]].edu_group = res.labels[i] == high ? EduGroup::high : EduGroup::low;
  return res;
}

std::optional<Facet> parse_facet(std::string_view name) {
  if (name == "gender") return Facet::gender;
  if (name == "nationality") return Facet::nationality;
  if (name == "income") return Facet::income;
  if (name == "education") return Facet::education;
  return std::nullopt;
}

std::string_view to_string(Facet f) {
  switch (f) {
    case Facet::gender: return "gender";
    case Facet::nationality: return "nationality";
    case Facet::income: return "income";
    case Facet::education: return "education";
  }
  return "";
}

FacetSpec facet_spec(Facet f) {
  FacetSpec s;
  s.name = std::string(to_string(f));
  switch (f) {
    case Facet::gender:
      s.groups = {{"Males", [](const CohortRecord& r) { return r.gender == Gender::male; }},
                  {"Females", [](const CohortRecord& r) { return r.gender == Gender::female; }}};
      break;
    case Facet::nationality:
      s.groups = {{"Domestic", [](const CohortRecord& r) { return r.nationality == Nationality::domestic; }},
                  {"International", [](const CohortRecord& r) { return r.nationality == Nationality::international; }}};
      break;
    case Facet::income:
      s.groups = {{"Low", [](const CohortRecord& r) { return r.income_group == IncomeGroup::low; }},
                  {"Mid", [](const CohortRecord& r) { return r.income_group == IncomeGroup::mid; }},
                  {"High", [](const CohortRecord& r) { return r.income_group == IncomeGroup::high; }}};
      break;
    case Facet::education:
      s.groups = {{"Low Education", [](const CohortRecord& r) { return r.edu_group == EduGroup::low; }},
                  {"High Education", [](const CohortRecord& r) { return r.edu_group == EduGroup::high; }}};
      break;
  }
  if (s.groups.size() == 2) {
    s.pairs = {{0, 1}};
    s.pair_labels = {"Difference"};
  } else {
    s.pairs = {{0, 1}, {1, 2}, {0, 2}};
    s.pair_labels = {"L - M", "M - H", "L - H"};
  }
  return s;
}

DiffTable difference_table(std::span<const CohortRecord> records, std::span<const TopicSpec> specs, const FacetSpec& facet,
                           bool pooled) {
  const std::size_t g = facet.groups.size();
  if (g < 2 || g > 3) throw ValidationError("facet '" + facet.name + "' must define 2 or 3 groups");
  if (facet.pairs.size() != facet.pair_labels.size()) throw ValidationError("facet pairs and labels differ in length");

  DiffTable t;
  t.facet = facet.name;
  t.pairs = facet.pairs;
  t.pair_labels = facet.pair_labels;
  std::vector<std::vector<const CohortRecord*>> members(g);
  for (const auto& r : records)
    for (std::size_t i = 0; i < g; ++i)
      if (facet.groups[i].member(r)) members[i].push_back(&r);
  for (std::size_t i = 0; i < g; ++i) {
    if (members[i].empty()) throw ValidationError("group '" + facet.groups[i].label + "' of facet '" + facet.name + "' is empty");
    t.group_labels.push_back(facet.groups[i].label);
    t.group_sizes.push_back(members[i].size());
  }

  for (const auto& spec : specs) {
    DiffRow row;
    row.topic_id = spec.topic_id;
    row.topic = spec.name;
    for (std::size_t i = 0; i < g; ++i) {
      std::size_t c = 0;
      for (const auto* r : members[i]) c += r->topics.count(spec.topic_id);
      row.counts.push_back(c);
      row.proportions.push_back(static_cast<double>(c) / static_cast<double>(members[i].size()));
    }
    for (auto [a, b] : facet.pairs) {
      row.differences.push_back(row.proportions[a] - row.proportions[b]);
      row.tests.push_back(two_proportion_test(static_cast<double>(row.counts[a]), static_cast<double>(t.group_sizes[a]),
                                              static_cast<double>(row.counts[b]), static_cast<double>(t.group_sizes[b]),
                                              pooled));
    }
    t.rows.push_back(std::move(row));
  }

  for (std::size_t i = 0; i < g; ++i) {
    std::vector<double> n;
    for (const auto* r : members[i]) n.push_back(static_cast<double>(r->topics.size()));
    t.topic_counts.push_back(summarize(n));
  }
  for (auto [a, b] : facet.pairs) {
    const auto& x = t.topic_counts[a];
    const auto& y = t.topic_counts[b];
    if (!x.sd || !y.sd) {
      t.count_tests.emplace_back();
      continue;
    }
    t.count_tests.push_back(welch_t_test(x.mean, *x.sd, static_cast<double>(x.n), y.mean, *y.sd, static_cast<double>(y.n)));
  }
  return t;
}

std::vector<DiffTable> nested_difference_tables(std::span<const CohortRecord> records, std::span<const TopicSpec> specs,
                                                const FacetSpec& outer, const FacetSpec& inner, bool pooled) {
  std::vector<DiffTable> out;
  for (const auto& group : outer.groups) {
    std::vector<CohortRecord> subset;
    for (const auto& r : records)
      if (group.member(r)) subset.push_back(r);
    if (subset.empty()) throw ValidationError("group '" + group.label + "' of facet '" + outer.name + "' is empty");
    auto t = difference_table(subset, specs, inner, pooled);
    t.within = outer.name + "=" + group.label;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::vector<double>> income_education_table(std::span<const CohortRecord> records) {
  std::vector<std::vector<double>> t(3, std::vector<double>(2, 0.0));
  for (const auto& r : records)
    if (r.income_group && r.edu_group) t[static_cast<std::size_t>(*r.income_group)][static_cast<std::size_t>(*r.edu_group)] += 1;
  return t;
}

void write_diff_table_csv(std::ostream& out, const DiffTable& t) {
  std::vector<std::string> header{"topic_id", "topic"};
  for (const auto& g : t.group_labels) header.push_back(g);
  for (const auto& p : t.pair_labels) {
    header.push_back(p);
    header.push_back(p + " z");
    header.push_back(p + " p");
    header.push_back(p + " stars");
  }
  out << csv_row(header);
  for (const auto& r : t.rows) {
    std::vector<std::string> f{std::to_string(r.topic_id), r.topic};
    for (double p : r.proportions) f.push_back(format_double(p));
    for (std::size_t i = 0; i < r.differences.size(); ++i) {
      f.push_back(format_double(r.differences[i]));
      f.push_back(format_double(r.tests[i].statistic));
      f.push_back(format_double(r.tests[i].p_value));
      f.push_back(std::string(stars_text(r.tests[i].stars)));
    }
    out << csv_row(f);
  }
}

std::string format_diff_table(const DiffTable& t) {
  std::ostringstream out;
  out << "Topic occurrence frequencies by " << t.facet;
  if (!t.within.empty()) out << " (within " << t.within << ")";
  out << "\n";
  std::size_t name_w = 5;
  for (const auto& r : t.rows) name_w = std::max(name_w, r.topic.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::size_t col = 16;
  out << pad("", 4) << pad("Topic", name_w + 2);
  for (std::size_t i = 0; i < t.group_labels.size(); ++i)
    out << pad(t.group_labels[i] + " (n=" + std::to_string(t.group_sizes[i]) + ")", std::max(col, t.group_labels[i].size() + 12));
  for (const auto& p : t.pair_labels) out << pad(p, col);
  out << "\n";
  for (const auto& r : t.rows) {
    out << pad(std::to_string(r.topic_id), 4) << pad(r.topic, name_w + 2);
    for (std::size_t i = 0; i < r.proportions.size(); ++i)
      out << pad(percent(r.proportions[i]), std::max(col, t.group_labels[i].size() + 12));
    for (std::size_t i = 0; i < r.differences.size(); ++i)
      out << pad(percent(r.differences[i]) + std::string(stars_text(r.tests[i].stars)), col);
    out << "\n";
  }
  out << "Topics per response:";
  for (std::size_t i = 0; i < t.topic_counts.size(); ++i)
    out << (i ? "; " : " ") << t.group_labels[i] << " " << fixed(t.topic_counts[i].mean, 2);
  out << "\n";
  for (std::size_t i = 0; i < t.count_tests.size(); ++i) {
    out << "  " << t.pair_labels[i] << ": ";
    if (!t.count_tests[i]) {
      out << "not testable (a group has n = 1)\n";
      continue;
    }
    const auto& c = *t.count_tests[i];
    out << "t = " << fixed(c.statistic, 2) << ", d.f. = " << fixed(c.df.value_or(0), 0) << ", p = " << format_double(c.p_value)
        << " " << stars_text(c.stars) << "\n";
  }
  out << kStarLegend << "\n";
  return out.str();
}

namespace {

nlohmann::ordered_json test_json(const TestResult& r) {
  nlohmann::ordered_json j;
  j["statistic"] = std::isfinite(r.statistic) ? nlohmann::ordered_json(r.statistic)
                                               : nlohmann::ordered_json(r.statistic > 0 ? "inf" : "-inf");
  j["df"] = r.df ? nlohmann::ordered_json(*r.df) : nlohmann::ordered_json(nullptr);
  j["p_value"] = r.p_value;
  j["stars"] = stars_text(r.stars);
  if (r.degenerate) j["degenerate"] = true;
  if (r.infinite) j["infinite"] = true;
  return j;
}

}  // namespace

std::string diff_table_json(const DiffTable& t) {
  nlohmann::ordered_json j;
  j["facet"] = t.facet;
  if (!t.within.empty()) j["within"] = t.within;
  auto groups = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.group_labels.size(); ++i) {
    nlohmann::ordered_json g;
    g["label"] = t.group_labels[i];
    g["size"] = t.group_sizes[i];
    g["mean_topics"] = t.topic_counts[i].mean;
    g["sd_topics"] = t.topic_counts[i].sd ? nlohmann::ordered_json(*t.topic_counts[i].sd) : nlohmann::ordered_json(nullptr);
    groups.push_back(std::move(g));
  }
  j["groups"] = std::move(groups);
  j["pairs"] = t.pair_labels;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json row;
    row["topic_id"] = r.topic_id;
    row["topic"] = r.topic;
    row["counts"] = r.counts;
    row["proportions"] = r.proportions;
    auto diffs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.differences.size(); ++i) {
      auto d = test_json(r.tests[i]);
      d["pair"] = t.pair_labels[i];
      d["difference"] = r.differences[i];
      diffs.push_back(std::move(d));
    }
    row["differences"] = std::move(diffs);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  auto counts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.count_tests.size(); ++i) {
    nlohmann::ordered_json c = t.count_tests[i] ? test_json(*t.count_tests[i]) : nlohmann::ordered_json::object();
    c["pair"] = t.pair_labels[i];
    counts.push_back(std::move(c));
  }
  j["topic_count_tests"] = std::move(counts);
  j["legend"] = kStarLegend;
  return j.dump();
}

void write_cohort_csv(std::ostream& out, std::span<const CohortRecord> records) {
  out << "doc_id,gender,nationality,da_id,income,edu_high_school,edu_college,edu_bachelor,edu_advanced,income_group,"
         "edu_group,topics\n";
  for (const auto& r : records) {
    std::vector<std::string> f{r.doc_id, std::string(to_string(r.gender)), std::string(to_string(r.nationality)),
                               r.da_id.value_or(""), r.income ? format_double(*r.income) : ""};
    for (std::size_t i = 0; i < 4; ++i) f.push_back(r.edu ? format_double((*r.edu)[i]) : "");
    f.push_back(r.income_group ? std::string(to_string(*r.income_group)) : "");
    f.push_back(r.edu_group ? std::string(to_string(*r.edu_group)) : "");
    std::string list;
    for (int t : r.topics) list += (list.empty() ? "" : ";") + std::to_string(t);
    f.push_back(list);
    out << csv_row(f);
  }
}

}  // namespace topicforge
