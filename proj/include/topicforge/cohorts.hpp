#pragma once

#include "topicforge/assignment.hpp"
#include "topicforge/corpus.hpp"
#include "topicforge/embedding.hpp"
#include "topicforge/stats.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace topicforge {

// high_school, college, bachelor, advanced
using EduVector = std::array<double, 4>;

struct CensusRow {
  std::string da_id;
  double avg_income = 0;
  EduVector edu{};
};

using CensusTable = std::map<std::string, CensusRow>;
using PostalMap = std::map<std::string, std::string>;

// census.csv: da_id,avg_income,edu_high_school,edu_college,edu_bachelor,edu_advanced
CensusTable parse_census(std::string_view csv_text);
CensusTable load_census(const std::string& path);
// postal_to_da.csv: postal_code,da_id. Codes are normalized on load.
PostalMap parse_postal_map(std::string_view csv_text);
PostalMap load_postal_map(const std::string& path);
// Uppercase, whitespace and hyphens removed.
std::string normalize_postal_code(std::string_view code);

enum class IncomeGroup { low, mid, high };
enum class EduGroup { low, high };
std::string_view to_string(IncomeGroup g);
std::string_view to_string(EduGroup g);

struct CohortRecord {
  std::string doc_id;
  Gender gender = Gender::unspecified;
  Nationality nationality = Nationality::domestic;
  std::optional<std::string> da_id;
  std::optional<double> income;
  std::optional<EduVector> edu;
  std::optional<IncomeGroup> income_group;
  std::optional<EduGroup> edu_group;
  std::set<int> topics;
};

struct JoinReport {
  std::size_t total = 0;
  std::size_t joined = 0;
  std::size_t international = 0;
  std::size_t missing_postal_code = 0;
  std::size_t unmapped_postal_code = 0;
  std::size_t unknown_da = 0;
};

// Only domestic records are joined; every record is kept.
std::vector<CohortRecord> join_census(std::span<const RawRecord> records, const PostalMap& postal,
                                      const CensusTable& census, JoinReport* report = nullptr);

// Copies topic sets by doc_id; documents without an assignment keep an
// empty set.
void attach_topics(std::vector<CohortRecord>& records, std::span<const DocTopics> docs);

struct IncomeCuts {
  double q1 = 0;  // low: income <= q1
  double q3 = 0;  // high: income > q3
};

// Nearest-rank quartiles over the records that carry an income. Needs at
// least 4 such records. Identical incomes put everyone in mid.
IncomeCuts income_groups(std::vector<CohortRecord>& records);

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> labels;
  // Sum of squared distances after each assignment step.
  std::vector<double> objective;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with farthest-point seeding. The first centroid is drawn
// with `seed` from the sorted distinct points. Throws if there are fewer
// distinct points than k.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 300);

// Two clusters over records with education vectors; the cluster with the
// larger bachelor + advanced centroid share is "high".
KMeansResult education_groups(std::vector<CohortRecord>& records, std::uint64_t seed);

enum class Facet { gender, nationality, income, education };
std::optional<Facet> parse_facet(std::string_view name);
std::string_view to_string(Facet f);

struct FacetGroup {
  std::string label;
  std::function<bool(const CohortRecord&)> member;
};

struct FacetSpec {
  std::string name;
  std::vector<FacetGroup> groups;
  // First minus second, in this order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::string> pair_labels;
};

FacetSpec facet_spec(Facet f);

struct DiffRow {
  int topic_id = 0;
  std::string topic;
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  std::vector<double> differences;
  std::vector<TestResult> tests;
};

struct DiffTable {
  std::string facet;
  std::string within;  // "<facet>=<group>" for nested tables
  std::vector<std::string> group_labels;
  std::vector<std::size_t> group_sizes;
  std::vector<std::string> pair_labels;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<DiffRow> rows;
  // Topics mentioned per document.
  std::vector<CountSummary> topic_counts;
  std::vector<std::optional<TestResult>> count_tests;
};

DiffTable difference_table(std::span<const CohortRecord> records, std::span<const TopicSpec> specs, const FacetSpec& facet,
                           bool pooled = true);
// One table per outer group, comparing the inner facet within it.
std::vector<DiffTable> nested_difference_tables(std::span<const CohortRecord> records, std::span<const TopicSpec> specs,
                                                const FacetSpec& outer, const FacetSpec& inner, bool pooled = true);

// 3x2 contingency of income group by education group.
std::vector<std::vector<double>> income_education_table(std::span<const CohortRecord> records);

// Wide CSV: topic_id,topic,<group>...,<pair>,<pair>_z,<pair>_p,<pair>_stars...
void write_diff_table_csv(std::ostream& out, const DiffTable& table);
// Fixed-width text report ending with the star legend.
std::string format_diff_table(const DiffTable& table);
std::string diff_table_json(const DiffTable& table);

// doc_id,gender,nationality,da_id,income,edu_*,income_group,edu_group,topics
void write_cohort_csv(std::ostream& out, std::span<const CohortRecord> records);

}  // namespace topicforge
