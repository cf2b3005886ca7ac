#pragma once

#include "topicforge/assignment.hpp"
#include "topicforge/coherence.hpp"
#include "topicforge/cohorts.hpp"
#include "topicforge/corpus.hpp"
#include "topicforge/embedding.hpp"
#include "topicforge/lda.hpp"
#include "topicforge/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace topicforge {

namespace fs = std::filesystem;

// One JSON document per run. Relative paths resolve against the directory of
// the config file.
struct RunConfig {
  fs::path base_dir;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  struct Paths {
    fs::path corpus;
    std::optional<fs::path> census;
    std::optional<fs::path> postal_map;
    std::optional<fs::path> vectors;
    std::optional<fs::path> topic_specs;  // unset: built-in Table 2 specs
    std::optional<fs::path> stopwords;
    std::optional<fs::path> abbreviations;
    std::optional<fs::path> lemma_exceptions;
    fs::path output_dir = "out";
  } paths;

  ColumnSchema columns;

  struct Preprocess {
    std::size_t phrase_min_count = 30;  // 0 disables phrase promotion
    std::size_t phrase_max_n = 3;
    std::size_t min_df = 1;
    double max_df_ratio = 1.0;
    std::vector<std::string> extra_stopwords;
  } preprocess;

  LdaConfig lda;

  struct Sweep {
    std::size_t k_min = 1;
    std::size_t k_max = 30;
    std::size_t runs = 3;
    std::size_t window = 110;
    std::size_t top_n = 10;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> burn_in;
  } sweep;

  struct Analysis {
    bool pooled = true;
    std::size_t top_words = 10;
  } analysis;

  // Fails on the first problem: missing seed is caught at parse time,
  // missing files and bad parameters here.
  void validate() const;
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
  fs::path output_dir() const { return resolve(paths.output_dir); }
};

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir);
RunConfig load_run_config(const fs::path& path);
// Paths are written as given (relative ones stay relative).
std::string run_config_json(const RunConfig& config);

struct PreparedCorpus {
  std::vector<RawRecord> records;
  std::vector<RejectedRow> rejects;
  PhraseTable phrases;
  std::vector<TokenizedDoc> tokenized;
  Vocabulary vocab;
  std::vector<PreprocessedDoc> docs;

  std::vector<TokenStream> streams() const { return token_streams(docs); }
};

PreprocessOptions make_preprocess_options(const RunConfig& config);
Preprocessor make_preprocessor(const RunConfig& config);
PreparedCorpus prepare_records(std::vector<RawRecord> records, const RunConfig& config);
PreparedCorpus prepare_corpus(const RunConfig& config);

std::vector<TopicSpec> load_specs(const RunConfig& config);

struct AssignmentRun {
  std::vector<TopicSpec> specs;
  std::vector<DocumentAssignment> docs;

  std::vector<DocTopics> doc_topics() const;
  std::vector<SentenceAssignment> sentences() const;
};

AssignmentRun run_assignment(const PreparedCorpus& corpus, const VectorStore& store, std::vector<TopicSpec> specs,
                             unsigned threads = 1);

struct CohortRun {
  std::vector<CohortRecord> records;
  JoinReport report;
  std::optional<IncomeCuts> income_cuts;
  std::optional<KMeansResult> education;
  std::optional<TestResult> income_education;
};

// Joins census data when both tables are given, then derives income and
// education groups where enough records carry them.
CohortRun build_cohorts(std::span<const RawRecord> records, std::span<const DocTopics> topics, const CensusTable* census,
                        const PostalMap* postal, std::uint64_t seed);

std::vector<DiffTable> analyze_tables(const CohortRun& cohorts, std::span<const TopicSpec> specs, Facet facet,
                                      std::optional<Facet> within, bool pooled);

// Writes files under a root and keeps manifest.json (path -> FNV-1a hash)
// in sync. Entries from earlier commands are kept.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root);
  void write(const std::string& relative, std::string_view contents);
  const std::vector<std::string>& written() const { return written_; }
  // Rewrites manifest.json; called by every command when it finishes.
  void finish();

 private:
  fs::path root_;
  std::vector<std::string> written_;
  std::vector<std::pair<std::string, std::string>> hashes_;
};

// Batch commands. Each returns a JSON summary and writes under the
// configured output directory.
std::string cmd_preprocess(const RunConfig& config);
std::string cmd_sweep(const RunConfig& config);
// With partition_by, fits one model per distinct value of that corpus column
// under partitions/<value>/.
std::string cmd_fit(const RunConfig& config, std::size_t k,
                    const std::optional<std::string>& partition_by = std::nullopt);
std::string cmd_assign(const RunConfig& config);
std::string cmd_analyze(const RunConfig& config, Facet facet, std::optional<Facet> within);
std::string cmd_centers2d(const RunConfig& config);

struct SynthSpec {
  std::uint64_t seed = 1;
  std::optional<PlantedCorpusSpec> lda;
  std::optional<CohortSynthSpec> cohort;
};

SynthSpec parse_synth_spec(std::string_view json_text);
// Writes <out>/lda and <out>/cohort, each with its own config.json and
// planted.json ground truth.
std::string cmd_synth(const SynthSpec& spec, const fs::path& out_dir);

// Relative file names used by the commands.
std::string model_file(std::size_t k);
inline constexpr const char* kCurveFile = "coherence.csv";

}  // namespace topicforge
