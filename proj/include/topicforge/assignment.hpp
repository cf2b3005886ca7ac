#pragma once

#include "topicforge/corpus.hpp"
#include "topicforge/embedding.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace topicforge {

struct SentenceAssignment {
  std::string doc_id;
  std::size_t sentence_index = 0;
  int best_topic = 0;
  double similarity = 0;
  bool accepted = false;
};

struct DocTopics {
  std::string doc_id;
  std::set<int> topics;
  std::size_t n_topics() const { return topics.size(); }
};

struct DocumentAssignment {
  DocTopics topics;
  // Only sentences that have a sentence vector.
  std::vector<SentenceAssignment> sentences;
};

// Nearest center by cosine similarity (ties go to the lowest topic id);
// accepted iff similarity >= that topic's threshold. Specs must have their
// centers resolved.
SentenceAssignment assign_sentence(std::span<const double> svec, std::span<const TopicSpec> specs);

DocumentAssignment assign_document(const TokenizedDoc& doc, const VectorStore& store, std::span<const TopicSpec> specs);
DocumentAssignment assign_document(const PreprocessedDoc& doc, const Vocabulary& vocab, const VectorStore& store,
                                   std::span<const TopicSpec> specs);
std::vector<DocumentAssignment> assign_documents(std::span<const TokenizedDoc> docs, const VectorStore& store,
                                                 std::span<const TopicSpec> specs, unsigned threads = 0);

using CohortPredicate = std::function<bool(const std::string& doc_id)>;

struct TopicFrequencies {
  std::vector<int> topic_ids;
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  std::size_t cohort_size = 0;
};

// Share of cohort documents whose topic set contains each topic. Throws on
// an empty cohort.
TopicFrequencies topic_frequencies(std::span<const DocTopics> docs, std::span<const int> topic_ids,
                                   const CohortPredicate& cohort);

struct CountSummary {
  double mean = 0;
  std::optional<double> sd;  // sample sd; absent when n == 1
  std::size_t n = 0;
};

CountSummary mean_topic_count(std::span<const DocTopics> docs, const CohortPredicate& cohort);
CountSummary summarize(std::span<const double> values);

// doc_id,sentence_index,best_topic,similarity,accepted
void write_sentence_csv(std::ostream& out, std::span<const SentenceAssignment> rows);
// doc_id,topics (semicolon-separated ids)
void write_doc_topics_csv(std::ostream& out, std::span<const DocTopics> docs);
std::vector<DocTopics> read_doc_topics_csv(std::string_view text);

}  // namespace topicforge
