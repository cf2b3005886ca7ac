#include "topicforge/assignment.hpp"

#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/parallel.hpp"

#include <cmath>
#include <ostream>

namespace topicforge {

SentenceAssignment assign_sentence(std::span<const double> svec, std::span<const TopicSpec> specs) {
  if (specs.empty()) throw ValidationError("assign_sentence: no topic specs");
  SentenceAssignment out;
  bool first = true;
  for (const auto& spec : specs) {
    if (!spec.center) throw Error("topic " + std::to_string(spec.topic_id) + " has no resolved center");
    const double sim = cosine_similarity(svec, *spec.center);
    if (first || sim > out.similarity || (sim == out.similarity && spec.topic_id < out.best_topic)) {
      out.best_topic = spec.topic_id;
      out.similarity = sim;
      out.accepted = sim >= spec.threshold;
      first = false;
    }
  }
  return out;
}

DocumentAssignment assign_document(const TokenizedDoc& doc, const VectorStore& store, std::span<const TopicSpec> specs) {
  DocumentAssignment out;
  out.topics.doc_id = doc.doc_id;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    auto svec = sentence_vector(store, doc.sentences[i]);
    if (!svec) continue;
    auto a = assign_sentence(*svec, specs);
    a.doc_id = doc.doc_id;
    a.sentence_index = i;
    if (a.accepted) out.topics.topics.insert(a.best_topic);
    out.sentences.push_back(std::move(a));
  }
  return out;
}

DocumentAssignment assign_document(const PreprocessedDoc& doc, const Vocabulary& vocab, const VectorStore& store,
                                   std::span<const TopicSpec> specs) {
  TokenizedDoc t{doc.doc_id, {}};
  for (const auto& s : doc.sentences) {
    Sentence words;
    for (TokenId id : s) words.push_back(vocab.token(id));
    t.sentences.push_back(std::move(words));
  }
  return assign_document(t, store, specs);
}

std::vector<DocumentAssignment> assign_documents(std::span<const TokenizedDoc> docs, const VectorStore& store,
                                                 std::span<const TopicSpec> specs, unsigned threads) {
  std::vector<DocumentAssignment> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = assign_document(docs[i], store, specs); });
  return out;
}

TopicFrequencies topic_frequencies(std::span<const DocTopics> docs, std::span<const int> topic_ids,
                                   const CohortPredicate& cohort) {
  TopicFrequencies f;
  f.topic_ids.assign(topic_ids.begin(), topic_ids.end());
  f.counts.assign(topic_ids.size(), 0);
  for (const auto& d : docs) {
    if (!cohort(d.doc_id)) continue;
    ++f.cohort_size;
    for (std::size_t t = 0; t < topic_ids.size(); ++t)
      if (d.topics.count(topic_ids[t])) ++f.counts[t];
  }
  if (f.cohort_size == 0) throw ValidationError("topic_frequencies: cohort selects no documents");
  for (auto c : f.counts) f.proportions.push_back(static_cast<double>(c) / static_cast<double>(f.cohort_size));
  return f;
}

CountSummary summarize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot summarize an empty sample");
  CountSummary s;
  s.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

CountSummary mean_topic_count(std::span<const DocTopics> docs, const CohortPredicate& cohort) {
  std::vector<double> counts;
  for (const auto& d : docs)
    if (cohort(d.doc_id)) counts.push_back(static_cast<double>(d.n_topics()));
  if (counts.empty()) throw ValidationError("mean_topic_count: cohort selects no documents");
  return summarize(counts);
}

void write_sentence_csv(std::ostream& out, std::span<const SentenceAssignment> rows) {
  out << "doc_id,sentence_index,best_topic,similarity,accepted\n";
  for (const auto& r : rows)
    out << csv_row({r.doc_id, std::to_string(r.sentence_index), std::to_string(r.best_topic), format_double(r.similarity),
                    r.accepted ? "true" : "false"});
}

void write_doc_topics_csv(std::ostream& out, std::span<const DocTopics> docs) {
  out << "doc_id,topics\n";
  for (const auto& d : docs) {
    std::string list;
    for (int t : d.topics) {
      if (!list.empty()) list += ';';
      list += std::to_string(t);
    }
    out << csv_row({d.doc_id, list});
  }
}

std::vector<DocTopics> read_doc_topics_csv(std::string_view text) {
  auto table = parse_csv(text);
  const auto id_col = table.column("doc_id");
  const auto topics_col = table.column("topics");
  if (!id_col || !topics_col) throw ValidationError("document topics CSV needs columns doc_id,topics");
  std::vector<DocTopics> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    DocTopics d{row.at(*id_col), {}};
    std::string_view list = row.at(*topics_col);
    while (!list.empty()) {
      auto pos = list.find(';');
      auto item = list.substr(0, pos);
      try {
        d.topics.insert(static_cast<int>(parse_int(item, "topic id")));
      } catch (const Error& e) {
        throw ParseError(e.what(), table.lines[r]);
      }
      list = pos == std::string_view::npos ? std::string_view{} : list.substr(pos + 1);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace topicforge
