#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mijudge/embedding.hpp"
#include "mijudge/label.hpp"

namespace mijudge {

struct FewShotExample {
    std::string example_id;
    std::string conversation_text;
    std::string response_text;
    Label label = Label::No;
    EmbeddingVector vector;
};

struct RetrievedExample {
    FewShotExample example;
    double score = 0.0;  // cosine(query, example.vector)
};

double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// Exact exhaustive-scan index over the annotated pool. The pool is small
// (a few thousand examples), so brute force keeps retrieval free of any
// approximation while staying fast.
class VectorStore {
  public:
    // First insert fixes the store dimension; re-inserting an id replaces
    // its entry.
    void upsert(FewShotExample example);

    size_t size() const { return entries_.size(); }
    int dim() const { return dim_; }

    // min(k, size) results, score descending, ties by example_id ascending.
    // Ids in `exclude` never appear (self-query exclusion).
    std::vector<RetrievedExample> top_k(const EmbeddingVector& query, int k,
                                        const std::set<std::string>& exclude = {}) const;

    void persist(const std::string& path) const;
    static VectorStore load(const std::string& path);

    const std::vector<FewShotExample>& entries() const { return entries_; }

  private:
    std::vector<FewShotExample> entries_;
    std::unordered_map<std::string, size_t> index_by_id_;
    int dim_ = 0;
};

}  // namespace mijudge
