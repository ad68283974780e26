#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace mijudge {

struct EmbeddingVector {
    std::vector<float> values;
    std::string model_id;

    int dim() const { return static_cast<int>(values.size()); }
};

struct EmbedRequest {
    std::vector<std::string> texts;
    std::string model_id;
};

// Texts that tokenize to nothing are embedded as this marker so the store
// never holds a zero vector.
inline constexpr const char* kEmptyTextMarker = "[EMPTY]";

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string model_id() const = 0;
    virtual int dim() const = 0;

    // One vector per text, order preserved, all of dim(). Throws
    // Error{Transport} on network failure, Error{Protocol} on a wrong-shape
    // answer, Error{Config} on auth problems.
    std::vector<EmbeddingVector> embed_batch(const EmbedRequest& req);

    int call_count() const { return calls_.load(); }

  protected:
    virtual std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) = 0;

  private:
    std::atomic<int> calls_{0};
};

// Deterministic hashed bag-of-tokens embedder: whitespace tokens, each
// hashed into one of `dim` buckets, counts L2-normalized. Same text gives
// the same vector in every process.
class OfflineHashEmbedder : public EmbeddingProvider {
  public:
    explicit OfflineHashEmbedder(int dim = 256);

    std::string model_id() const override { return model_id_; }
    int dim() const override { return dim_; }

  protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override;

  private:
    int dim_;
    std::string model_id_;
};

struct HttpEmbedderConfig {
    std::string base_url;             // e.g. "https://api.example.com"
    std::string path = "/v1/embeddings";
    std::string model = "text-embedding-3-small";
    int dim = 1536;
    std::string api_key;              // empty = no Authorization header
    int timeout_ms = 30000;
    int max_concurrent = 4;
};

// POST {model, input:[...]} -> {data:[{embedding:[...]}]}. In-flight
// requests are capped at config.max_concurrent.
class HttpEmbedder : public EmbeddingProvider {
  public:
    explicit HttpEmbedder(HttpEmbedderConfig config);

    std::string model_id() const override { return config_.model; }
    int dim() const override { return config_.dim; }

  protected:
    std::vector<EmbeddingVector> embed_impl(const std::vector<std::string>& texts) override;

  private:
    struct Gate;
    HttpEmbedderConfig config_;
    std::shared_ptr<Gate> gate_;
};

// Content-addressed on-disk cache: one file per (model_id, text) key,
// filename the hex key hash, payload dim + little-endian float32 values +
// the model id as a trailer. A corrupt entry is dropped and recomputed.
class EmbeddingCache {
  public:
    explicit EmbeddingCache(std::string directory);

    std::vector<EmbeddingVector> cached_embed(EmbeddingProvider& provider,
                                              const std::vector<std::string>& texts);

    int hit_count() const { return hits_; }
    int corruption_count() const { return corruptions_; }

    static std::string key_hash(const std::string& model_id, const std::string& text);

  private:
    bool read_entry(const std::string& path, const std::string& model_id,
                    EmbeddingVector& out) const;
    void write_entry(const std::string& path, const EmbeddingVector& v);

    std::string dir_;
    std::mutex write_mutex_;
    std::atomic<int> hits_{0};
    mutable std::atomic<int> corruptions_{0};
};

}  // namespace mijudge
