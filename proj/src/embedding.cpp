#include "mijudge/embedding.hpp"

#include <bit>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "mijudge/error.hpp"

namespace mijudge {

namespace fs = std::filesystem;

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(const EmbedRequest& req) {
    if (req.texts.empty()) {
        throw Error(ErrorKind::Validation, "embed request has no texts");
    }
    if (req.model_id != model_id()) {
        throw Error(ErrorKind::Config, "embed request for model \"" + req.model_id +
                                           "\" sent to provider \"" + model_id() + "\"");
    }
    std::vector<std::string> texts = req.texts;
    for (auto& t : texts) {
        if (t.find_first_not_of(" \t\r\n") == std::string::npos) t = kEmptyTextMarker;
    }
    calls_.fetch_add(1);
    auto vectors = embed_impl(texts);
    if (vectors.size() != texts.size()) {
        throw Error(ErrorKind::Protocol,
                    "provider returned " + std::to_string(vectors.size()) + " vectors for " +
                        std::to_string(texts.size()) + " texts");
    }
    for (auto& v : vectors) {
        if (v.dim() != dim()) {
            throw Error(ErrorKind::Protocol, "provider returned dim " + std::to_string(v.dim()) +
                                                 ", expected " + std::to_string(dim()));
        }
        for (float x : v.values) {
            if (!std::isfinite(x)) {
                throw Error(ErrorKind::Protocol, "provider returned a non-finite value");
            }
        }
        v.model_id = model_id();
    }
    return vectors;
}

// --- offline hashed bag-of-tokens ---

namespace {

constexpr uint64_t kHashSeed = 0x6d694a6564676531ULL;

uint64_t fnv1a64(const std::string& token, uint64_t seed) {
    uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : token) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

OfflineHashEmbedder::OfflineHashEmbedder(int dim) : dim_(dim) {
    if (dim <= 0) throw Error(ErrorKind::Config, "embedding dim must be positive");
    model_id_ = "offline-hash-v1-" + std::to_string(dim);
}

std::vector<EmbeddingVector> OfflineHashEmbedder::embed_impl(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> buckets(dim_, 0.0);
        std::istringstream tokens(text);
        std::string token;
        bool any = false;
        while (tokens >> token) {
            buckets[fnv1a64(token, kHashSeed) % dim_] += 1.0;
            any = true;
        }
        if (!any) buckets[fnv1a64(kEmptyTextMarker, kHashSeed) % dim_] += 1.0;
        double norm = 0.0;
        for (double b : buckets) norm += b * b;
        norm = std::sqrt(norm);
        EmbeddingVector v;
        v.values.resize(dim_);
        for (int i = 0; i < dim_; ++i) v.values[i] = static_cast<float>(buckets[i] / norm);
        out.push_back(std::move(v));
    }
    return out;
}

// --- remote provider ---

namespace {

// Caps in-flight requests per provider instance.
class ConcurrencyGate {
  public:
    explicit ConcurrencyGate(int limit) : available_(limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        ready_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++available_;
        }
        ready_.notify_one();
    }

  private:
    std::mutex mutex_;
    std::condition_variable ready_;
    int available_;
};

struct GateGuard {
    ConcurrencyGate& gate;
    explicit GateGuard(ConcurrencyGate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
};

}  // namespace

struct HttpEmbedder::Gate : ConcurrencyGate {
    using ConcurrencyGate::ConcurrencyGate;
};

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error(ErrorKind::Config, "embedding provider needs a base_url");
    }
    if (config_.max_concurrent < 1) {
        throw Error(ErrorKind::Config, "max_concurrent must be >= 1");
    }
    gate_ = std::make_shared<Gate>(config_.max_concurrent);
}

std::vector<EmbeddingVector> HttpEmbedder::embed_impl(const std::vector<std::string>& texts) {
    GateGuard guard(*gate_);
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

    nlohmann::json body;
    body["model"] = config_.model;
    body["input"] = texts;

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::Transport,
                    "embedding request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 401 || res->status == 403) {
        throw Error(ErrorKind::Config, "embedding provider rejected credentials (HTTP " +
                                           std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
        throw Error(ErrorKind::Transport,
                    "embedding provider unavailable (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        throw Error(ErrorKind::Protocol,
                    "embedding provider answered HTTP " + std::to_string(res->status));
    }

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Protocol, std::string("embedding response is not JSON: ") + e.what());
    }
    if (!doc.contains("data") || !doc.at("data").is_array()) {
        throw Error(ErrorKind::Protocol, "embedding response has no data array");
    }
    std::vector<EmbeddingVector> out;
    for (const auto& item : doc.at("data")) {
        if (!item.contains("embedding") || !item.at("embedding").is_array()) {
            throw Error(ErrorKind::Protocol, "embedding response item has no embedding");
        }
        EmbeddingVector v;
        v.values.reserve(item.at("embedding").size());
        for (const auto& x : item.at("embedding")) v.values.push_back(x.get<float>());
        out.push_back(std::move(v));
    }
    return out;
}

// --- cache ---

EmbeddingCache::EmbeddingCache(std::string directory) : dir_(std::move(directory)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create cache directory " + dir_);
}

std::string EmbeddingCache::key_hash(const std::string& model_id, const std::string& text) {
    const std::string key = model_id + "\x1f" + text;
    // Two independently seeded 64-bit hashes give a 128-bit filename.
    uint64_t a = fnv1a64(key, 0x9e3779b97f4a7c15ULL);
    uint64_t b = fnv1a64(key, 0xc2b2ae3d27d4eb4fULL);
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return buf;
}

namespace {

void put_u32_le(uint32_t x, std::string& out) {
    out.push_back(static_cast<char>(x & 0xFF));
    out.push_back(static_cast<char>((x >> 8) & 0xFF));
    out.push_back(static_cast<char>((x >> 16) & 0xFF));
    out.push_back(static_cast<char>((x >> 24) & 0xFF));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

bool EmbeddingCache::read_entry(const std::string& path, const std::string& model_id,
                                EmbeddingVector& out) const {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4) {
        corruptions_.fetch_add(1);
        return false;
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    uint32_t dim = get_u32_le(p);
    size_t need = 4 + static_cast<size_t>(dim) * 4;
    if (dim == 0 || bytes.size() < need) {
        corruptions_.fetch_add(1);
        return false;
    }
    std::string footer = bytes.substr(need);
    if (footer != model_id) {
        corruptions_.fetch_add(1);
        return false;
    }
    out.values.resize(dim);
    for (uint32_t i = 0; i < dim; ++i) {
        out.values[i] = std::bit_cast<float>(get_u32_le(p + 4 + i * 4));
    }
    out.model_id = model_id;
    return true;
}

void EmbeddingCache::write_entry(const std::string& path, const EmbeddingVector& v) {
    std::string bytes;
    bytes.reserve(4 + v.values.size() * 4 + v.model_id.size());
    put_u32_le(static_cast<uint32_t>(v.values.size()), bytes);
    for (float x : v.values) put_u32_le(std::bit_cast<uint32_t>(x), bytes);
    bytes += v.model_id;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorKind::Io, "cannot write cache entry " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot move cache entry into place: " + ec.message());
}

std::vector<EmbeddingVector> EmbeddingCache::cached_embed(EmbeddingProvider& provider,
                                                          const std::vector<std::string>& texts) {
    const std::string model = provider.model_id();
    std::vector<EmbeddingVector> result(texts.size());
    std::vector<size_t> missing;

    for (size_t i = 0; i < texts.size(); ++i) {
        const std::string path = dir_ + "/" + key_hash(model, texts[i]);
        if (read_entry(path, model, result[i])) {
            hits_.fetch_add(1);
        } else {
            missing.push_back(i);
        }
    }

    if (!missing.empty()) {
        EmbedRequest req;
        req.model_id = model;
        for (size_t i : missing) req.texts.push_back(texts[i]);
        auto fresh = provider.embed_batch(req);
        std::lock_guard<std::mutex> lock(write_mutex_);
        for (size_t j = 0; j < missing.size(); ++j) {
            result[missing[j]] = fresh[j];
            write_entry(dir_ + "/" + key_hash(model, texts[missing[j]]), fresh[j]);
        }
    }
    return result;
}

}  // namespace mijudge
