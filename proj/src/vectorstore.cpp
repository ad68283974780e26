#include "mijudge/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mijudge/error.hpp"

namespace mijudge {

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim() != v.dim()) {
        throw Error(ErrorKind::Dimension, "cosine of dim " + std::to_string(u.dim()) + " vs " +
                                              std::to_string(v.dim()));
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (int i = 0; i < u.dim(); ++i) {
        dot += static_cast<double>(u.values[i]) * v.values[i];
        nu += static_cast<double>(u.values[i]) * u.values[i];
        nv += static_cast<double>(v.values[i]) * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw Error(ErrorKind::Domain, "cosine of a zero vector");
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

void VectorStore::upsert(FewShotExample example) {
    if (entries_.empty()) {
        dim_ = example.vector.dim();
        if (dim_ <= 0) throw Error(ErrorKind::Dimension, "cannot index an empty vector");
    } else if (example.vector.dim() != dim_) {
        throw Error(ErrorKind::Dimension, "vector dim " + std::to_string(example.vector.dim()) +
                                              " does not match store dim " +
                                              std::to_string(dim_));
    }
    auto it = index_by_id_.find(example.example_id);
    if (it != index_by_id_.end()) {
        entries_[it->second] = std::move(example);
        return;
    }
    index_by_id_.emplace(example.example_id, entries_.size());
    entries_.push_back(std::move(example));
}

std::vector<RetrievedExample> VectorStore::top_k(const EmbeddingVector& query, int k,
                                                 const std::set<std::string>& exclude) const {
    if (entries_.empty()) throw Error(ErrorKind::State, "vector store is empty");
    if (k < 1) throw Error(ErrorKind::Domain, "k must be >= 1");

    std::vector<std::pair<double, const FewShotExample*>> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (exclude.count(e.example_id)) continue;
        scored.emplace_back(cosine(query, e.vector), &e);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->example_id < b.second->example_id;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(k);

    std::vector<RetrievedExample> out;
    out.reserve(scored.size());
    for (const auto& [score, example] : scored) {
        out.push_back(RetrievedExample{*example, score});
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'M', 'I', 'V', 'S'};
constexpr uint32_t kVersion = 1;

void put_u32(uint32_t x, std::ostream& out) {
    char b[4] = {static_cast<char>(x & 0xFF), static_cast<char>((x >> 8) & 0xFF),
                 static_cast<char>((x >> 16) & 0xFF), static_cast<char>((x >> 24) & 0xFF)};
    out.write(b, 4);
}

void put_u64(uint64_t x, std::ostream& out) {
    put_u32(static_cast<uint32_t>(x & 0xFFFFFFFFULL), out);
    put_u32(static_cast<uint32_t>(x >> 32), out);
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64(const unsigned char* p) {
    return static_cast<uint64_t>(get_u32(p)) | (static_cast<uint64_t>(get_u32(p + 4)) << 32);
}

}  // namespace

void VectorStore::persist(const std::string& path) const {
    if (entries_.empty()) throw Error(ErrorKind::State, "refusing to persist an empty store");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open store file for writing: " + path);

    out.write(kMagic, 4);
    put_u32(kVersion, out);
    put_u32(static_cast<uint32_t>(dim_), out);
    put_u64(entries_.size(), out);
    for (const auto& e : entries_) {
        for (float x : e.vector.values) put_u32(std::bit_cast<uint32_t>(x), out);
    }

    nlohmann::json trailer = nlohmann::json::array();
    for (const auto& e : entries_) {
        trailer.push_back({{"id", e.example_id},
                           {"label", std::string(canonical_label(e.label))},
                           {"conversation", e.conversation_text},
                           {"response", e.response_text},
                           {"model_id", e.vector.model_id}});
    }
    out << trailer.dump();
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

VectorStore VectorStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open store file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    constexpr size_t kHeader = 4 + 4 + 4 + 8;
    if (bytes.size() < kHeader) {
        throw Error(ErrorKind::Format, "store file truncated: " + path);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) {
        throw Error(ErrorKind::Format, "not a vector store file: " + path);
    }
    if (get_u32(p + 4) != kVersion) {
        throw Error(ErrorKind::Format,
                    "unsupported store version " + std::to_string(get_u32(p + 4)));
    }
    uint32_t dim = get_u32(p + 8);
    uint64_t count = get_u64(p + 12);
    size_t float_bytes = static_cast<size_t>(dim) * count * 4;
    if (dim == 0 || bytes.size() < kHeader + float_bytes) {
        throw Error(ErrorKind::Format, "store file truncated: " + path);
    }

    nlohmann::json trailer;
    try {
        trailer = nlohmann::json::parse(bytes.substr(kHeader + float_bytes));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Format, std::string("store metadata corrupt: ") + e.what());
    }
    if (!trailer.is_array() || trailer.size() != count) {
        throw Error(ErrorKind::Format, "store metadata does not match vector count");
    }

    VectorStore store;
    const unsigned char* floats = p + kHeader;
    for (uint64_t i = 0; i < count; ++i) {
        FewShotExample e;
        const auto& meta = trailer[i];
        e.example_id = meta.at("id").get<std::string>();
        auto label = match_label(meta.at("label").get<std::string>());
        if (!label) {
            throw Error(ErrorKind::Format,
                        "store holds unknown label " + meta.at("label").dump());
        }
        e.label = *label;
        e.conversation_text = meta.at("conversation").get<std::string>();
        e.response_text = meta.at("response").get<std::string>();
        e.vector.model_id = meta.value("model_id", std::string{});
        e.vector.values.resize(dim);
        for (uint32_t j = 0; j < dim; ++j) {
            e.vector.values[j] = std::bit_cast<float>(get_u32(floats + (i * dim + j) * 4));
        }
        store.upsert(std::move(e));
    }
    if (store.size() != count) {
        throw Error(ErrorKind::Format, "store holds duplicate example ids");
    }
    return store;
}

}  // namespace mijudge
