#include "percept/memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace percept {

std::string to_string(ConsolidationStrategy s) {
    switch (s) {
        case ConsolidationStrategy::ForgetOldest: return "forget_oldest";
        case ConsolidationStrategy::ForgetLeastSurprise: return "forget_least_surprise";
        case ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent:
            return "forget_least_surprise_merge_adjacent";
    }
    return "unknown";
}

ConsolidationStrategy strategy_from_string(const std::string& s) {
    if (s == "forget_oldest") return ConsolidationStrategy::ForgetOldest;
    if (s == "forget_least_surprise") return ConsolidationStrategy::ForgetLeastSurprise;
    if (s == "forget_least_surprise_merge_adjacent") {
        return ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent;
    }
    throw std::invalid_argument("unknown consolidation strategy: " + s);
}

std::size_t LongTermMemory::total_tokens() const {
    std::size_t total = 0;
    for (const auto& item : items) total += item.tokens.count;
    return total;
}

namespace {

std::size_t argmin_surprise(const std::vector<MemoryItem>& items) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].surprise < items[best].surprise) best = i;  // tie -> oldest
    }
    return best;
}

// Pool-and-keep-max merge: concatenated tokens in timestamp order,
// recompressed down to the larger of the two token counts; surprise is the
// max of the pair. Merged items stay eligible for further merging.
MemoryItem merge_pair(const MemoryItem& a, const MemoryItem& b) {
    const MemoryItem& first = a.timestamp <= b.timestamp ? a : b;
    const MemoryItem& second = a.timestamp <= b.timestamp ? b : a;
    TokenGrid merged(first.tokens.count + second.tokens.count, first.tokens.dim);
    std::copy(first.tokens.data.begin(), first.tokens.data.end(), merged.data.begin());
    std::copy(second.tokens.data.begin(), second.tokens.data.end(),
              merged.data.begin() + static_cast<std::ptrdiff_t>(first.tokens.data.size()));
    const std::size_t target = std::max(first.tokens.count, second.tokens.count);
    while (merged.count > target) merged = mean_pool_pairs(merged);
    MemoryItem out;
    out.timestamp = first.timestamp;
    out.tokens = std::move(merged);
    out.surprise = std::max(first.surprise, second.surprise);
    out.compressed = true;
    out.annotation = first.annotation;
    return out;
}

}  // namespace

void consolidate(LongTermMemory& memory) {
    for (const auto& item : memory.items) {
        if (item.tokens.count > memory.token_budget) {
            throw std::runtime_error("consolidate: token budget smaller than a single item");
        }
    }
    while (memory.total_tokens() > memory.token_budget && !memory.items.empty()) {
        switch (memory.strategy) {
            case ConsolidationStrategy::ForgetOldest:
                memory.items.erase(memory.items.begin());  // items are timestamp-ordered
                break;
            case ConsolidationStrategy::ForgetLeastSurprise:
                memory.items.erase(memory.items.begin() +
                                   static_cast<std::ptrdiff_t>(argmin_surprise(memory.items)));
                break;
            case ConsolidationStrategy::ForgetLeastSurpriseMergeAdjacent: {
                const std::size_t i = argmin_surprise(memory.items);
                const bool has_prev = i > 0;
                const bool has_next = i + 1 < memory.items.size();
                if (!has_prev && !has_next) {
                    memory.items.erase(memory.items.begin() + static_cast<std::ptrdiff_t>(i));
                    break;
                }
                std::size_t j;
                if (has_prev && has_next) {
                    // merge with the calmer neighbor, earlier on a tie
                    j = memory.items[i - 1].surprise <= memory.items[i + 1].surprise ? i - 1
                                                                                     : i + 1;
                } else {
                    j = has_prev ? i - 1 : i + 1;
                }
                const std::size_t lo = std::min(i, j), hi = std::max(i, j);
                MemoryItem merged = merge_pair(memory.items[lo], memory.items[hi]);
                memory.items[lo] = std::move(merged);
                memory.items.erase(memory.items.begin() + static_cast<std::ptrdiff_t>(hi));
                break;
            }
        }
    }
}

WorkingMemory retrieve(const LongTermMemory& memory, const FeatureVector& query, std::size_t k) {
    if (k < 1) throw std::invalid_argument("retrieve: K must be >= 1");
    WorkingMemory wm;
    if (memory.items.empty()) return wm;
    struct Scored {
        double similarity;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(memory.items.size());
    for (std::size_t i = 0; i < memory.items.size(); ++i) {
        const auto pooled = pooled_feature(memory.items[i].tokens);
        scored.push_back({1.0 - cosine_distance(query, pooled), i});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.index < b.index;  // tie -> earlier timestamp
    });
    scored.resize(std::min(k, scored.size()));
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.index < b.index; });
    for (const auto& s : scored) wm.items.push_back(memory.items[s.index]);
    return wm;
}

MemoryEngine::MemoryEngine(EngineConfig config, SurpriseEstimator estimator)
    : config_(config), estimator_(estimator) {
    long_term_.token_budget = config_.token_budget;
    long_term_.strategy = config_.strategy;
}

std::size_t MemoryEngine::current_token_count() const {
    std::size_t total = long_term_.total_tokens();
    for (const auto& [frame, s] : sensory_) total += frame.grid.count;
    return total;
}

void MemoryEngine::ingest(const LatentFrame& frame) {
    if (frame.timestamp != expected_timestamp_) {
        throw std::invalid_argument("ingest: out-of-order timestamp");
    }
    expected_timestamp_ = frame.timestamp + 1;
    const double surprise = prev_ ? estimator_.score(*prev_, frame) : 0.0;
    prev_ = frame;
    sensory_.emplace_back(frame, surprise);
    peak_tokens_ = std::max(peak_tokens_, current_token_count());
    if (trace_enabled_) {
        trace_.push_back({frame.timestamp, surprise, -1, long_term_.total_tokens()});
    }
    while (sensory_.size() > config_.sensory_budget) {
        auto [old_frame, old_surprise] = std::move(sensory_.front());
        sensory_.pop_front();
        MemoryItem item;
        item.timestamp = old_frame.timestamp;
        item.surprise = old_surprise;
        item.annotation = std::move(old_frame.annotation);
        if (old_surprise < config_.surprise_threshold) {
            item.tokens = mean_pool_pairs(old_frame.grid);
            item.compressed = true;
        } else {
            item.tokens = std::move(old_frame.grid);
        }
        long_term_.items.push_back(std::move(item));
        if (long_term_.total_tokens() > long_term_.token_budget) {
            consolidate(long_term_);
        }
        if (trace_enabled_) {
            trace_.push_back({long_term_.items.back().timestamp, old_surprise,
                              long_term_.items.back().compressed ? 1 : 0,
                              long_term_.total_tokens()});
        }
    }
}

void MemoryEngine::write_trace_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("trace: cannot open " + path);
    os << "timestamp,surprise,compressed,long_term_tokens\n";
    for (const auto& row : trace_) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%d,%zu\n",
                      static_cast<long long>(row.timestamp), row.surprise, row.compressed,
                      row.long_term_tokens);
        os << buf;
    }
}

namespace {

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> dp(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t prev = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t cur = dp[j];
            dp[j] = a[i - 1] == b[j - 1] ? prev + 1 : std::max(dp[j], dp[j - 1]);
            prev = cur;
        }
    }
    return dp[b.size()];
}

}  // namespace

int match_option(const std::array<std::vector<std::string>, 4>& options,
                 const std::vector<std::string>& recovered) {
    for (int i = 0; i < 4; ++i) {
        if (options[static_cast<std::size_t>(i)] == recovered) return i;
    }
    int best = 0;
    std::size_t best_lcs = 0;
    for (int i = 0; i < 4; ++i) {
        const std::size_t l = lcs_length(options[static_cast<std::size_t>(i)], recovered);
        if (l > best_lcs) {
            best_lcs = l;
            best = i;
        }
    }
    return best;
}

RecallAnswer answer_recall(MemoryEngine& engine, const RecallTask& task, std::size_t k) {
    for (const auto& opt : task.options) {
        if (opt.empty()) throw std::invalid_argument("answer_recall: empty candidate option");
    }
    RecallAnswer answer;
    if (engine.long_term().items.empty() && engine.sensory().empty()) {
        answer.no_evidence = true;
        return answer;
    }
    WorkingMemory wm = retrieve(engine.long_term(), task.query, k);
    struct Hit {
        std::int64_t timestamp;
        std::string location;
        int order;
    };
    std::vector<Hit> hits;
    for (const auto& item : wm.items) {
        if (item.annotation.needle) {
            hits.push_back({item.timestamp, item.annotation.needle->location,
                            item.annotation.needle->order_index});
        }
    }
    // the sensory tail has not reached long-term memory yet
    for (const auto& [frame, s] : engine.sensory()) {
        if (frame.annotation.needle) {
            hits.push_back({frame.timestamp, frame.annotation.needle->location,
                            frame.annotation.needle->order_index});
        }
    }
    std::sort(hits.begin(), hits.end(),
              [](const Hit& a, const Hit& b) { return a.timestamp < b.timestamp; });
    for (const auto& h : hits) answer.recovered.push_back(h.location);
    if (answer.recovered.empty()) {
        answer.no_evidence = true;
        return answer;
    }
    answer.option_index = match_option(task.options, answer.recovered);
    return answer;
}

}  // namespace percept
