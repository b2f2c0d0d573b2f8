#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "percept/core.hpp"
#include "percept/predictor.hpp"
#include "percept/simulator.hpp"

namespace percept {

// One stored frame of long-term memory. The annotation rides along so an
// oracle answerer can read needles/objects off retrieved items.
struct MemoryItem {
    std::int64_t timestamp = 0;
    TokenGrid tokens;
    double surprise = 0.0;
    bool compressed = false;
    FrameAnnotation annotation;
};

enum class ConsolidationStrategy {
    ForgetOldest,
    ForgetLeastSurprise,
    ForgetLeastSurpriseMergeAdjacent,
};

std::string to_string(ConsolidationStrategy s);
ConsolidationStrategy strategy_from_string(const std::string& s);

struct LongTermMemory {
    std::vector<MemoryItem> items;  // strictly timestamp-ordered
    std::size_t token_budget = 32768;
    ConsolidationStrategy strategy = ConsolidationStrategy::ForgetLeastSurprise;

    std::size_t total_tokens() const;
};

// Drops or merges items until total_tokens() <= token_budget.
// Throws if a single item alone exceeds the budget.
void consolidate(LongTermMemory& memory);

struct WorkingMemory {
    std::vector<MemoryItem> items;  // timestamp order, at most K
};

// Top-K by cosine similarity between the query and each item's pooled
// feature; ties go to the earlier timestamp. Result reordered by timestamp.
WorkingMemory retrieve(const LongTermMemory& memory, const FeatureVector& query, std::size_t k);

struct EngineConfig {
    std::size_t sensory_budget = 16;     // B_s, frames
    std::size_t token_budget = 32768;    // B_l, tokens
    double surprise_threshold = 0.05;    // tau
    std::size_t retrieval_k = 8;         // K
    ConsolidationStrategy strategy = ConsolidationStrategy::ForgetLeastSurprise;
};

struct TraceRow {
    std::int64_t timestamp;
    double surprise;
    int compressed;  // -1 while still in the sensory buffer
    std::size_t long_term_tokens;
};

// Streaming state machine: frames in, bounded memory maintained.
class MemoryEngine {
public:
    MemoryEngine(EngineConfig config, SurpriseEstimator estimator);

    // Scores the frame, enqueues it, and spills the sensory overflow into
    // long-term memory (compressed iff its surprise is below tau).
    void ingest(const LatentFrame& frame);

    const LongTermMemory& long_term() const { return long_term_; }
    const std::deque<std::pair<LatentFrame, double>>& sensory() const { return sensory_; }
    const EngineConfig& config() const { return config_; }

    std::size_t peak_token_count() const { return peak_tokens_; }
    std::size_t current_token_count() const;

    void enable_trace() { trace_enabled_ = true; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    void write_trace_csv(const std::string& path) const;

private:
    EngineConfig config_;
    SurpriseEstimator estimator_;
    std::deque<std::pair<LatentFrame, double>> sensory_;
    LongTermMemory long_term_;
    std::optional<LatentFrame> prev_;
    std::int64_t expected_timestamp_ = 0;
    std::size_t peak_tokens_ = 0;
    bool trace_enabled_ = false;
    std::vector<TraceRow> trace_;
};

struct RecallAnswer {
    int option_index = 0;
    bool no_evidence = false;
    std::vector<std::string> recovered;  // needle locations in timestamp order
};

// Retrieves top-K items for the task query, reads needle annotations off
// them in timestamp order, and picks the matching option (exact match,
// else longest common subsequence; ties -> lowest index).
RecallAnswer answer_recall(MemoryEngine& engine, const RecallTask& task, std::size_t k);

// Option selection from an already-recovered location sequence; shared by
// the engine path and the fixed-window baseline.
int match_option(const std::array<std::vector<std::string>, 4>& options,
                 const std::vector<std::string>& recovered);

}  // namespace percept
