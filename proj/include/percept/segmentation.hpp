#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "percept/core.hpp"
#include "percept/predictor.hpp"

namespace percept {

struct AnswerBank {
    std::vector<std::pair<std::int64_t, long>> entries;  // (flush timestamp, answer)

    long sum() const {
        long total = 0;
        for (const auto& [t, a] : entries) total += a;
        return total;
    }
};

// Oracle segment answerer: distinct object ids of one category across the
// frames of a segment.
struct OracleCounter {
    std::string category;

    long operator()(const std::vector<const LatentFrame*>& segment) const;
};

using SegmentAnswerer = std::function<long(const std::vector<const LatentFrame*>&)>;

struct SegmentTraceRow {
    std::int64_t flush_timestamp;
    std::size_t segment_length;
    long segment_answer;
};

struct EventLoopConfig {
    std::size_t sensory_budget = 16;     // B_s, frames
    double surprise_threshold = 0.05;    // tau
    std::size_t min_segment_frames = 2;  // suppresses back-to-back flushes
};

// Surprise-driven event segmentation: frames accumulate in a segment store
// as they spill out of the sensory window; a high-surprise frame flushes
// the store through the answerer into the answer bank.
class EventLoop {
public:
    EventLoop(EventLoopConfig config, SurpriseEstimator estimator, SegmentAnswerer answerer);

    void step(const LatentFrame& frame);

    // Flushes the residual segment (segment store plus sensory remnants)
    // and returns the aggregated answer. Idempotent per stream.
    long finish();

    // Running answer at the current position, without mutating state:
    // banked answers plus the answerer over segment store and sensory.
    long peek() const;

    const AnswerBank& answer_bank() const { return bank_; }
    const std::vector<SegmentTraceRow>& trace() const { return trace_; }
    void write_trace_csv(const std::string& path) const;

private:
    EventLoopConfig config_;
    SurpriseEstimator estimator_;
    SegmentAnswerer answerer_;
    std::deque<LatentFrame> sensory_;
    std::vector<LatentFrame> segment_store_;
    AnswerBank bank_;
    std::optional<LatentFrame> prev_;
    std::int64_t expected_timestamp_ = 0;
    std::int64_t last_flush_ = -1000000;
    std::vector<SegmentTraceRow> trace_;

    void flush(std::int64_t timestamp, bool include_sensory);
};

// Runs the event loop over a full stream and returns the final count.
long process_stream(const EventLoopConfig& config, const SurpriseEstimator& estimator,
                    const std::vector<LatentFrame>& frames, const SegmentAnswerer& answerer);

// Running answers at the given sorted timestamps (nondestructive peeks of
// a fresh run over the stream). Throws if a timestamp is past stream end.
std::vector<std::pair<std::int64_t, long>> streaming_query(
    const EventLoopConfig& config, const SurpriseEstimator& estimator,
    const std::vector<LatentFrame>& frames, const SegmentAnswerer& answerer,
    const std::vector<std::int64_t>& query_timestamps);

// Distinct objects of the category whose first appearance is at or before
// each query timestamp. Unknown category yields zeros.
std::vector<long> streaming_ground_truth(const std::vector<LatentFrame>& frames,
                                         const std::string& category,
                                         const std::vector<std::int64_t>& timestamps);

// Upper-bound run: flush exactly at scene_id changes.
long gt_segmentation_run(const std::vector<LatentFrame>& frames, const SegmentAnswerer& answerer);

}  // namespace percept
