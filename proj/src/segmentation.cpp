#include "percept/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace percept {

long OracleCounter::operator()(const std::vector<const LatentFrame*>& segment) const {
    std::set<std::int64_t> ids;
    for (const auto* frame : segment) {
        for (const auto& obj : frame->annotation.visible_objects) {
            if (obj.category == category) ids.insert(obj.id);
        }
    }
    return static_cast<long>(ids.size());
}

EventLoop::EventLoop(EventLoopConfig config, SurpriseEstimator estimator,
                     SegmentAnswerer answerer)
    : config_(config), estimator_(std::move(estimator)), answerer_(std::move(answerer)) {}

void EventLoop::flush(std::int64_t timestamp, bool include_sensory) {
    std::vector<const LatentFrame*> segment;
    segment.reserve(segment_store_.size() + (include_sensory ? sensory_.size() : 0));
    for (const auto& f : segment_store_) segment.push_back(&f);
    if (include_sensory) {
        for (const auto& f : sensory_) segment.push_back(&f);
    }
    const long answer = answerer_(segment);
    bank_.entries.emplace_back(timestamp, answer);
    trace_.push_back({timestamp, segment.size(), answer});
    segment_store_.clear();
    if (include_sensory) sensory_.clear();
    last_flush_ = timestamp;
}

void EventLoop::step(const LatentFrame& frame) {
    if (frame.timestamp != expected_timestamp_) {
        throw std::invalid_argument("event loop: out-of-order timestamp");
    }
    expected_timestamp_ = frame.timestamp + 1;
    const double surprise = prev_ ? estimator_.score(*prev_, frame) : 0.0;
    prev_ = frame;
    sensory_.push_back(frame);
    if (sensory_.size() > config_.sensory_budget) {
        segment_store_.push_back(std::move(sensory_.front()));
        sensory_.pop_front();
    }
    if (surprise >= config_.surprise_threshold &&
        frame.timestamp - last_flush_ >= static_cast<std::int64_t>(config_.min_segment_frames)) {
        flush(frame.timestamp, /*include_sensory=*/false);
    }
}

long EventLoop::finish() {
    if (!segment_store_.empty() || !sensory_.empty()) {
        flush(expected_timestamp_ - 1, /*include_sensory=*/true);
    }
    return bank_.sum();
}

long EventLoop::peek() const {
    std::vector<const LatentFrame*> segment;
    segment.reserve(segment_store_.size() + sensory_.size());
    for (const auto& f : segment_store_) segment.push_back(&f);
    for (const auto& f : sensory_) segment.push_back(&f);
    return bank_.sum() + answerer_(segment);
}

void EventLoop::write_trace_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("segment trace: cannot open " + path);
    os << "flush_timestamp,segment_length,segment_answer\n";
    for (const auto& row : trace_) {
        os << row.flush_timestamp << "," << row.segment_length << "," << row.segment_answer
           << "\n";
    }
}

long process_stream(const EventLoopConfig& config, const SurpriseEstimator& estimator,
                    const std::vector<LatentFrame>& frames, const SegmentAnswerer& answerer) {
    EventLoop loop(config, estimator, answerer);
    for (const auto& f : frames) loop.step(f);
    return loop.finish();
}

std::vector<std::pair<std::int64_t, long>> streaming_query(
    const EventLoopConfig& config, const SurpriseEstimator& estimator,
    const std::vector<LatentFrame>& frames, const SegmentAnswerer& answerer,
    const std::vector<std::int64_t>& query_timestamps) {
    if (!std::is_sorted(query_timestamps.begin(), query_timestamps.end())) {
        throw std::invalid_argument("streaming_query: timestamps must be sorted");
    }
    const std::int64_t last = frames.empty() ? -1 : frames.back().timestamp;
    for (const auto t : query_timestamps) {
        if (t < 0 || t > last) {
            throw std::invalid_argument("streaming_query: timestamp beyond stream end");
        }
    }
    std::vector<std::pair<std::int64_t, long>> out;
    EventLoop loop(config, estimator, answerer);
    std::size_t q = 0;
    for (const auto& f : frames) {
        loop.step(f);
        while (q < query_timestamps.size() && query_timestamps[q] == f.timestamp) {
            out.emplace_back(query_timestamps[q], loop.peek());
            ++q;
        }
    }
    return out;
}

std::vector<long> streaming_ground_truth(const std::vector<LatentFrame>& frames,
                                         const std::string& category,
                                         const std::vector<std::int64_t>& timestamps) {
    // first appearance timestamp per distinct object id
    std::set<std::int64_t> seen;
    std::vector<std::pair<std::int64_t, std::int64_t>> first_seen;  // (timestamp, id)
    for (const auto& f : frames) {
        for (const auto& obj : f.annotation.visible_objects) {
            if (obj.category == category && seen.insert(obj.id).second) {
                first_seen.emplace_back(f.timestamp, obj.id);
            }
        }
    }
    std::vector<long> out;
    out.reserve(timestamps.size());
    for (const auto t : timestamps) {
        long count = 0;
        for (const auto& [ft, id] : first_seen) {
            if (ft <= t) ++count;
        }
        out.push_back(count);
    }
    return out;
}

long gt_segmentation_run(const std::vector<LatentFrame>& frames,
                         const SegmentAnswerer& answerer) {
    long total = 0;
    std::vector<const LatentFrame*> segment;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!segment.empty() && frames[i].annotation.scene_id != segment.back()->annotation.scene_id) {
            total += answerer(segment);
            segment.clear();
        }
        segment.push_back(&frames[i]);
    }
    if (!segment.empty()) total += answerer(segment);
    return total;
}

}  // namespace percept
