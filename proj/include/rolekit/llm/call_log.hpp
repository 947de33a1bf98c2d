#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

namespace rolekit::llm {

enum class CallKind { chat, embed };

struct CallRecord {
    std::uint64_t sequence = 0; // total order assigned at append time
    CallKind kind = CallKind::chat;
    std::string task;
    std::string prompt;   // rendered prompt (chat) or joined inputs (embed)
    std::string response; // empty for embed calls
    double temperature = 0.0;
    double top_p = 0.0;
    std::chrono::microseconds latency{0};
    bool ok = true;
    std::string error;
};

/// Append-only, thread-safe record of every gateway interaction.
class CallLog {
public:
    std::uint64_t append(CallRecord record);

    std::vector<CallRecord> records() const;
    std::vector<CallRecord> records_since(std::uint64_t sequence) const;
    std::size_t size() const;
    std::size_t count(CallKind kind) const;
    std::size_t count_task(const std::string& task) const;
    /// Sequence number the next append will receive.
    std::uint64_t next_sequence() const;

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

} // namespace rolekit::llm
