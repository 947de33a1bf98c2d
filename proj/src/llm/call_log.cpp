#include "rolekit/llm/call_log.hpp"

#include <algorithm>

namespace rolekit::llm {

std::uint64_t CallLog::append(CallRecord record) {
    std::lock_guard lock(mutex_);
    record.sequence = records_.size();
    records_.push_back(std::move(record));
    return records_.back().sequence;
}

std::vector<CallRecord> CallLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<CallRecord> CallLog::records_since(std::uint64_t sequence) const {
    std::lock_guard lock(mutex_);
    if (sequence >= records_.size()) {
        return {};
    }
    return {records_.begin() + static_cast<std::ptrdiff_t>(sequence), records_.end()};
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::size_t CallLog::count(CallKind kind) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [kind](const CallRecord& r) { return r.kind == kind; }));
}

std::size_t CallLog::count_task(const std::string& task) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [&task](const CallRecord& r) { return r.task == task; }));
}

std::uint64_t CallLog::next_sequence() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

} // namespace rolekit::llm
