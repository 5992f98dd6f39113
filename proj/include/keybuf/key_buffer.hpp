#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace keybuf {

// FIFO use-once bit queue for recycled secret messages. Each bit carries the
// slot that produced it, so tests can check exactly how old the keys drawn in
// a given slot are. Single-owner mutable state; clone per branch if needed.
class KeyBuffer {
public:
    explicit KeyBuffer(std::optional<std::int64_t> capacity_bits = std::nullopt);

    // Appends bits at the tail. When the buffer is full, only the newest bits
    // of this push are dropped, never bits already stored. Returns the number
    // of dropped bits. origin_slot must not regress.
    std::int64_t push(std::span<const std::uint8_t> bits, std::int64_t origin_slot);

    // Removes and returns the m oldest bits with their origin tags.
    // Throws on underflow; callers cap with min(level(), ...).
    void take(std::int64_t m, std::vector<std::uint8_t>& bits,
              std::vector<std::int64_t>& origins);

    std::int64_t level() const { return static_cast<std::int64_t>(queue_.size()); }
    std::optional<std::int64_t> capacity() const { return capacity_; }

    std::int64_t total_pushed() const { return total_pushed_; }   // stored, excludes drops
    std::int64_t total_taken() const { return total_taken_; }
    std::int64_t total_dropped() const { return total_dropped_; }

    // Origin tag of the head bit, or nullopt when empty.
    std::optional<std::int64_t> oldest_origin() const;

    // Order-sensitive digest of the current contents (bits and origins).
    // Transmitter and receiver digests must match while no decoding error
    // has occurred.
    std::uint64_t digest() const;

private:
    struct Entry {
        std::uint8_t bit;
        std::int64_t origin;
    };
    std::deque<Entry> queue_;
    std::optional<std::int64_t> capacity_;
    std::int64_t total_pushed_ = 0;
    std::int64_t total_taken_ = 0;
    std::int64_t total_dropped_ = 0;
};

} // namespace keybuf
