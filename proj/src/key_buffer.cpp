#include "keybuf/key_buffer.hpp"

#include "keybuf/errors.hpp"

namespace keybuf {

KeyBuffer::KeyBuffer(std::optional<std::int64_t> capacity_bits) : capacity_(capacity_bits) {
    if (capacity_ && *capacity_ <= 0) throw ConfigError("key buffer capacity must be positive");
}

std::int64_t KeyBuffer::push(std::span<const std::uint8_t> bits, std::int64_t origin_slot) {
    if (!queue_.empty() && origin_slot < queue_.back().origin) {
        throw ConfigError("key buffer push: origin slot regressed");
    }
    std::int64_t room = static_cast<std::int64_t>(bits.size());
    if (capacity_) {
        room = std::min<std::int64_t>(room, *capacity_ - level());
        if (room < 0) room = 0;
    }
    for (std::int64_t i = 0; i < room; ++i) {
        queue_.push_back(Entry{static_cast<std::uint8_t>(bits[static_cast<std::size_t>(i)] & 1u),
                               origin_slot});
    }
    const std::int64_t dropped = static_cast<std::int64_t>(bits.size()) - room;
    total_pushed_ += room;
    total_dropped_ += dropped;
    return dropped;
}

void KeyBuffer::take(std::int64_t m, std::vector<std::uint8_t>& bits,
                     std::vector<std::int64_t>& origins) {
    if (m < 0 || m > level()) throw ConfigError("key buffer take: underflow");
    bits.resize(static_cast<std::size_t>(m));
    origins.resize(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const Entry e = queue_.front();
        queue_.pop_front();
        bits[static_cast<std::size_t>(i)] = e.bit;
        origins[static_cast<std::size_t>(i)] = e.origin;
    }
    total_taken_ += m;
}

std::optional<std::int64_t> KeyBuffer::oldest_origin() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.front().origin;
}

std::uint64_t KeyBuffer::digest() const {
    // FNV-1a over the (bit, origin) stream.
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (const Entry& e : queue_) {
        h ^= e.bit;
        h *= 1099511628211ull;
        mix(static_cast<std::uint64_t>(e.origin));
    }
    return h;
}

} // namespace keybuf
