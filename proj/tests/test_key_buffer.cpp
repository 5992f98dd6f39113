#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <vector>

#include "keybuf/errors.hpp"
#include "keybuf/key_buffer.hpp"
#include "keybuf/random.hpp"

using namespace keybuf;

namespace {

std::vector<std::uint8_t> bits(std::initializer_list<int> vals) {
    std::vector<std::uint8_t> out;
    for (const int v : vals) out.push_back(static_cast<std::uint8_t>(v));
    return out;
}

std::vector<std::uint8_t> zeros(std::int64_t n) {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0);
}

} // namespace

TEST_CASE("push / level accounting") {
    KeyBuffer buf;
    CHECK(buf.level() == 0); // B0 = 0
    CHECK(buf.push(zeros(5), 1) == 0);
    CHECK(buf.level() == 5);
    CHECK(buf.push(zeros(3), 2) == 0); // B + |W| - R with R = 0
    CHECK(buf.level() == 8);
    CHECK(buf.push({}, 3) == 0); // empty push is a no-op
    CHECK(buf.level() == 8);
}

TEST_CASE("finite capacity drops only the newest bits of a push") {
    KeyBuffer buf(10);
    CHECK(buf.push(bits({1, 1, 1, 1, 1, 1, 1, 1, 1}), 1) == 0);
    CHECK(buf.level() == 9);
    // push 0,0,0,0: one fits, three dropped, all from this push's tail
    CHECK(buf.push(bits({0, 0, 0, 0}), 2) == 3);
    CHECK(buf.level() == 10);
    CHECK(buf.total_dropped() == 3);

    std::vector<std::uint8_t> got;
    std::vector<std::int64_t> origins;
    buf.take(10, got, origins);
    for (int i = 0; i < 9; ++i) {
        CHECK(got[static_cast<std::size_t>(i)] == 1); // stored bits untouched
        CHECK(origins[static_cast<std::size_t>(i)] == 1);
    }
    CHECK(got[9] == 0);
    CHECK(origins[9] == 2);
}

TEST_CASE("take is FIFO with ordered origin tags") {
    KeyBuffer buf;
    buf.push(bits({1, 0, 1}), 1);
    buf.push(bits({0, 0, 1, 1}), 2);
    std::vector<std::uint8_t> got;
    std::vector<std::int64_t> origins;
    buf.take(5, got, origins);
    CHECK(origins == std::vector<std::int64_t>{1, 1, 1, 2, 2});
    CHECK(got == bits({1, 0, 1, 0, 0}));
    CHECK(buf.level() == 2);

    buf.take(2, got, origins);
    CHECK(buf.level() == 0);
    CHECK_FALSE(buf.oldest_origin().has_value());
}

TEST_CASE("push take push keeps the level ledger") {
    KeyBuffer buf;
    buf.push(zeros(3), 1);
    std::vector<std::uint8_t> got;
    std::vector<std::int64_t> origins;
    buf.take(2, got, origins);
    buf.push(zeros(4), 2);
    CHECK(buf.level() == 5); // 3 - 2 + 4
}

TEST_CASE("underflow and origin regression are rejected") {
    KeyBuffer buf;
    buf.push(zeros(2), 5);
    std::vector<std::uint8_t> got;
    std::vector<std::int64_t> origins;
    CHECK_THROWS_AS(buf.take(3, got, origins), ConfigError);
    CHECK_THROWS_AS(buf.push(zeros(1), 4), ConfigError);
    CHECK_THROWS_AS(KeyBuffer(0), ConfigError);
}

TEST_CASE("digest tracks contents") {
    KeyBuffer a, b;
    a.push(bits({1, 0, 1}), 1);
    b.push(bits({1, 0, 1}), 1);
    CHECK(a.digest() == b.digest());
    b.push(bits({1}), 2);
    CHECK(a.digest() != b.digest());
    a.push(bits({0}), 2); // same length, different bit
    CHECK(a.digest() != b.digest());
}

// Model-based fuzz: a shadow deque of uniquely-numbered bits validates the
// level recursion at every operation, FIFO order, the drop-from-new-tail rule
// and that no bit is ever handed out twice.
TEST_CASE("fuzzed operation stream against a shadow model") {
    Rng rng(2024);
    struct ModelBit {
        std::uint64_t id;
        std::uint8_t bit;
        std::int64_t origin;
    };
    for (const std::int64_t cap : {std::int64_t{0}, std::int64_t{37}, std::int64_t{256}}) {
        KeyBuffer buf(cap == 0 ? std::optional<std::int64_t>{} : std::optional<std::int64_t>{cap});
        std::deque<ModelBit> model;
        std::vector<bool> taken_ids;
        std::uint64_t next_id = 0;
        std::int64_t slot = 0;

        for (int step = 0; step < 10000; ++step) {
            const std::int64_t level_before = buf.level();
            CHECK(level_before == static_cast<std::int64_t>(model.size()));
            if (uniform01(rng) < 0.55) {
                ++slot;
                const std::int64_t m = static_cast<std::int64_t>(uniform_below(rng, 9));
                std::vector<std::uint8_t> payload;
                for (std::int64_t i = 0; i < m; ++i) {
                    payload.push_back(static_cast<std::uint8_t>(uniform_bit(rng)));
                }
                const std::int64_t dropped = buf.push(payload, slot);
                std::int64_t room = m;
                if (cap > 0) room = std::min(room, cap - static_cast<std::int64_t>(model.size()));
                if (room < 0) room = 0;
                CHECK(dropped == m - room);
                for (std::int64_t i = 0; i < room; ++i) {
                    model.push_back(ModelBit{next_id++, payload[static_cast<std::size_t>(i)], slot});
                    taken_ids.push_back(false);
                }
                // level recursion: B' = B + pushed - dropped (taken = 0)
                CHECK(buf.level() == level_before + m - dropped);
            } else {
                const std::int64_t avail = buf.level();
                const std::int64_t m = avail == 0 ? 0 : static_cast<std::int64_t>(
                    uniform_below(rng, static_cast<std::uint64_t>(avail) + 1));
                std::vector<std::uint8_t> got;
                std::vector<std::int64_t> origins;
                buf.take(m, got, origins);
                CHECK(buf.level() == level_before - m);
                for (std::int64_t i = 0; i < m; ++i) {
                    const ModelBit expect = model.front();
                    model.pop_front();
                    CHECK(got[static_cast<std::size_t>(i)] == expect.bit);
                    CHECK(origins[static_cast<std::size_t>(i)] == expect.origin);
                    CHECK_FALSE(taken_ids[expect.id]); // use-once
                    taken_ids[expect.id] = true;
                }
            }
        }
        CHECK(buf.total_pushed() - buf.total_taken() == buf.level());
    }
}

// Age property: with per-slot draws capped at mbar and an old stock of
// (N1+1)*mbar bits, every bit drawn in slot k predates slot k - N1 as long as
// pushes keep pace with draws.
TEST_CASE("key age under a per-slot cap") {
    const std::int64_t mbar = 12;
    const int n1 = 3;
    KeyBuffer buf;
    buf.push(zeros((n1 + 1) * mbar), -1000000);

    Rng rng(7);
    std::vector<std::uint8_t> got;
    std::vector<std::int64_t> origins;
    for (std::int64_t k = 1; k <= 500; ++k) {
        const std::int64_t draw = static_cast<std::int64_t>(uniform_below(rng, mbar + 1));
        buf.take(std::min(draw, buf.level()), got, origins);
        for (const std::int64_t o : origins) CHECK(o < k - n1);
        // pushes at least match the draw (delivered keyed bits get stored)
        buf.push(zeros(draw + static_cast<std::int64_t>(uniform_below(rng, 4))), k);
    }
}
