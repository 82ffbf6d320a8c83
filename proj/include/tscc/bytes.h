#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace tscc {

/// FNV-1a, 64-bit.
inline uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t h = 0xCBF29CE484222325ULL) {
    for (uint8_t b : bytes) {
        h = (h ^ b) * 0x100000001B3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string &s) {
    return fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(s.data()), s.size()));
}

// Host byte order; checkpoints are not meant to move between architectures.
class ByteWriter {
   public:
    template <class T>
    void put(const T &value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto *p = reinterpret_cast<const uint8_t *>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    template <class T>
    void put_vector(const std::vector<T> &values) {
        put<uint64_t>(values.size());
        for (const T &v : values) {
            put(v);
        }
    }
    std::vector<uint8_t> &bytes() {
        return buf_;
    }

   private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
   public:
    explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    template <class T, class Error = std::runtime_error>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw Error("truncated record at byte " + std::to_string(pos_));
        }
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    template <class T, class Error = std::runtime_error>
    std::vector<T> get_vector(size_t max_size) {
        uint64_t n = get<uint64_t, Error>();
        if (n > max_size) {
            throw Error("vector length " + std::to_string(n) + " exceeds limit " + std::to_string(max_size));
        }
        std::vector<T> out;
        out.reserve(n);
        for (uint64_t i = 0; i < n; ++i) {
            out.push_back(get<T, Error>());
        }
        return out;
    }
    size_t position() const {
        return pos_;
    }
    size_t remaining() const {
        return bytes_.size() - pos_;
    }

   private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

}  // namespace tscc
