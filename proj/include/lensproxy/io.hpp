#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace lensproxy {

/// Malformed or unreadable file content. `position` is a byte offset for
/// binary formats and a 1-based line number for text formats.
class FormatError : public std::runtime_error {
public:
    enum class Kind { MalformedHeader, VersionMismatch, Truncated, BadRecord, Io };

    FormatError(Kind kind, std::uint64_t position, const std::string& message)
        : std::runtime_error(message), kind_(kind), position_(position) {}

    Kind kind() const { return kind_; }
    std::uint64_t position() const { return position_; }

private:
    Kind kind_;
    std::uint64_t position_;
};

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so a
/// reader never observes a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Little-endian byte sink.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        buffer_.append(reinterpret_cast<const char*>(raw), sizeof(T));
    }

    void put_bytes(std::string_view bytes) { buffer_.append(bytes); }

    const std::string& bytes() const { return buffer_; }

private:
    std::string buffer_;
};

/// Little-endian byte source that reports truncation with the failing offset.
class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        static_assert(std::is_arithmetic_v<T>);
        require(sizeof(T), what);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + offset_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        offset_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string_view get_bytes(std::size_t n, const char* what) {
        require(n, what);
        auto out = bytes_.substr(offset_, n);
        offset_ += n;
        return out;
    }

    std::uint64_t offset() const { return offset_; }
    std::uint64_t remaining() const { return bytes_.size() - offset_; }

private:
    void require(std::size_t n, const char* what) const {
        if (bytes_.size() - offset_ < n)
            throw FormatError(FormatError::Kind::Truncated, offset_,
                              std::string("truncated file: ") + what + " at byte " +
                                  std::to_string(offset_));
    }

    std::string_view bytes_;
    std::size_t offset_ = 0;
};

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double value);

}  // namespace lensproxy
