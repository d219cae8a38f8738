#pragma once

// Little-endian binary encoding and the versioned index container:
//
//   offset  size  field
//   0       4     magic "FANN"
//   4       4     u32 format version
//   8       4     u32 metadata length m
//   12      m     metadata (UTF-8 JSON text)
//   12+m    8     u64 payload length p
//   20+m    p     payload (dataset block, then strategy blocks)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "fanns/core.h"

namespace fanns {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline constexpr char kContainerMagic[4] = {'F', 'A', 'N', 'N'};
inline constexpr std::uint32_t kContainerVersion = 1;

class BinaryWriter {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void put_vector(const std::vector<T>& values) {
        put<std::uint64_t>(values.size());
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        bytes_.insert(bytes_.end(), p, p + values.size() * sizeof(T));
    }

    void put_string(const std::string& s) {
        put<std::uint64_t>(s.size());
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }

    void put_raw(const void* data, std::size_t size) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + size);
    }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        require(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    std::vector<T> get_vector() {
        const auto count = get<std::uint64_t>();
        if (count > (bytes_.size() - pos_) / sizeof(T)) {
            fail("vector of " + std::to_string(count) + " elements exceeds remaining bytes");
        }
        std::vector<T> values(count);
        std::memcpy(values.data(), bytes_.data() + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        return values;
    }

    std::string get_string() {
        const auto size = get<std::uint64_t>();
        require(size);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), size);
        pos_ += size;
        return s;
    }

    void get_raw(void* out, std::size_t size) {
        require(size);
        std::memcpy(out, bytes_.data() + pos_, size);
        pos_ += size;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(what + " at byte offset " + std::to_string(pos_));
    }

private:
    void require(std::size_t size) const {
        if (size > bytes_.size() - pos_) {
            fail("truncated input: need " + std::to_string(size) + " bytes");
        }
    }

    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Wraps metadata + payload into the container layout above.
std::vector<std::uint8_t> encode_container(const std::string& metadata, const std::vector<std::uint8_t>& payload);

struct Container {
    std::uint32_t version = 0;
    std::string metadata;
    std::vector<std::uint8_t> payload;
};

/// Validates magic, version and block lengths.
Container decode_container(const std::vector<std::uint8_t>& bytes);

void save_dataset(BinaryWriter& out, const Dataset& data);
Dataset load_dataset(BinaryReader& in);

}  // namespace fanns
