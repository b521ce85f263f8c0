#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace deepbnd {

// SHA-256, used for content-addressing artifacts. Streaming interface so
// large binary files can be hashed without buffering them whole.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::string hex_digest();  // finalises; object must not be reused

private:
    void process_block(const std::uint8_t* block);
    std::uint32_t h_[8];
    std::uint8_t buffer_[64];
    std::size_t buffered_ = 0;
    std::uint64_t total_ = 0;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

} // namespace deepbnd
