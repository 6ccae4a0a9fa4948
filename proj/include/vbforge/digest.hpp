#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <memory>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace vbforge {

inline constexpr std::string_view k_digest_algorithm = "sha256";

inline std::array<unsigned char, SHA256_DIGEST_LENGTH> sha256(std::string_view bytes) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
    SHA256(reinterpret_cast<const unsigned char *>(bytes.data()), bytes.size(), out.data());
    return out;
}

inline std::string to_hex(const unsigned char * data, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(n * 2, '0');
    for (std::size_t i = 0; i < n; ++i) {
        s[2 * i]     = digits[data[i] >> 4];
        s[2 * i + 1] = digits[data[i] & 0xf];
    }
    return s;
}

inline std::string sha256_hex(std::string_view bytes) {
    auto d = sha256(bytes);
    return to_hex(d.data(), d.size());
}

// Incremental hashing for shard files that are written line by line.
class sha256_stream {
public:
    sha256_stream() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr);
    }
    void update(std::string_view bytes) { EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()); }
    std::string hex() {
        std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
        unsigned int n = 0;
        EVP_DigestFinal_ex(ctx_.get(), out.data(), &n);
        return to_hex(out.data(), n);
    }
private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

// 64-bit seed derived from a base seed and a label, so independent streams
// (per block, per sample) do not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    std::string buf = std::to_string(base);
    buf.push_back('\0');
    buf.append(label);
    auto d = sha256(buf);
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) {
        s = (s << 8) | d[i];
    }
    return s;
}

} // namespace vbforge
