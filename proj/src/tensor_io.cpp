#include "gslm/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace gslm {

namespace {

void put_u32le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64le(std::string& out, double d) {
    uint64_t v = std::bit_cast<uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& why) {
    throw std::runtime_error("gten: " + p.string() + ": " + why);
}

}  // namespace

void write_gten(const std::filesystem::path& path, const Tensor& t) {
    t.check_finite("tensor written to " + path.string());
    std::string buf;
    buf.reserve(7 + 4 * t.shape().size() + 8 * t.size());
    buf += "GTEN";
    buf.push_back(1);  // version
    buf.push_back(1);  // dtype f64
    buf.push_back(static_cast<char>(t.rank()));
    for (int e : t.shape()) put_u32le(buf, static_cast<uint32_t>(e));
    for (size_t i = 0; i < t.size(); ++i) put_f64le(buf, t[i]);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(path, "cannot open for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) fail(path, "write failed");
}

Tensor read_gten(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot open");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    auto need = [&](size_t n) {
        if (buf.size() - pos < n) fail(path, "truncated");
    };
    need(7);
    if (buf.compare(0, 4, "GTEN") != 0) fail(path, "bad magic");
    if (static_cast<unsigned char>(buf[4]) != 1) fail(path, "unsupported version");
    if (static_cast<unsigned char>(buf[5]) != 1) fail(path, "unsupported dtype");
    const int rank = static_cast<unsigned char>(buf[6]);
    pos = 7;
    if (rank > 8) fail(path, "rank too large");

    std::vector<int> shape(static_cast<size_t>(rank));
    need(4 * static_cast<size_t>(rank));
    for (int a = 0; a < rank; ++a) {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        if (v == 0 || v > (1u << 30)) fail(path, "bad extent");
        shape[static_cast<size_t>(a)] = static_cast<int>(v);
    }

    Tensor t(shape);
    need(8 * t.size());
    if (buf.size() - pos != 8 * t.size()) fail(path, "payload length mismatch");
    for (size_t i = 0; i < t.size(); ++i) {
        uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * b);
        t[i] = std::bit_cast<double>(v);
    }
    try {
        t.check_finite("");
    } catch (const std::runtime_error&) {
        fail(path, "non-finite payload");
    }
    return t;
}

}  // namespace gslm
