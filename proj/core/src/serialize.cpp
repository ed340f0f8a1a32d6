#include "attribroi/serialize.hpp"

#include <cstring>
#include <fstream>

#include "attribroi/errors.hpp"

namespace attribroi {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}

class Cursor {
  public:
    explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const { return offset_; }

    void need(std::size_t n, const char* what) {
        if (offset_ + n > bytes_.size()) {
            throw ParseError("ATSR: truncated " + std::string(what) + " at byte offset " +
                             std::to_string(offset_) + ": expected " + std::to_string(n) +
                             " more bytes, got " + std::to_string(bytes_.size() - offset_));
        }
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[offset_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        offset_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[offset_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        offset_ += 8;
        return v;
    }

    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - offset_; }

  private:
    std::string_view bytes_;
    std::size_t offset_ = 0;
};

}  // namespace

std::string encode_tensor(const Tensor& t) {
    std::string out;
    out.reserve(16 + t.rank() * 8 + t.size() * 8);
    out += "ATSR";
    put_u32(out, kAtsrVersion);
    put_u32(out, kAtsrDtypeF64);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_f64(out, v);
    return out;
}

Tensor decode_tensor(std::string_view bytes) {
    Cursor cur(bytes);
    cur.need(4, "magic");
    if (bytes.substr(0, 4) != "ATSR") {
        throw ParseError("ATSR: bad magic at byte offset 0");
    }
    Cursor body(bytes.substr(4));
    const std::uint32_t version = body.u32("version");
    if (version != kAtsrVersion) {
        throw ParseError("ATSR: unsupported version " + std::to_string(version) +
                         " at byte offset 4");
    }
    const std::uint32_t dtype = body.u32("dtype");
    if (dtype != kAtsrDtypeF64) {
        throw ParseError("ATSR: unsupported dtype code " + std::to_string(dtype) +
                         " at byte offset 8");
    }
    const std::uint32_t rank = body.u32("rank");
    if (rank > 8) {
        throw ParseError("ATSR: implausible rank " + std::to_string(rank) +
                         " at byte offset 12");
    }
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint64_t d = body.u64("extent");
        if (d == 0) {
            throw ParseError("ATSR: zero extent at byte offset " +
                             std::to_string(4 + body.offset() - 8));
        }
        shape[i] = static_cast<std::size_t>(d);
        numel *= shape[i];
    }
    const std::size_t payload_offset = 4 + body.offset();
    if (body.remaining() != numel * 8) {
        throw ParseError("ATSR: payload at byte offset " + std::to_string(payload_offset) +
                         ": expected " + std::to_string(numel * 8) + " bytes, got " +
                         std::to_string(body.remaining()));
    }
    std::vector<double> values(numel);
    for (std::size_t i = 0; i < numel; ++i) values[i] = body.f64("payload");
    return Tensor::from_data(shape, std::move(values));
}

void atomic_write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ContractError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ContractError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    atomic_write_file(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
    try {
        return decode_tensor(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace attribroi
