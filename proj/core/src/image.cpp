#include "attribroi/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "attribroi/errors.hpp"
#include "attribroi/serialize.hpp"

namespace attribroi {

namespace {

struct PgmHeader {
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned maxval = 0;
    std::size_t payload_offset = 0;
};

// Header tokens are separated by whitespace; '#' starts a comment running to
// end of line.
PgmHeader parse_header(const std::string& bytes) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) -> ParseError {
        return ParseError("PGM: " + what + " at byte offset " + std::to_string(pos));
    };
    auto skip = [&] {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* name) -> unsigned long {
        skip();
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            throw fail(std::string("expected ") + name);
        }
        unsigned long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + static_cast<unsigned long>(bytes[pos] - '0');
            if (v > 1u << 24) throw fail(std::string(name) + " out of range");
            ++pos;
        }
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw ParseError("PGM: bad magic at byte offset 0 (want P5)");
    }
    pos = 2;
    PgmHeader h;
    h.width = number("width");
    h.height = number("height");
    h.maxval = static_cast<unsigned>(number("maxval"));
    if (h.maxval != 255 && h.maxval != 65535) {
        throw ParseError("PGM: unsupported maxval " + std::to_string(h.maxval) +
                         " at byte offset " + std::to_string(pos));
    }
    if (h.width == 0 || h.height == 0) throw fail("zero image extent");
    // exactly one whitespace byte before the payload
    if (pos >= bytes.size()) throw fail("missing payload separator");
    ++pos;
    h.payload_offset = pos;
    return h;
}

void check_payload(const std::string& bytes, const PgmHeader& h, std::size_t bytes_per_pixel) {
    const std::size_t expect = h.width * h.height * bytes_per_pixel;
    const std::size_t got = bytes.size() - h.payload_offset;
    if (got != expect) {
        throw ParseError("PGM: payload at byte offset " + std::to_string(h.payload_offset) +
                         ": expected " + std::to_string(expect) + " bytes, got " +
                         std::to_string(got));
    }
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Tensor& t) {
    if (t.rank() != 2) {
        throw ShapeError("write_pgm: rank-2 tensor required, got " + shape_str(t.shape()));
    }
    const std::size_t h = t.shape()[0], w = t.shape()[1];
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + h * w);
    for (double v : t.data()) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        const auto pixel = static_cast<unsigned>(std::floor(clamped * 255.0 + 0.5));
        out.push_back(static_cast<char>(pixel));
    }
    atomic_write_file(path, out);
}

Tensor read_pgm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const PgmHeader h = parse_header(bytes);
    std::vector<double> values(h.width * h.height);
    if (h.maxval == 255) {
        check_payload(bytes, h, 1);
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] =
                static_cast<double>(static_cast<unsigned char>(bytes[h.payload_offset + i])) /
                255.0;
        }
    } else {
        check_payload(bytes, h, 2);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto hi = static_cast<unsigned char>(bytes[h.payload_offset + 2 * i]);
            const auto lo = static_cast<unsigned char>(bytes[h.payload_offset + 2 * i + 1]);
            values[i] = static_cast<double>((static_cast<unsigned>(hi) << 8) | lo) / 65535.0;
        }
    }
    return Tensor::from_data({h.height, h.width}, std::move(values));
}

void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid) {
    if (grid.labels.size() != grid.height * grid.width || grid.labels.empty()) {
        throw ShapeError("write_label_grid: label count does not match extents");
    }
    std::string out =
        "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n65535\n";
    out.reserve(out.size() + grid.labels.size() * 2);
    for (std::uint16_t v : grid.labels) {
        out.push_back(static_cast<char>(v >> 8));  // big-endian per the format
        out.push_back(static_cast<char>(v & 0xff));
    }
    atomic_write_file(path, out);
}

LabelGrid read_label_grid(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const PgmHeader h = parse_header(bytes);
    if (h.maxval != 65535) {
        throw ParseError("PGM: label grid requires maxval 65535, got " +
                         std::to_string(h.maxval));
    }
    check_payload(bytes, h, 2);
    LabelGrid grid;
    grid.height = h.height;
    grid.width = h.width;
    grid.labels.resize(h.width * h.height);
    for (std::size_t i = 0; i < grid.labels.size(); ++i) {
        const auto hi = static_cast<unsigned char>(bytes[h.payload_offset + 2 * i]);
        const auto lo = static_cast<unsigned char>(bytes[h.payload_offset + 2 * i + 1]);
        grid.labels[i] = static_cast<std::uint16_t>((static_cast<unsigned>(hi) << 8) | lo);
    }
    return grid;
}

}  // namespace attribroi
