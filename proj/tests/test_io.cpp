#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include <doctest.h>

#include "attribroi/errors.hpp"
#include "attribroi/image.hpp"
#include "attribroi/serialize.hpp"
#include "attribroi/tensor.hpp"

using namespace attribroi;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "attribroi_io_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("tensor file round-trip is bit-identical") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    Tensor t = Tensor::zeros({3, 4, 5});
    for (double& v : t.data()) v = dist(rng);
    // a few values that stress the encoding
    t.data()[0] = 0.0;
    t.data()[1] = -0.0;
    t.data()[2] = 1e-308;
    t.data()[3] = 1.7976931348623157e308;

    const fs::path path = temp_dir() / "roundtrip.atsr";
    write_tensor(path, t);
    const Tensor back = read_tensor(path);

    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
        // bit-level equality, not approximate
        CHECK(std::memcmp(&back.data()[i], &t.data()[i], sizeof(double)) == 0);
    }
}

TEST_CASE("encode/decode pure in-memory round trip") {
    Tensor t = Tensor::from_data({2, 2}, {1.5, -2.25, 3.125, 0.0});
    const std::string bytes = encode_tensor(t);
    CHECK(bytes.size() == 4 + 4 + 4 + 4 + 2 * 8 + 4 * 8);
    CHECK(bytes.substr(0, 4) == "ATSR");
    const Tensor back = decode_tensor(bytes);
    CHECK(back.shape() == t.shape());
    for (std::size_t i = 0; i < 4; ++i) CHECK(back.data()[i] == t.data()[i]);
}

TEST_CASE("truncated payload names expected vs actual byte count") {
    Tensor t = Tensor::from_data({4}, {1, 2, 3, 4});
    std::string bytes = encode_tensor(t);
    bytes.resize(bytes.size() - 9);  // cut into the payload
    try {
        decode_tensor(bytes);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("32") != std::string::npos);  // expected payload bytes
        CHECK(msg.find("23") != std::string::npos);  // what is left
    }
}

TEST_CASE("malformed headers carry byte offsets") {
    Tensor t = Tensor::from_data({2}, {1, 2});
    const std::string good = encode_tensor(t);

    SUBCASE("bad magic at offset 0") {
        std::string bad = good;
        bad[0] = 'X';
        try {
            decode_tensor(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
        }
    }
    SUBCASE("unsupported version at offset 4") {
        std::string bad = good;
        bad[4] = 9;
        try {
            decode_tensor(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("offset 4") != std::string::npos);
        }
    }
    SUBCASE("unsupported dtype at offset 8") {
        std::string bad = good;
        bad[8] = 7;
        try {
            decode_tensor(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("offset 8") != std::string::npos);
        }
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(decode_tensor(""), ParseError);
    }
    SUBCASE("header cut mid-extents") {
        CHECK_THROWS_AS(decode_tensor(good.substr(0, 14)), ParseError);
    }
}

TEST_CASE("pgm quantization rule: 0.5 -> 128, read back as 128/255") {
    Tensor t = Tensor::from_data({1, 3}, {0.5, 0.0, 1.0});
    const fs::path path = temp_dir() / "quant.pgm";
    write_pgm(path, t);
    const Tensor back = read_pgm(path);
    REQUIRE(back.shape() == Shape{1, 3});
    CHECK(back.data()[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(back.data()[1] == 0.0);
    CHECK(back.data()[2] == 1.0);
}

TEST_CASE("pgm clamps out-of-range values") {
    Tensor t = Tensor::from_data({1, 2}, {-0.5, 1.5});
    const fs::path path = temp_dir() / "clamp.pgm";
    write_pgm(path, t);
    const Tensor back = read_pgm(path);
    CHECK(back.data()[0] == 0.0);
    CHECK(back.data()[1] == 1.0);
}

TEST_CASE("pgm round trip is exact on the 8-bit lattice") {
    Tensor t = Tensor::zeros({16, 16});
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.data()[i] = static_cast<double>(i % 256) / 255.0;
    }
    const fs::path path = temp_dir() / "lattice.pgm";
    write_pgm(path, t);
    const Tensor back = read_pgm(path);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back.data()[i] == doctest::Approx(t.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("label grid 16-bit round trip") {
    LabelGrid grid;
    grid.height = 3;
    grid.width = 4;
    grid.labels = {0, 1, 2, 3, 256, 1000, 65535, 7, 8, 9, 10, 11};
    const fs::path path = temp_dir() / "labels.pgm";
    write_label_grid(path, grid);
    const LabelGrid back = read_label_grid(path);
    CHECK(back.height == 3);
    CHECK(back.width == 4);
    CHECK(back.labels == grid.labels);
    CHECK(back.at(1, 1) == 1000);
}

TEST_CASE("pgm header errors carry byte offsets") {
    const fs::path dir = temp_dir();
    SUBCASE("wrong magic") {
        atomic_write_file(dir / "bad1.pgm", "P6\n2 2\n255\nAAAA");
        try {
            read_pgm(dir / "bad1.pgm");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("offset") != std::string::npos);
        }
    }
    SUBCASE("truncated pixel data") {
        atomic_write_file(dir / "bad2.pgm", "P5\n2 2\n255\nAB");
        CHECK_THROWS_AS(read_pgm(dir / "bad2.pgm"), ParseError);
    }
    SUBCASE("comment lines are skipped") {
        atomic_write_file(dir / "ok.pgm", "P5\n# a comment\n2 1\n255\nAB");
        const Tensor t = read_pgm(dir / "ok.pgm");
        CHECK(t.shape() == Shape{1, 2});
        CHECK(t.data()[0] == doctest::Approx(65.0 / 255.0));
    }
    SUBCASE("label grid requires maxval 65535") {
        atomic_write_file(dir / "bad3.pgm", "P5\n1 1\n255\nA");
        CHECK_THROWS_AS(read_label_grid(dir / "bad3.pgm"), ParseError);
    }
}

TEST_CASE("atomic write replaces content completely") {
    const fs::path path = temp_dir() / "atomic.txt";
    atomic_write_file(path, "first version, longer than the second");
    atomic_write_file(path, "v2");
    CHECK(read_file(path) == "v2");
    CHECK(!fs::exists(path.string() + ".tmp"));
}

TEST_CASE("atomic write creates parent directories") {
    const fs::path path = temp_dir() / "deep" / "nested" / "file.txt";
    fs::remove_all(temp_dir() / "deep");
    atomic_write_file(path, "content");
    CHECK(read_file(path) == "content");
}

TEST_CASE("write_pgm rejects non-rank-2 tensors") {
    CHECK_THROWS_AS(write_pgm(temp_dir() / "r3.pgm", Tensor::zeros({2, 2, 2})),
                    ShapeError);
}

TEST_CASE("read of a missing file fails cleanly") {
    CHECK_THROWS_AS(read_tensor(temp_dir() / "no_such.atsr"), ParseError);
    CHECK_THROWS_AS(read_pgm(temp_dir() / "no_such.pgm"), ParseError);
}
