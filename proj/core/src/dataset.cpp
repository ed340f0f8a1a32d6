#include "attribroi/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "attribroi/errors.hpp"
#include "attribroi/image.hpp"
#include "attribroi/rng.hpp"
#include "attribroi/serialize.hpp"

namespace attribroi {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    const fs::path index_path = root / "index.json";
    std::ifstream in(index_path);
    if (!in) throw ParseError("cannot open " + index_path.string());
    json index;
    try {
        in >> index;
    } catch (const json::exception& e) {
        throw ParseError(index_path.string() + ": " + e.what());
    }
    if (!index.contains("samples") || !index["samples"].is_array()) {
        throw ParseError(index_path.string() + ": missing 'samples' array");
    }

    Dataset data;
    for (const auto& entry : index["samples"]) {
        if (!entry.contains("file") || !entry.contains("label") ||
            !entry.contains("subject_id")) {
            throw ParseError(index_path.string() +
                             ": sample entry needs file, label, subject_id");
        }
        Sample s;
        s.image = read_pgm((root / entry["file"].get<std::string>()).string());
        s.label = entry["label"].get<int>();
        s.subject_id = entry["subject_id"].get<std::string>();
        if (s.label < 0) throw ParseError(index_path.string() + ": negative label");
        data.samples.push_back(std::move(s));
    }
    return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root);
    json samples = json::array();
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const Sample& s = data.samples[i];
        const std::string file = s.subject_id + ".pgm";
        write_pgm((root / file).string(), s.image);
        samples.push_back({{"file", file}, {"label", s.label}, {"subject_id", s.subject_id}});
    }
    json index = {{"schema_version", 1}, {"samples", samples}};
    atomic_write_file((root / "index.json").string(), index.dump(2) + "\n");
}

SplitIndices train_val_split(std::size_t n, double val_fraction, std::uint64_t seed) {
    if (n == 0) throw ContractError("train_val_split: empty dataset");
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw ConfigError("train_val_split: fraction " + std::to_string(val_fraction) +
                          " outside [0,1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed));
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * val_fraction);
    SplitIndices split;
    split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    split.val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    return split;
}

Tensor mean_image(const Dataset& data) {
    if (data.empty()) throw ContractError("mean_image: empty dataset");
    const auto& shape = data.samples.front().image.shape();
    std::vector<double> acc(shape_numel(shape), 0.0);
    for (const Sample& s : data.samples) {
        if (s.image.shape() != shape) {
            throw ShapeError("mean_image: mixed shapes " + shape_str(shape) + " vs " +
                             shape_str(s.image.shape()));
        }
        const auto& v = s.image.data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    for (double& v : acc) v *= inv;
    return Tensor::from_data(shape, std::move(acc));
}

Tensor to_model_input(const Tensor& image, std::size_t channels) {
    if (image.rank() != 2) {
        throw ShapeError("to_model_input: [H,W] image required, got " +
                         shape_str(image.shape()));
    }
    if (channels == 0) throw ConfigError("to_model_input: zero channels");
    const std::size_t hw = image.size();
    std::vector<double> out(channels * hw);
    for (std::size_t c = 0; c < channels; ++c) {
        std::copy(image.data().begin(), image.data().end(), out.begin() + c * hw);
    }
    return Tensor::from_data({channels, image.shape()[0], image.shape()[1]},
                             std::move(out));
}

}  // namespace attribroi
