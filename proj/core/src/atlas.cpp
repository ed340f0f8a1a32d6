#include "attribroi/atlas.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attribroi/errors.hpp"
#include "attribroi/serialize.hpp"

namespace attribroi {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_atlas(const RoiAtlas& atlas) {
    if (atlas.names.count(0) != 0) {
        throw ContractError("atlas: id 0 is reserved for background");
    }
    for (std::uint16_t label : atlas.labels.labels) {
        if (label != 0 && atlas.names.count(label) == 0) {
            throw ContractError("atlas: grid label " + std::to_string(label) +
                                " has no name entry");
        }
    }
    for (const auto& [id, _] : atlas.brodmann) {
        if (atlas.names.count(id) == 0) {
            throw ContractError("atlas: brodmann entry for unknown id " +
                                std::to_string(id));
        }
    }
}

std::vector<std::uint16_t> roi_ids(const RoiAtlas& atlas) {
    std::vector<std::uint16_t> ids;
    ids.reserve(atlas.names.size());
    for (const auto& [id, _] : atlas.names) ids.push_back(id);
    return ids;  // map keys are already sorted
}

static std::string sidecar_path(const std::string& grid_path) {
    fs::path p(grid_path);
    p.replace_extension(".json");
    return p.string();
}

void save_atlas(const RoiAtlas& atlas, const std::string& grid_path) {
    validate_atlas(atlas);
    write_label_grid(grid_path, atlas.labels);
    json rois = json::object();
    for (const auto& [id, name] : atlas.names) {
        json entry = {{"name", name}, {"brodmann", json::array()}};
        auto it = atlas.brodmann.find(id);
        if (it != atlas.brodmann.end()) entry["brodmann"] = it->second;
        rois[std::to_string(id)] = entry;
    }
    json doc = {{"schema_version", 1}, {"rois", rois}};
    atomic_write_file(sidecar_path(grid_path), doc.dump(2) + "\n");
}

RoiAtlas load_atlas(const std::string& grid_path) {
    RoiAtlas atlas;
    atlas.labels = read_label_grid(grid_path);

    const std::string side = sidecar_path(grid_path);
    std::ifstream in(side);
    if (!in) throw ParseError("cannot open " + side);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(side + ": " + e.what());
    }
    if (!doc.contains("rois") || !doc["rois"].is_object()) {
        throw ParseError(side + ": missing 'rois' object");
    }
    for (const auto& [key, entry] : doc["rois"].items()) {
        unsigned long id = 0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
        if (ec != std::errc{} || ptr != key.data() + key.size() || id == 0 ||
            id > 65535) {
            throw ParseError(side + ": bad ROI id '" + key + "'");
        }
        if (!entry.contains("name") || !entry["name"].is_string()) {
            throw ParseError(side + ": ROI " + key + " missing name");
        }
        atlas.names[static_cast<std::uint16_t>(id)] = entry["name"].get<std::string>();
        if (entry.contains("brodmann")) {
            atlas.brodmann[static_cast<std::uint16_t>(id)] =
                entry["brodmann"].get<std::vector<std::string>>();
        }
    }
    validate_atlas(atlas);
    return atlas;
}

RoiScoreTable aggregate_roi(const AttributionMap& map, const RoiAtlas& atlas) {
    const Tensor& v = map.values;
    if (v.rank() != 2 || v.shape()[0] != atlas.labels.height ||
        v.shape()[1] != atlas.labels.width) {
        throw ShapeError("aggregate_roi: map " + shape_str(v.shape()) + " vs atlas " +
                         std::to_string(atlas.labels.height) + "x" +
                         std::to_string(atlas.labels.width));
    }

    std::map<std::uint16_t, double> sums;
    std::map<std::uint16_t, std::size_t> counts;
    for (const auto& [id, _] : atlas.names) {
        sums[id] = 0.0;
        counts[id] = 0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::uint16_t label = atlas.labels.labels[i];
        if (label == 0) continue;
        auto it = sums.find(label);
        if (it == sums.end()) {
            throw ContractError("aggregate_roi: grid label " + std::to_string(label) +
                                " has no name entry");
        }
        const double mag = std::abs(v.data()[i]);
        it->second += mag;
        ++counts[label];
        total += mag;
    }

    RoiScoreTable table;
    table.method = map.method;
    for (const auto& [id, sum] : sums) {
        RoiScore score;
        score.id = id;
        score.mean = counts[id] > 0 ? sum / static_cast<double>(counts[id]) : 0.0;
        score.share = total > 0.0 ? sum / total : 0.0;
        table.scores.push_back(score);
    }
    std::sort(table.scores.begin(), table.scores.end(),
              [](const RoiScore& a, const RoiScore& b) {
                  if (a.mean != b.mean) return a.mean > b.mean;
                  return a.id < b.id;
              });
    for (std::size_t i = 0; i < table.scores.size(); ++i) table.scores[i].rank = i + 1;
    return table;
}

std::vector<std::uint16_t> top_rois(const RoiScoreTable& table, std::size_t k) {
    if (k < 1 || k > table.scores.size()) {
        throw ConfigError("top_rois: k=" + std::to_string(k) + " outside [1," +
                          std::to_string(table.scores.size()) + "]");
    }
    std::vector<std::uint16_t> ids;
    ids.reserve(k);
    for (std::size_t i = 0; i < k; ++i) ids.push_back(table.scores[i].id);
    return ids;
}

std::vector<RoiFrequency> roi_frequency(
    const std::vector<std::vector<std::uint16_t>>& subject_tops) {
    if (subject_tops.empty()) throw ContractError("roi_frequency: empty cohort");
    std::map<std::uint16_t, std::size_t> counts;
    for (const auto& list : subject_tops) {
        const std::set<std::uint16_t> unique(list.begin(), list.end());
        for (std::uint16_t id : unique) ++counts[id];
    }
    std::vector<RoiFrequency> out;
    const double n = static_cast<double>(subject_tops.size());
    for (const auto& [id, count] : counts) {
        out.push_back({id, count, static_cast<double>(count) / n});
    }
    std::sort(out.begin(), out.end(), [](const RoiFrequency& a, const RoiFrequency& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.id < b.id;
    });
    return out;
}

static RoiAnnotation annotate(std::uint16_t id, const RoiAtlas& atlas,
                              const char* where) {
    auto it = atlas.names.find(id);
    if (it == atlas.names.end()) {
        throw IndexError(std::string(where) + ": ROI " + std::to_string(id) +
                         " not in atlas");
    }
    RoiAnnotation a;
    a.id = id;
    a.name = it->second;
    auto ba = atlas.brodmann.find(id);
    if (ba != atlas.brodmann.end()) a.brodmann = ba->second;
    return a;
}

static std::vector<RoiAnnotation> annotate_ids(const std::vector<std::uint16_t>& ids,
                                               const RoiAtlas& atlas) {
    std::vector<RoiAnnotation> out;
    out.reserve(ids.size());
    for (std::uint16_t id : ids) out.push_back(annotate(id, atlas, "consensus"));
    return out;
}

static std::vector<std::uint16_t> intersect_sorted(const std::set<std::uint16_t>& a,
                                                   const std::set<std::uint16_t>& b) {
    std::vector<std::uint16_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(out));
    return out;
}

ConsensusReport consensus(const MethodTop& a, const MethodTop& b, const MethodTop& c,
                          const RoiAtlas& atlas) {
    const MethodTop* methods[3] = {&a, &b, &c};
    if (a.method == b.method || a.method == c.method || b.method == c.method) {
        throw ConfigError("consensus: duplicate method tag");
    }

    ConsensusReport report;
    std::set<std::uint16_t> sets[3];
    for (int i = 0; i < 3; ++i) {
        report.methods.push_back(methods[i]->method);
        report.top[methods[i]->method] = annotate_ids(methods[i]->rois, atlas);
        if (!methods[i]->frequencies.empty()) {
            report.frequencies[methods[i]->method] = methods[i]->frequencies;
        }
        sets[i].insert(methods[i]->rois.begin(), methods[i]->rois.end());
    }

    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& [x, y] : pairs) {
        const std::string key = methods[x]->method + "&" + methods[y]->method;
        report.pairwise[key] = annotate_ids(intersect_sorted(sets[x], sets[y]), atlas);
    }
    std::vector<std::uint16_t> all3 = intersect_sorted(sets[0], sets[1]);
    const std::set<std::uint16_t> ab(all3.begin(), all3.end());
    report.threeway = annotate_ids(intersect_sorted(ab, sets[2]), atlas);
    return report;
}

static json annotation_json(const RoiAnnotation& a) {
    return {{"id", a.id}, {"name", a.name}, {"brodmann", a.brodmann}};
}

std::string consensus_to_json(const ConsensusReport& report) {
    json top = json::object(), pairwise = json::object(), freqs = json::object();
    for (const auto& [method, list] : report.top) {
        json arr = json::array();
        for (const auto& a : list) arr.push_back(annotation_json(a));
        top[method] = arr;
    }
    for (const auto& [key, list] : report.pairwise) {
        json arr = json::array();
        for (const auto& a : list) arr.push_back(annotation_json(a));
        pairwise[key] = arr;
    }
    json threeway = json::array();
    for (const auto& a : report.threeway) threeway.push_back(annotation_json(a));
    for (const auto& [method, list] : report.frequencies) {
        json arr = json::array();
        for (const auto& f : list) {
            arr.push_back({{"id", f.id}, {"count", f.count}, {"fraction", f.fraction}});
        }
        freqs[method] = arr;
    }
    json doc = {{"schema_version", 1}, {"methods", report.methods},
                {"top", top},          {"pairwise", pairwise},
                {"threeway", threeway}, {"frequencies", freqs}};
    return doc.dump(2) + "\n";
}

static std::string ba_string(const std::vector<std::string>& brodmann) {
    if (brodmann.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < brodmann.size(); ++i) {
        if (i) out += " & ";
        out += brodmann[i];
    }
    return out;
}

static void render_table(std::ostringstream& out, const std::string& heading,
                         const std::vector<RoiAnnotation>& rows) {
    out << "== " << heading << " ==\n";
    if (rows.empty()) {
        out << "  (none)\n\n";
        return;
    }
    std::vector<std::array<std::string, 3>> cells;
    cells.push_back({"Identified top regions", "Key regions", "Brodmann's Area"});
    for (const auto& a : rows) cells.push_back({a.name, a.name, ba_string(a.brodmann)});
    std::size_t widths[3] = {0, 0, 0};
    for (const auto& row : cells) {
        for (int i = 0; i < 3; ++i) widths[i] = std::max(widths[i], row[i].size());
    }
    for (const auto& row : cells) {
        out << "  ";
        for (int i = 0; i < 3; ++i) {
            out << row[i] << std::string(widths[i] - row[i].size(), ' ');
            out << (i < 2 ? " | " : "\n");
        }
    }
    out << "\n";
}

std::string consensus_to_text(const ConsensusReport& report) {
    std::ostringstream out;
    for (const auto& method : report.methods) {
        render_table(out, "top regions: " + method, report.top.at(method));
    }
    for (const auto& [key, list] : report.pairwise) {
        render_table(out, "intersection: " + key, list);
    }
    render_table(out, "three-way consensus", report.threeway);
    for (const auto& [method, list] : report.frequencies) {
        out << "== frequency: " << method << " ==\n";
        for (const auto& f : list) {
            out << "  roi " << f.id << ": " << f.count << " (" << f.fraction << ")\n";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace attribroi
