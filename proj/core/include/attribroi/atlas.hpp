#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attribroi/attribution.hpp"
#include "attribroi/image.hpp"

namespace attribroi {

// Label grid plus per-ROI metadata. Label 0 = background.
struct RoiAtlas {
    LabelGrid labels;
    std::map<std::uint16_t, std::string> names;
    std::map<std::uint16_t, std::vector<std::string>> brodmann;
};

// Every nonzero grid label must have a name entry; ids must be nonzero.
void validate_atlas(const RoiAtlas& atlas);

// Sorted list of the atlas' ROI ids (the name-table keys).
std::vector<std::uint16_t> roi_ids(const RoiAtlas& atlas);

// 16-bit PGM grid at `grid_path`, JSON sidecar alongside with .json extension.
void save_atlas(const RoiAtlas& atlas, const std::string& grid_path);
RoiAtlas load_atlas(const std::string& grid_path);

struct RoiScore {
    std::uint16_t id = 0;
    double mean = 0.0;
    double share = 0.0;
    std::size_t rank = 0;
};

// Ranked per-ROI aggregation of one attribution map. Entries sorted by rank.
struct RoiScoreTable {
    std::string method;
    std::string subject_id;
    std::vector<RoiScore> scores;
};

// Mean |value| per ROI; share of total nonbackground mass; rank by mean
// descending, ties by ascending id.
RoiScoreTable aggregate_roi(const AttributionMap& map, const RoiAtlas& atlas);

// Ids of the first k ranks.
std::vector<std::uint16_t> top_rois(const RoiScoreTable& table, std::size_t k);

struct RoiFrequency {
    std::uint16_t id = 0;
    std::size_t count = 0;
    double fraction = 0.0;
};

// How often each ROI shows up across per-subject top lists. Sorted by count
// descending, ties by ascending id.
std::vector<RoiFrequency> roi_frequency(
    const std::vector<std::vector<std::uint16_t>>& subject_tops);

struct MethodTop {
    std::string method;
    std::vector<std::uint16_t> rois;              // rank order
    std::vector<RoiFrequency> frequencies;        // may be empty (single subject)
};

struct RoiAnnotation {
    std::uint16_t id = 0;
    std::string name;
    std::vector<std::string> brodmann;  // empty renders as "-"
};

struct ConsensusReport {
    std::vector<std::string> methods;
    std::map<std::string, std::vector<RoiAnnotation>> top;       // method -> ranked list
    std::map<std::string, std::vector<RoiAnnotation>> pairwise;  // "a&b" -> sorted by id
    std::vector<RoiAnnotation> threeway;                         // sorted by id
    std::map<std::string, std::vector<RoiFrequency>> frequencies;
};

ConsensusReport consensus(const MethodTop& a, const MethodTop& b, const MethodTop& c,
                          const RoiAtlas& atlas);

std::string consensus_to_json(const ConsensusReport& report);
std::string consensus_to_text(const ConsensusReport& report);

inline constexpr std::size_t kDefaultTopK = 5;

}  // namespace attribroi
