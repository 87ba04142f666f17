#pragma once

#include <string>
#include <string_view>

#include "quitlab/embedding.hpp"

namespace quitlab {

enum class Split {
    Train,
    Val,
    Test,
    Query,
    Database,
};

std::string to_string(Split s);
Split split_from_string(std::string_view s);

// One geo-tagged sample: a raw feature vector standing in for an image,
// a planar position in meters, and its place/split membership.
struct GeoRecord {
    std::string id;
    Embedding features;
    double x_m = 0.0;
    double y_m = 0.0;
    std::string place_id;
    Split split = Split::Train;

    bool operator==(const GeoRecord&) const = default;
};

}  // namespace quitlab
