#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quitlab/geo_record.hpp"

namespace quitlab {

// Parameters of the synthetic multi-view city. Each place gets one latent
// content vector; covisible_views of its views genuinely share that content
// (plus sensor noise), the remaining views mix attenuated content with a
// view-slot confuser direction shared across places (distractor_overlap
// controls how much), standing in for perspective-shifted near-views.
struct CityParams {
    std::size_t num_places = 100;
    std::size_t views_per_place = 8;
    std::size_t covisible_views = 2;
    std::size_t feature_dim = 32;
    double view_noise = 0.05;
    double distractor_overlap = 0.9;
    double place_spacing_m = 100.0;
    double intra_place_spread_m = 8.0;  // footprint diameter around the place center
    std::uint64_t seed = 1;
};

// Deterministic under seed; places laid out on a grid with place_spacing_m
// pitch, views scattered within intra_place_spread_m / 2 of the center. All
// records come back tagged Split::Train; split_dataset assigns the rest.
std::vector<GeoRecord> generate_city(const CityParams& p);

// One JSON object per line, fields exactly {id, features, x_m, y_m, place_id,
// split}, numbers in shortest round-trip form. load_jsonl reports malformed
// lines by line number and rejects duplicate ids.
void save_jsonl(const std::vector<GeoRecord>& records, const std::string& path);
std::vector<GeoRecord> load_jsonl(const std::string& path);

struct SplitFractions {
    double train = 1.0 / 3.0;
    double val = 1.0 / 3.0;
    double test = 1.0 / 3.0;
};

// Partitions places (never individual records) into train/val/test by seeded
// shuffle, sizing each part by floor plus largest remainder. Within each test
// place the lexicographically greatest id becomes the query and the remaining
// views database entries. Errors when a nonzero fraction receives no place.
std::vector<GeoRecord> split_dataset(const std::vector<GeoRecord>& records,
                                     const SplitFractions& fractions,
                                     std::uint64_t seed);

struct BatchSpec {
    std::size_t places_per_batch = 4;   // P
    std::size_t views_per_place = 8;    // V per place group
};

// One epoch's batches over the train records, as index lists into `records`
// of length P*V each. Every record appears in at most one batch per epoch.
// Views are shuffled within each place, chunked into V-sized groups, and the
// pooled groups shuffled; leftover groups that do not fill a batch are
// dropped. Deterministic in (seed, epoch).
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<GeoRecord>& records,
                                                    const BatchSpec& spec,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch);

}  // namespace quitlab
