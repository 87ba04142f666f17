#include "quitlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "json.hpp"
#include "quitlab/errors.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

namespace {

std::string zero_pad(std::size_t value, std::size_t width) {
    std::string s = std::to_string(value);
    if (s.size() < width) s.insert(0, width - s.size(), '0');
    return s;
}

std::size_t digits(std::size_t v) {
    std::size_t n = 1;
    while (v >= 10) {
        v /= 10;
        ++n;
    }
    return n;
}

void validate_params(const CityParams& p) {
    if (p.num_places < 1) throw DataError("generate_city: num_places must be >= 1");
    if (p.views_per_place < 3) throw DataError("generate_city: views_per_place must be >= 3");
    if (p.covisible_views < 1) throw DataError("generate_city: covisible_views must be >= 1");
    if (p.covisible_views >= p.views_per_place) {
        throw DataError("generate_city: covisible_views must be < views_per_place");
    }
    if (p.feature_dim < 1) throw DataError("generate_city: feature_dim must be >= 1");
    if (p.view_noise < 0.0 || !std::isfinite(p.view_noise)) {
        throw DataError("generate_city: view_noise must be a finite nonnegative value");
    }
    if (p.distractor_overlap < 0.0 || p.distractor_overlap > 1.0) {
        throw DataError("generate_city: distractor_overlap must lie in [0, 1]");
    }
    if (!(p.intra_place_spread_m > 0.0)) {
        throw DataError("generate_city: intra_place_spread_m must be > 0");
    }
    if (!(p.place_spacing_m > 2.0 * p.intra_place_spread_m)) {
        throw DataError("generate_city: place_spacing_m must exceed twice the spread");
    }
}

}  // namespace

std::vector<GeoRecord> generate_city(const CityParams& p) {
    validate_params(p);

    // Independent sub-streams so each ingredient has its own reproducible
    // draw sequence.
    Rng content_rng(derive_seed(p.seed, "content"));
    Rng shared_rng(derive_seed(p.seed, "shared"));
    Rng own_rng(derive_seed(p.seed, "own"));
    Rng noise_rng(derive_seed(p.seed, "noise"));
    Rng pos_rng(derive_seed(p.seed, "positions"));

    const std::size_t F = p.feature_dim;
    const std::size_t num_slots = p.views_per_place - p.covisible_views;
    std::vector<Embedding> shared(num_slots, Embedding(F));
    for (auto& dir : shared) {
        for (double& x : dir) x = shared_rng.normal();
    }

    const std::size_t place_width = std::max<std::size_t>(4, digits(p.num_places - 1));
    const std::size_t view_width = std::max<std::size_t>(3, digits(p.views_per_place - 1));
    const std::size_t cols =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p.num_places))));
    const double o = p.distractor_overlap;
    const double max_r = p.intra_place_spread_m / 2.0;

    std::vector<GeoRecord> records;
    records.reserve(p.num_places * p.views_per_place);
    Embedding content(F);
    for (std::size_t i = 0; i < p.num_places; ++i) {
        for (double& x : content) x = content_rng.normal();
        const double cx = p.place_spacing_m * static_cast<double>(i % cols);
        const double cy = p.place_spacing_m * static_cast<double>(i / cols);
        const std::string place_id = "p" + zero_pad(i, place_width);
        for (std::size_t v = 0; v < p.views_per_place; ++v) {
            GeoRecord rec;
            rec.id = place_id + "_v" + zero_pad(v, view_width);
            rec.place_id = place_id;
            rec.split = Split::Train;

            // Uniform over the disc of radius spread/2, so any two views of
            // one place sit within spread meters of each other.
            double r = max_r * std::sqrt(pos_rng.uniform01());
            double theta = 2.0 * std::numbers::pi * pos_rng.uniform01();
            rec.x_m = cx + r * std::cos(theta);
            rec.y_m = cy + r * std::sin(theta);

            rec.features.resize(F);
            if (v < p.covisible_views) {
                for (std::size_t f = 0; f < F; ++f) {
                    rec.features[f] = content[f] + p.view_noise * noise_rng.normal();
                }
            } else {
                const Embedding& slot_dir = shared[v - p.covisible_views];
                for (std::size_t f = 0; f < F; ++f) {
                    double own = own_rng.normal();
                    rec.features[f] = 0.42 * content[f] + (1.0 - o) * own + o * slot_dir[f] +
                                      p.view_noise * noise_rng.normal();
                }
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

void save_jsonl(const std::vector<GeoRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_jsonl: cannot open for writing: " + path);
    for (const GeoRecord& r : records) {
        if (!std::isfinite(r.x_m) || !std::isfinite(r.y_m)) {
            throw DataError("save_jsonl: record " + r.id + " has non-finite position");
        }
        for (double f : r.features) {
            if (!std::isfinite(f)) {
                throw DataError("save_jsonl: record " + r.id + " has non-finite features");
            }
        }
        nlohmann::json j;
        j["id"] = r.id;
        j["features"] = r.features;
        j["x_m"] = r.x_m;
        j["y_m"] = r.y_m;
        j["place_id"] = r.place_id;
        j["split"] = to_string(r.split);
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("save_jsonl: write failed: " + path);
}

std::vector<GeoRecord> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_jsonl: cannot open: " + path);
    std::vector<GeoRecord> records;
    std::map<std::string, std::size_t> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + " line " + std::to_string(line_no);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DataError("load_jsonl: malformed JSON at " + where);
        }
        static const char* const kFields[] = {"id", "features", "x_m", "y_m", "place_id", "split"};
        for (const char* f : kFields) {
            if (!j.contains(f)) {
                throw DataError("load_jsonl: missing field '" + std::string(f) + "' at " + where);
            }
        }
        if (j.size() != 6) {
            throw DataError("load_jsonl: unexpected extra fields at " + where);
        }
        GeoRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.features = j.at("features").get<std::vector<double>>();
            r.x_m = j.at("x_m").get<double>();
            r.y_m = j.at("y_m").get<double>();
            r.place_id = j.at("place_id").get<std::string>();
            r.split = split_from_string(j.at("split").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_jsonl: bad field type at " + where + ": " + e.what());
        }
        auto [it, inserted] = seen_ids.emplace(r.id, line_no);
        if (!inserted) {
            throw DataError("load_jsonl: duplicate id '" + r.id + "' at " + where +
                            " (first seen on line " + std::to_string(it->second) + ")");
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<GeoRecord> split_dataset(const std::vector<GeoRecord>& records,
                                     const SplitFractions& fractions,
                                     std::uint64_t seed) {
    const double fs[3] = {fractions.train, fractions.val, fractions.test};
    double sum = fs[0] + fs[1] + fs[2];
    for (double f : fs) {
        if (f < 0.0 || !std::isfinite(f)) throw DataError("split_dataset: negative fraction");
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("split_dataset: fractions must sum to 1");

    std::vector<std::string> places;
    std::map<std::string, std::vector<std::size_t>> by_place;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = by_place.emplace(records[i].place_id, std::vector<std::size_t>{});
        if (inserted) places.push_back(records[i].place_id);
        it->second.push_back(i);
    }
    if (places.empty()) throw DataError("split_dataset: no records");

    Rng rng(seed);
    rng.shuffle(places);

    const double n = static_cast<double>(places.size());
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        double raw = fs[s] * n;
        counts[s] = static_cast<std::size_t>(std::floor(raw));
        remainders[s] = raw - std::floor(raw);
        assigned += counts[s];
    }
    // Hand out the leftover places by largest remainder, lower split index
    // winning ties.
    std::size_t leftover = places.size() - assigned;
    std::vector<int> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (std::size_t i = 0; i < leftover; ++i) ++counts[order[i % 3]];
    for (int s = 0; s < 3; ++s) {
        if (fs[s] > 0.0 && counts[s] == 0) {
            throw DataError("split_dataset: too few places for requested fractions");
        }
    }

    std::vector<GeoRecord> out = records;
    std::size_t pos = 0;
    const Split tags[3] = {Split::Train, Split::Val, Split::Test};
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < counts[s]; ++i, ++pos) {
            const auto& idxs = by_place.at(places[pos]);
            if (tags[s] == Split::Test) {
                // One query per test place: the lexicographically greatest id.
                std::size_t query_idx = idxs[0];
                for (std::size_t idx : idxs) {
                    if (out[idx].id > out[query_idx].id) query_idx = idx;
                }
                for (std::size_t idx : idxs) {
                    out[idx].split = idx == query_idx ? Split::Query : Split::Database;
                }
            } else {
                for (std::size_t idx : idxs) out[idx].split = tags[s];
            }
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<GeoRecord>& records,
                                                    const BatchSpec& spec,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch) {
    const std::size_t P = spec.places_per_batch;
    const std::size_t V = spec.views_per_place;
    if (P < 1 || V < 1) throw DataError("epoch_batches: P and V must be >= 1");

    std::vector<std::string> places;
    std::map<std::string, std::vector<std::size_t>> by_place;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split != Split::Train) continue;
        auto [it, inserted] = by_place.emplace(records[i].place_id, std::vector<std::size_t>{});
        if (inserted) places.push_back(records[i].place_id);
        it->second.push_back(i);
    }

    Rng rng(derive_seed(seed, "epoch:" + std::to_string(epoch)));
    std::vector<std::vector<std::size_t>> groups;
    for (const std::string& place : places) {
        std::vector<std::size_t>& idxs = by_place.at(place);
        if (idxs.size() < V) continue;
        rng.shuffle(idxs);
        for (std::size_t c = 0; c + V <= idxs.size(); c += V) {
            groups.emplace_back(idxs.begin() + static_cast<std::ptrdiff_t>(c),
                                idxs.begin() + static_cast<std::ptrdiff_t>(c + V));
        }
    }
    if (groups.size() < P) {
        throw DataError("epoch_batches: need at least " + std::to_string(P) +
                        " place groups with " + std::to_string(V) + " train views, have " +
                        std::to_string(groups.size()));
    }
    rng.shuffle(groups);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b + P <= groups.size(); b += P) {
        std::vector<std::size_t> batch;
        batch.reserve(P * V);
        for (std::size_t g = 0; g < P; ++g) {
            batch.insert(batch.end(), groups[b + g].begin(), groups[b + g].end());
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace quitlab
