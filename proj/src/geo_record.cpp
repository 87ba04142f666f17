#include "quitlab/geo_record.hpp"

#include "quitlab/errors.hpp"

namespace quitlab {

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
        case Split::Query: return "query";
        case Split::Database: return "database";
    }
    throw DataError("unknown split value");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    if (s == "query") return Split::Query;
    if (s == "database") return Split::Database;
    throw DataError("unknown split name: " + std::string(s));
}

}  // namespace quitlab
