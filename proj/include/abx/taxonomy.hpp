#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace abx {

struct Zone {
    int id = 0;
    std::string name;
};

struct Category {
    int id = 0;
    std::string name;
    int zone_id = 0;
};

// Product classification hierarchy: zone -> category. Groups and products
// exist in the source hierarchy but nothing downstream depends on them, so
// they are not modeled. Immutable after construction.
class Taxonomy {
public:
    Taxonomy() = default;

    // Validates uniqueness and zone coverage; zone list is derived from the
    // categories when not supplied.
    static Taxonomy from_rows(std::vector<Category> categories, std::vector<Zone> zones = {});

    // CSV with exact header `categoryId,categoryName,zoneId,zoneName`.
    static Taxonomy load_csv(const std::string& path);

    void write_csv(const std::string& path) const;

    int zone_of(int category_id) const;  // throws on unknown category
    bool has_category(int category_id) const;

    const std::vector<Category>& categories() const { return categories_; }
    const std::vector<Zone>& zones() const { return zones_; }
    const std::string& zone_name(int zone_id) const;

private:
    std::vector<Category> categories_;
    std::vector<Zone> zones_;
    std::unordered_map<int, std::size_t> category_index_;
    std::unordered_map<int, std::size_t> zone_index_;
};

// The fixture hierarchy shipped with the toolkit: 11 zones, 252 categories.
// data/taxonomy_default.csv is the same table in file form.
Taxonomy builtin_taxonomy();

}  // namespace abx
