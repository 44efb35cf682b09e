#include "abx/taxonomy.hpp"

#include <fstream>
#include <sstream>

#include "abx/error.hpp"

namespace abx {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int parse_int_field(const std::string& s, const char* what, std::size_t line_no,
                    const std::string& path) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw_io(path + ":" + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

}  // namespace

Taxonomy Taxonomy::from_rows(std::vector<Category> categories, std::vector<Zone> zones) {
    Taxonomy t;
    t.categories_ = std::move(categories);
    t.zones_ = std::move(zones);
    if (t.categories_.empty()) throw_config("taxonomy: no categories");

    if (t.zones_.empty()) {
        for (const auto& c : t.categories_) {
            if (!t.zone_index_.count(c.zone_id)) {
                t.zone_index_[c.zone_id] = t.zones_.size();
                t.zones_.push_back({c.zone_id, "zone " + std::to_string(c.zone_id)});
            }
        }
        t.zone_index_.clear();
    }

    for (std::size_t i = 0; i < t.zones_.size(); ++i) {
        if (!t.zone_index_.emplace(t.zones_[i].id, i).second)
            throw_config("taxonomy: duplicate zoneId " + std::to_string(t.zones_[i].id));
    }
    for (std::size_t i = 0; i < t.categories_.size(); ++i) {
        const auto& c = t.categories_[i];
        if (!t.category_index_.emplace(c.id, i).second)
            throw_config("taxonomy: duplicate categoryId " + std::to_string(c.id));
        if (!t.zone_index_.count(c.zone_id))
            throw_config("taxonomy: category " + std::to_string(c.id) + " references unknown zone " +
                         std::to_string(c.zone_id));
    }
    return t;
}

Taxonomy Taxonomy::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open taxonomy file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw_io(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "categoryId,categoryName,zoneId,zoneName")
        throw_io(path + ":1: expected header 'categoryId,categoryName,zoneId,zoneName', got '" + line + "'");

    std::vector<Category> cats;
    std::vector<Zone> zones;
    std::unordered_map<int, std::size_t> seen_cat;   // id -> line
    std::unordered_map<int, std::string> zone_names;
    std::vector<int> zone_order;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 4)
            throw_io(path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                     std::to_string(f.size()));
        for (std::size_t i = 0; i < 4; ++i)
            if (f[i].empty())
                throw_io(path + ":" + std::to_string(line_no) + ": empty field " + std::to_string(i + 1));

        int cat_id = parse_int_field(f[0], "categoryId", line_no, path);
        int zone_id = parse_int_field(f[2], "zoneId", line_no, path);

        auto prev = seen_cat.find(cat_id);
        if (prev != seen_cat.end())
            throw_io(path + ":" + std::to_string(line_no) + ": duplicate categoryId " +
                     std::to_string(cat_id) + " (first seen at line " + std::to_string(prev->second) + ")");
        seen_cat[cat_id] = line_no;

        auto zn = zone_names.find(zone_id);
        if (zn == zone_names.end()) {
            zone_names[zone_id] = f[3];
            zone_order.push_back(zone_id);
        } else if (zn->second != f[3]) {
            throw_io(path + ":" + std::to_string(line_no) + ": zone " + std::to_string(zone_id) +
                     " renamed from '" + zn->second + "' to '" + f[3] + "'");
        }
        cats.push_back({cat_id, f[1], zone_id});
    }
    for (int zid : zone_order) zones.push_back({zid, zone_names[zid]});
    return from_rows(std::move(cats), std::move(zones));
}

void Taxonomy::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw_io("cannot write taxonomy file: " + path);
    out << "categoryId,categoryName,zoneId,zoneName\n";
    for (const auto& c : categories_)
        out << c.id << ',' << c.name << ',' << c.zone_id << ',' << zone_name(c.zone_id) << '\n';
    if (!out) throw_io("write failed: " + path);
}

int Taxonomy::zone_of(int category_id) const {
    auto it = category_index_.find(category_id);
    if (it == category_index_.end())
        throw_model("unknown categoryId " + std::to_string(category_id));
    return categories_[it->second].zone_id;
}

bool Taxonomy::has_category(int category_id) const {
    return category_index_.count(category_id) != 0;
}

const std::string& Taxonomy::zone_name(int zone_id) const {
    auto it = zone_index_.find(zone_id);
    if (it == zone_index_.end()) throw_model("unknown zoneId " + std::to_string(zone_id));
    return zones_[it->second].name;
}

namespace {

struct ZoneSpec {
    int id;
    const char* name;
    std::vector<const char*> categories;
};

const std::vector<ZoneSpec>& builtin_zone_specs() {
    static const std::vector<ZoneSpec> specs = {
        {1, "Communication",
         {"Smartphone", "Feature Phone", "Service Plan", "Prepaid SIM", "Phone Case",
          "Screen Protector", "Power Bank", "Phone Charger", "Bluetooth Headset", "Smart Watch",
          "Fitness Band", "Cordless Phone", "Walkie Talkie", "Phone Holder", "Selfie Stick",
          "SIM Adapter", "Car Charger", "Phone Repair Kit"}},
        {2, "Camera and Photo",
         {"SLR", "Mirrorless Camera", "Compact Camera", "Action Camera", "Instant Camera",
          "Camcorder", "Camera Lens", "Telephoto Lens", "Prime Lens", "Tripod", "Monopod",
          "Gimbal", "Camera Flash", "Studio Light", "Light Meter", "Memory Card", "Camera Bag",
          "Camera Battery", "Battery Grip", "Lens Filter", "Lens Hood", "Photo Printer",
          "Photo Paper", "Camera Strap"}},
        {3, "Audio Visual",
         {"LED TV", "OLED TV", "Projector", "Soundbar", "Home Theatre", "AV Receiver",
          "Hi-Fi Amplifier", "Turntable", "CD Player", "Blu-ray Player", "Set-top Box",
          "Streaming Box", "Bookshelf Speaker", "Floor Speaker", "Portable Speaker", "Headphone",
          "Earphone", "Wireless Earbuds", "Microphone", "Karaoke Machine", "TV Mount",
          "HDMI Cable", "Speaker Cable", "Media Server", "Digital Radio", "Subwoofer"}},
        {4, "Computer",
         {"Notebook", "Gaming Notebook", "Ultrabook", "Desktop PC", "Gaming Desktop", "Mini PC",
          "Tablet", "Monitor", "Gaming Monitor", "CPU", "Motherboard", "Graphics Card",
          "RAM Module", "SSD", "Hard Drive", "External Drive", "USB Flash Drive", "NAS",
          "PC Case", "Power Supply", "CPU Cooler", "Case Fan", "Keyboard", "Mechanical Keyboard",
          "Mouse", "Gaming Mouse", "Mouse Pad", "Webcam", "Router", "Mesh Router",
          "Network Switch", "USB Hub", "Docking Station", "Laptop Bag", "Laptop Stand", "Printer",
          "Ink Cartridge", "Scanner", "UPS", "Thermal Paste"}},
        {5, "Beauty and Health",
         {"Hair Dryer", "Hair Straightener", "Hair Curler", "Electric Shaver", "Lady Shaver",
          "Epilator", "Facial Steamer", "Facial Cleanser", "Massage Gun", "Neck Massager",
          "Foot Spa", "Blood Pressure Monitor", "Glucose Meter", "Thermometer", "Body Scale",
          "Electric Toothbrush", "Water Flosser", "Nail Dryer", "UV Sanitizer", "Hearing Aid"}},
        {6, "Home Appliance",
         {"Heater", "Air Conditioner", "Fan", "Dehumidifier", "Air Purifier", "Humidifier",
          "Refrigerator", "Freezer", "Washer", "Dryer", "Dishwasher", "Vacuum Cleaner",
          "Robot Vacuum", "Steam Mop", "Microwave Oven", "Built-in Oven", "Toaster Oven",
          "Rice Cooker", "Pressure Cooker", "Slow Cooker", "Induction Cooker", "Range Hood",
          "Water Heater", "Water Dispenser", "Kettle", "Coffee Machine", "Blender", "Juicer",
          "Food Processor", "Iron"}},
        {7, "Baby and Toys",
         {"Baby Formula", "Diaper", "Baby Wipes", "Stroller", "Car Seat", "Baby Carrier",
          "Baby Monitor", "Bottle Sterilizer", "Milk Warmer", "Breast Pump", "High Chair",
          "Playpen", "Baby Crib", "Building Blocks", "Doll", "RC Car", "Board Game", "Puzzle"}},
        {8, "Games and Hobbies",
         {"Game Console", "Handheld Console", "Console Game", "PC Game", "Game Controller",
          "Racing Wheel", "VR Headset", "Gaming Headset", "Arcade Stick", "Trading Card",
          "Model Kit", "Diecast Model", "Drone", "Telescope", "Binoculars", "Electric Guitar",
          "Acoustic Guitar", "Digital Piano", "Keyboard Instrument", "Ukulele", "Sewing Machine",
          "3D Printer"}},
        {9, "Sports and Outdoor",
         {"Treadmill", "Exercise Bike", "Rowing Machine", "Dumbbell", "Yoga Mat", "Bicycle",
          "Folding Bike", "Bike Helmet", "Tent", "Sleeping Bag", "Camping Stove",
          "Hiking Backpack", "Fishing Rod", "Badminton Racket", "Tennis Racket", "Running Shoes"}},
        {10, "Office Supplies",
         {"Office Chair", "Standing Desk", "Desk Lamp", "Laser Printer", "Label Printer",
          "Laminator", "Paper Shredder", "Projector Screen", "Whiteboard", "Calculator",
          "Fountain Pen", "Notepad", "Stapler", "File Cabinet", "Desk Organizer",
          "Conference Phone", "Time Recorder", "Cash Register", "Safe Box", "Banknote Counter"}},
        {11, "Household",
         {"LED Bulb", "Ceiling Light", "Floor Lamp", "Smart Plug", "Smart Lock", "Door Bell",
          "CCTV Camera", "Mattress", "Pillow", "Bed Frame", "Sofa", "Dining Table", "Bookshelf",
          "Wardrobe", "Curtain", "Cookware Set", "Dinnerware Set", "Storage Box"}},
    };
    return specs;
}

}  // namespace

Taxonomy builtin_taxonomy() {
    std::vector<Category> cats;
    std::vector<Zone> zones;
    for (const auto& z : builtin_zone_specs()) {
        zones.push_back({z.id, z.name});
        int seq = 1;
        for (const char* name : z.categories) cats.push_back({z.id * 100 + seq++, name, z.id});
    }
    return Taxonomy::from_rows(std::move(cats), std::move(zones));
}

}  // namespace abx
