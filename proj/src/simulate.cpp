#include "abx/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "abx/error.hpp"
#include "abx/normal.hpp"
#include "abx/rng.hpp"

namespace abx {

namespace {

struct UaEntry {
    const char* ua;
    double weight;
};

const UaEntry kBrowserUas[] = {
    {"Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
     "Chrome/49.0.2623.110 Safari/537.36", 0.34},
    {"Mozilla/5.0 (Macintosh; Intel Mac OS X 10_11_4) AppleWebKit/537.36 (KHTML, like Gecko) "
     "Chrome/49.0.2623.87 Safari/537.36", 0.11},
    {"Mozilla/5.0 (Macintosh; Intel Mac OS X 10_11_4) AppleWebKit/601.5.17 (KHTML, like Gecko) "
     "Version/9.1 Safari/601.5.17", 0.10},
    {"Mozilla/5.0 (iPhone; CPU iPhone OS 9_3 like Mac OS X) AppleWebKit/601.1.46 (KHTML, like "
     "Gecko) Version/9.0 Mobile/13E233 Safari/601.1", 0.12},
    {"Mozilla/5.0 (Windows NT 6.1; WOW64; rv:45.0) Gecko/20100101 Firefox/45.0", 0.14},
    {"Mozilla/5.0 (Windows NT 10.0) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/46.0.2486.0 "
     "Safari/537.36 Edge/13.10586", 0.06},
    {"Mozilla/5.0 (Windows NT 6.1; Trident/7.0; rv:11.0) like Gecko", 0.08},
    {"Mozilla/5.0 (Windows NT 6.1; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
     "Chrome/48.0.2564.109 Safari/537.36 OPR/35.0.2066.92", 0.05},
};

const char* kBotUas[] = {
    "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)",
    "Mozilla/5.0 (compatible; bingbot/2.0; +http://www.bing.com/bingbot.htm)",
    "Mozilla/5.0 (compatible; Baiduspider/2.0; +http://www.baidu.com/search/spider.html)",
};

constexpr int kUaCount = 8;
constexpr int kBotUaCount = 3;

std::string hex_token(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Session-weighted mean of log(visit count) under the rounded, clamped
// log-normal draw; used to center the per-user usage boost so that the
// session-level mean click rate is unaffected.
double session_weighted_log_visits(double mean_visits, double sigma, int cap) {
    const double mu = std::log(mean_visits) - 0.5 * sigma * sigma;
    double num = 0.0, den = 0.0;
    for (int k = 1; k <= cap; ++k) {
        double p;
        if (k == 1) {
            p = normal_cdf((std::log(1.5) - mu) / sigma);
        } else if (k == cap) {
            p = 1.0 - normal_cdf((std::log(cap - 0.5) - mu) / sigma);
        } else {
            p = normal_cdf((std::log(k + 0.5) - mu) / sigma) -
                normal_cdf((std::log(k - 0.5) - mu) / sigma);
        }
        num += std::log(static_cast<double>(k)) * k * p;
        den += k * p;
    }
    return den > 0.0 ? num / den : 0.0;
}

struct SimRecord {
    int64_t ts;
    uint32_t user;
    uint32_t visit;
    uint32_t product;
    uint16_t cat_index;
    uint16_t seq;
    uint8_t kind;  // 0 render, 1 pixel, 2 click
    uint8_t page;
    uint8_t items;
    uint8_t pos;
    uint8_t treat;
    uint8_t login;
    uint8_t ua;  // index into browser/bot tables (bots offset by kUaCount)
    uint8_t bot;
};

struct SimTables {
    std::vector<int> cat_ids;
    std::vector<int> cat_zone;
    std::vector<double> cat_lambda;
    std::vector<double> cat_ate;
    std::vector<double> cat_cum;   // cumulative traffic weights
    std::vector<double> page_cum;
    std::vector<double> ua_cum;
    double log_center = 0.0;
    double mean_visits = 0.0;
    int64_t period_ms = 0;
    int64_t expiry_ms_threshold = 0;  // cookie expiry in ms (may be huge)
    double expiry_ms = 0.0;
};

SimTables build_tables(const ExperimentConfig& cfg) {
    SimTables t;
    const auto& cats = cfg.taxonomy.categories();

    // Zone traffic shares spread across that zone's categories.
    std::map<int, double> zone_cat_weight_sum;
    for (const auto& c : cats) {
        auto it = cfg.cat_weight.find(c.id);
        zone_cat_weight_sum[c.zone_id] += it == cfg.cat_weight.end() ? 1.0 : it->second;
    }

    double cum = 0.0;
    for (const auto& c : cats) {
        t.cat_ids.push_back(c.id);
        t.cat_zone.push_back(c.zone_id);
        t.cat_lambda.push_back(cfg.cat_lambda.at(c.id));
        auto za = cfg.zone_ate.find(c.zone_id);
        t.cat_ate.push_back(za == cfg.zone_ate.end() ? 0.0 : za->second);
        auto zw = cfg.zone_weight.find(c.zone_id);
        const double zone_w = zw == cfg.zone_weight.end() ? 1.0 : zw->second;
        auto cw = cfg.cat_weight.find(c.id);
        const double cat_w = cw == cfg.cat_weight.end() ? 1.0 : cw->second;
        cum += zone_w * cat_w / zone_cat_weight_sum[c.zone_id];
        t.cat_cum.push_back(cum);
    }

    cum = 0.0;
    for (double p : cfg.page_count_dist) t.page_cum.push_back(cum += p);
    cum = 0.0;
    for (const auto& e : kBrowserUas) t.ua_cum.push_back(cum += e.weight);

    t.period_ms = cfg.end_ms() - cfg.start_ms;
    t.expiry_ms = cfg.cookie_expiry_hours * 3600000.0;
    t.mean_visits =
        cfg.visit_rate_per_user_per_day * static_cast<double>(cfg.aa_days + cfg.ab_days);
    t.log_center =
        session_weighted_log_visits(t.mean_visits, cfg.visit_count_sigma, cfg.max_visits_per_user);
    return t;
}

// Generates one user's records. The per-user substream makes this function
// pure in (cfg, tables, user index).
void generate_user(const ExperimentConfig& cfg, const SimTables& t, uint32_t user,
                   std::vector<SimRecord>& out, SimCounts& counts) {
    Rng rng(cfg.seed, user);

    const bool is_bot = rng.bernoulli(cfg.bot_fraction);
    const bool declared = is_bot && rng.bernoulli(cfg.bot_declared_share);
    const bool flooder = is_bot && !declared;
    const uint8_t login = rng.bernoulli(cfg.logged_in_prob) ? 1 : 0;
    uint8_t ua;
    if (declared)
        ua = static_cast<uint8_t>(kUaCount + rng.uniform_below(kBotUaCount));
    else
        ua = static_cast<uint8_t>(rng.categorical(t.ua_cum));

    int visits;
    if (flooder) {
        visits = cfg.bot_flood_visits;
    } else {
        const double mu = std::log(t.mean_visits) - 0.5 * cfg.visit_count_sigma * cfg.visit_count_sigma;
        const double draw = rng.lognormal(mu, cfg.visit_count_sigma);
        visits = static_cast<int>(std::llround(draw));
        visits = std::clamp(visits, 1, cfg.max_visits_per_user);
    }

    // Active span grows with usage; visits fall uniformly inside it.
    double span_ms = static_cast<double>(t.period_ms);
    if (flooder) {
        span_ms = 0.9 * t.period_ms;
    } else if (visits > 1) {
        const double median_h = cfg.span_scale_hours * std::pow(visits, cfg.span_power);
        span_ms = std::min(static_cast<double>(t.period_ms),
                           rng.lognormal(std::log(median_h * 3600000.0), cfg.span_sigma));
    } else {
        span_ms = 0.0;
    }
    const double start_slack = t.period_ms - span_ms;
    const double start = cfg.start_ms + rng.next_double() * start_slack;

    std::vector<int64_t> times(visits);
    for (int i = 0; i < visits; ++i)
        times[i] = static_cast<int64_t>(start + rng.next_double() * span_ms);
    std::sort(times.begin(), times.end());

    const double boost = cfg.usage_click_boost * (std::log(static_cast<double>(visits)) - t.log_center);

    uint8_t treat = rng.bernoulli(cfg.assign_prob) ? 1 : 0;
    double assign_at = static_cast<double>(times.empty() ? 0 : times[0]);

    const int64_t cutover = cfg.cutover_ms();
    auto push = [&](int64_t ts, uint32_t visit, uint8_t kind, uint16_t cat_index, uint8_t page,
                    uint8_t items, uint8_t pos, uint32_t product, uint16_t seq) {
        out.push_back(SimRecord{ts, user, visit, product, cat_index, seq, kind, page, items, pos,
                                treat, login, ua, static_cast<uint8_t>(is_bot ? 1 : 0)});
        ++counts.records;
        if (is_bot) ++counts.bot_records;
        if (kind == 0) ++counts.renders;
        if (kind == 1) {
            ++counts.beacons;
            if (is_bot) {
                ++counts.bot_beacons;
            } else if (ts < cutover) {
                ++counts.sessions_aa;
            } else {
                ++counts.sessions_ab;
            }
        }
        if (kind == 2) ++counts.clicks;
    };

    for (int v = 0; v < visits; ++v) {
        const int64_t ts = times[v];
        if (static_cast<double>(ts) - assign_at > t.expiry_ms) {
            treat = rng.bernoulli(cfg.assign_prob) ? 1 : 0;
            assign_at = static_cast<double>(ts);
        }

        const uint16_t cat_index = static_cast<uint16_t>(rng.categorical(t.cat_cum));
        const uint8_t page =
            flooder ? 1 : static_cast<uint8_t>(rng.categorical(t.page_cum) + 1);
        uint8_t items = static_cast<uint8_t>(cfg.items_per_page_max);
        if (!flooder && !rng.bernoulli(cfg.items_full_prob))
            items = static_cast<uint8_t>(3 + rng.uniform_below(12));

        uint16_t seq = 0;
        push(ts, v, 0, cat_index, page, items, 0, 0, seq++);

        const bool beacon_ok = !rng.bernoulli(cfg.pixel_loss_prob);
        const int64_t beacon_ts = ts + 150 + static_cast<int64_t>(rng.uniform_below(750));
        if (beacon_ok) push(beacon_ts, v, 1, cat_index, page, items, 0, 0, seq++);

        if (flooder) {
            for (int p = 1; p <= 15; ++p) {
                const int64_t cts = ts + 1000 + 350 * p + static_cast<int64_t>(rng.uniform_below(300));
                const uint32_t product =
                    static_cast<uint32_t>(t.cat_ids[cat_index]) * 1000 + 1 +
                    static_cast<uint32_t>(rng.uniform_below(999));
                push(cts, v, 2, cat_index, page, items, static_cast<uint8_t>(p), product, seq++);
            }
            continue;
        }

        const bool effect_on = (beacon_ok ? beacon_ts : ts) >= cutover;
        double rate = t.cat_lambda[cat_index] + boost;
        if (effect_on && treat) rate += t.cat_ate[cat_index];
        const uint64_t clicks = rng.poisson(std::max(0.0, rate));
        for (uint64_t c = 0; c < clicks; ++c) {
            const int64_t cts =
                beacon_ts + 400 + static_cast<int64_t>(rng.uniform_below(600000));
            const uint8_t pos = static_cast<uint8_t>(1 + rng.uniform_below(items));
            const uint32_t product = static_cast<uint32_t>(t.cat_ids[cat_index]) * 1000 + 1 +
                                     static_cast<uint32_t>(rng.uniform_below(999));
            push(cts, v, 2, cat_index, page, items, pos, product, seq++);
        }
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.taxonomy = builtin_taxonomy();
    cfg.rebuild_category_tables();
    return cfg;
}

void ExperimentConfig::rebuild_category_tables() {
    zone_ate.clear();
    zone_weight.clear();
    cat_lambda.clear();
    cat_weight.clear();

    // Traffic shares and effects for the stock 11-zone hierarchy; any other
    // hierarchy starts from a flat calibration and relies on config overrides.
    const std::map<int, double> stock_weight = {{2, 0.12}, {3, 0.10}, {4, 0.39}, {6, 0.24}};
    const std::map<int, double> stock_ate = {{2, -0.012}, {3, 0.011}, {4, 0.012}, {6, 0.029}};
    const std::map<int, double> stock_base = {{1, 0.28}, {2, 0.30}, {3, 0.29}, {4, 0.30},
                                              {5, 0.26}, {6, 0.36}, {7, 0.24}, {8, 0.27},
                                              {9, 0.25}, {10, 0.22}, {11, 0.26}};

    bool stock = true;
    for (const auto& z : taxonomy.zones())
        if (!stock_base.count(z.id)) stock = false;

    const std::size_t n_zones = taxonomy.zones().size();
    double other_weight = 0.0;
    std::size_t n_other = 0;
    if (stock) {
        for (const auto& z : taxonomy.zones())
            if (!stock_weight.count(z.id)) ++n_other;
        other_weight = n_other ? 0.15 / static_cast<double>(n_other) : 0.0;
    }
    for (const auto& z : taxonomy.zones()) {
        if (stock) {
            auto w = stock_weight.find(z.id);
            zone_weight[z.id] = w != stock_weight.end() ? w->second : other_weight;
            auto a = stock_ate.find(z.id);
            zone_ate[z.id] = a != stock_ate.end() ? a->second : -0.002;
        } else {
            zone_weight[z.id] = 1.0 / static_cast<double>(n_zones);
            zone_ate[z.id] = 0.0;
        }
    }

    // Per-category rates wobble around the zone base with a golden-ratio
    // stride, then everything is rescaled so the session-weighted control
    // mean hits control_mean_target exactly.
    constexpr double kGolden = 0.6180339887498949;
    std::map<int, int> zone_seq;
    std::map<int, int> zone_sizes;
    for (const auto& c : taxonomy.categories()) ++zone_sizes[c.zone_id];
    double weighted_mean = 0.0;
    for (const auto& c : taxonomy.categories()) {
        const int i = zone_seq[c.zone_id]++;
        double base = control_mean_target;
        if (stock) base = stock_base.at(c.zone_id);
        const double frac = std::fmod((i + 1) * kGolden, 1.0);
        const double lambda = base * (0.6 + 0.8 * frac);
        cat_lambda[c.id] = lambda;
        cat_weight[c.id] = 1.0;
        weighted_mean += zone_weight[c.zone_id] * lambda / zone_sizes[c.zone_id];
    }
    double total_zone_weight = 0.0;
    for (const auto& [zid, w] : zone_weight) total_zone_weight += w;
    weighted_mean /= total_zone_weight;
    const double scale = control_mean_target / weighted_mean;
    for (auto& [cid, l] : cat_lambda) l *= scale;
}

namespace {

int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw_config("config key '" + key + "': bad integer '" + value + "'");
    }
}

double parse_f64(const std::string& key, const std::string& value) {
    if (value == "inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw_config("config key '" + key + "': bad number '" + value + "'");
    }
}

}  // namespace

void ExperimentConfig::apply_key(const std::string& key, const std::string& value) {
    auto starts = [&](const char* p) { return key.rfind(p, 0) == 0; };

    if (key == "sim.seed") seed = static_cast<uint64_t>(parse_i64(key, value));
    else if (key == "sim.nUsers") n_users = parse_i64(key, value);
    else if (key == "sim.aaDays") aa_days = static_cast<int>(parse_i64(key, value));
    else if (key == "sim.abDays") ab_days = static_cast<int>(parse_i64(key, value));
    else if (key == "sim.startMs") start_ms = parse_i64(key, value);
    else if (key == "sim.visitRatePerUserPerDay") visit_rate_per_user_per_day = parse_f64(key, value);
    else if (key == "sim.visitCountSigma") visit_count_sigma = parse_f64(key, value);
    else if (key == "sim.maxVisitsPerUser") max_visits_per_user = static_cast<int>(parse_i64(key, value));
    else if (key == "sim.spanScaleHours") span_scale_hours = parse_f64(key, value);
    else if (key == "sim.spanPower") span_power = parse_f64(key, value);
    else if (key == "sim.spanSigma") span_sigma = parse_f64(key, value);
    else if (key == "sim.cookieExpiryHours") cookie_expiry_hours = parse_f64(key, value);
    else if (key == "sim.assignProb") assign_prob = parse_f64(key, value);
    else if (key == "sim.usageClickBoost") usage_click_boost = parse_f64(key, value);
    else if (key == "sim.loggedInProb") logged_in_prob = parse_f64(key, value);
    else if (key == "sim.botFraction") bot_fraction = parse_f64(key, value);
    else if (key == "sim.botDeclaredShare") bot_declared_share = parse_f64(key, value);
    else if (key == "sim.botFloodVisits") bot_flood_visits = static_cast<int>(parse_i64(key, value));
    else if (key == "sim.pixelLossProb") pixel_loss_prob = parse_f64(key, value);
    else if (key == "sim.itemsPerPageMax") items_per_page_max = static_cast<int>(parse_i64(key, value));
    else if (key == "sim.itemsFullProb") items_full_prob = parse_f64(key, value);
    else if (key == "sim.controlMean") control_mean_target = parse_f64(key, value);
    else if (key == "sim.pageDist") {
        page_count_dist.clear();
        std::stringstream ss(value);
        std::string piece;
        while (std::getline(ss, piece, ','))
            page_count_dist.push_back(parse_f64(key, piece));
        if (page_count_dist.empty()) throw_config("config key 'sim.pageDist': empty distribution");
    } else if (starts("zone.") || starts("cat.")) {
        const bool is_zone = starts("zone.");
        const std::size_t first = key.find('.');
        const std::size_t second = key.find('.', first + 1);
        if (second == std::string::npos)
            throw_config("config key '" + key + "': expected <zone|cat>.<id>.<field>");
        const std::string id_str = key.substr(first + 1, second - first - 1);
        const std::string field = key.substr(second + 1);
        const int id = static_cast<int>(parse_i64(key, id_str));
        const double v = parse_f64(key, value);
        if (is_zone && field == "ate") zone_ate[id] = v;
        else if (is_zone && field == "weight") zone_weight[id] = v;
        else if (!is_zone && field == "lambda") cat_lambda[id] = v;
        else if (!is_zone && field == "weight") cat_weight[id] = v;
        else throw_config("config key '" + key + "': unknown field '" + field + "'");
    } else {
        throw_config("unknown config key '" + key + "'");
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open config file: " + path);

    std::vector<std::pair<std::string, std::string>> pairs;
    std::string taxonomy_path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        // trim
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw_config(path + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            const std::size_t sb = s.find_first_not_of(" \t");
            if (sb == std::string::npos) {
                s.clear();
                return;
            }
            const std::size_t se = s.find_last_not_of(" \t");
            s = s.substr(sb, se - sb + 1);
        };
        strip(key);
        strip(value);
        if (key.empty()) throw_config(path + ":" + std::to_string(line_no) + ": empty key");
        if (key == "sim.taxonomy")
            taxonomy_path = value;
        else
            pairs.emplace_back(std::move(key), std::move(value));
    }

    ExperimentConfig cfg;
    cfg.taxonomy = taxonomy_path.empty() ? builtin_taxonomy() : Taxonomy::load_csv(taxonomy_path);
    // controlMean influences the derived tables, so pick it up first.
    for (const auto& [k, v] : pairs)
        if (k == "sim.controlMean") cfg.control_mean_target = parse_f64(k, v);
    cfg.rebuild_category_tables();
    for (const auto& [k, v] : pairs) cfg.apply_key(k, v);
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::dump() const {
    std::string out;
    char buf[128];
    auto kv_i = [&](const char* k, int64_t v) {
        std::snprintf(buf, sizeof buf, "%s=%lld\n", k, static_cast<long long>(v));
        out += buf;
    };
    auto kv_f = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%s=%.17g\n", k, v);
        out += buf;
    };
    kv_i("sim.seed", static_cast<int64_t>(seed));
    kv_i("sim.nUsers", n_users);
    kv_i("sim.aaDays", aa_days);
    kv_i("sim.abDays", ab_days);
    kv_i("sim.startMs", start_ms);
    kv_f("sim.visitRatePerUserPerDay", visit_rate_per_user_per_day);
    kv_f("sim.visitCountSigma", visit_count_sigma);
    kv_i("sim.maxVisitsPerUser", max_visits_per_user);
    kv_f("sim.spanScaleHours", span_scale_hours);
    kv_f("sim.spanPower", span_power);
    kv_f("sim.spanSigma", span_sigma);
    kv_f("sim.cookieExpiryHours", cookie_expiry_hours);
    kv_f("sim.assignProb", assign_prob);
    kv_f("sim.usageClickBoost", usage_click_boost);
    kv_f("sim.loggedInProb", logged_in_prob);
    kv_f("sim.botFraction", bot_fraction);
    kv_f("sim.botDeclaredShare", bot_declared_share);
    kv_i("sim.botFloodVisits", bot_flood_visits);
    kv_f("sim.pixelLossProb", pixel_loss_prob);
    kv_i("sim.itemsPerPageMax", items_per_page_max);
    kv_f("sim.itemsFullProb", items_full_prob);
    kv_f("sim.controlMean", control_mean_target);
    out += "sim.pageDist=";
    for (std::size_t i = 0; i < page_count_dist.size(); ++i) {
        std::snprintf(buf, sizeof buf, i ? ",%.17g" : "%.17g", page_count_dist[i]);
        out += buf;
    }
    out += '\n';
    for (const auto& [id, v] : zone_weight) {
        std::snprintf(buf, sizeof buf, "zone.%d.weight=%.17g\n", id, v);
        out += buf;
    }
    for (const auto& [id, v] : zone_ate) {
        std::snprintf(buf, sizeof buf, "zone.%d.ate=%.17g\n", id, v);
        out += buf;
    }
    for (const auto& [id, v] : cat_weight) {
        std::snprintf(buf, sizeof buf, "cat.%d.weight=%.17g\n", id, v);
        out += buf;
    }
    for (const auto& [id, v] : cat_lambda) {
        std::snprintf(buf, sizeof buf, "cat.%d.lambda=%.17g\n", id, v);
        out += buf;
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (n_users <= 0) throw_config("sim.nUsers must be positive");
    if (aa_days <= 0 || ab_days <= 0) throw_config("sim.aaDays and sim.abDays must be positive");
    if (start_ms <= 0) throw_config("sim.startMs must be positive");
    if (!(visit_rate_per_user_per_day > 0)) throw_config("sim.visitRatePerUserPerDay must be positive");
    if (!(visit_count_sigma > 0)) throw_config("sim.visitCountSigma must be positive");
    if (max_visits_per_user < 1) throw_config("sim.maxVisitsPerUser must be at least 1");
    if (!(span_scale_hours > 0) || !(span_sigma > 0) || span_power < 0)
        throw_config("span parameters must be positive");
    if (!(cookie_expiry_hours > 0)) throw_config("sim.cookieExpiryHours must be positive");
    auto check_prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw_config(std::string(name) + " must lie in [0,1]");
    };
    check_prob(assign_prob, "sim.assignProb");
    check_prob(logged_in_prob, "sim.loggedInProb");
    check_prob(bot_fraction, "sim.botFraction");
    check_prob(bot_declared_share, "sim.botDeclaredShare");
    check_prob(pixel_loss_prob, "sim.pixelLossProb");
    check_prob(items_full_prob, "sim.itemsFullProb");
    if (bot_flood_visits < 1) throw_config("sim.botFloodVisits must be at least 1");
    if (items_per_page_max < 1 || items_per_page_max > 15)
        throw_config("sim.itemsPerPageMax must lie in 1..15");
    if (page_count_dist.empty()) throw_config("sim.pageDist must not be empty");
    double page_sum = 0.0;
    for (double p : page_count_dist) {
        if (p < 0.0) throw_config("sim.pageDist entries must be nonnegative");
        page_sum += p;
    }
    if (!(page_sum > 0.0)) throw_config("sim.pageDist must have positive mass");
    if (taxonomy.categories().empty()) throw_config("taxonomy has no categories");

    for (const auto& c : taxonomy.categories()) {
        auto it = cat_lambda.find(c.id);
        if (it == cat_lambda.end())
            throw_config("no lambda configured for categoryId " + std::to_string(c.id));
        if (it->second < 0.0)
            throw_config("cat." + std::to_string(c.id) + ".lambda must be nonnegative");
        auto za = zone_ate.find(c.zone_id);
        const double ate = za == zone_ate.end() ? 0.0 : za->second;
        if (it->second + ate < 0.0)
            throw_config("zone " + std::to_string(c.zone_id) + ": lambda + ate is negative for categoryId " +
                         std::to_string(c.id) + " (" + std::to_string(it->second) + " + " +
                         std::to_string(ate) + ")");
    }
    double zw_sum = 0.0;
    for (const auto& [zid, w] : zone_weight) {
        if (w < 0.0) throw_config("zone." + std::to_string(zid) + ".weight must be nonnegative");
        zw_sum += w;
    }
    for (const auto& [cid, w] : cat_weight)
        if (w < 0.0) throw_config("cat." + std::to_string(cid) + ".weight must be nonnegative");
    if (!(zw_sum > 0.0)) throw_config("zone weights must have positive mass");
}

SimCounts simulate_experiment(const ExperimentConfig& cfg,
                              const std::function<void(const WebLogRecord&)>& sink, int threads) {
    cfg.validate();
    const SimTables tables = build_tables(cfg);

    if (threads < 1) threads = 1;
    const int64_t block_size = 8192;
    const int64_t n_blocks = (cfg.n_users + block_size - 1) / block_size;
    std::vector<std::vector<SimRecord>> block_records(static_cast<std::size_t>(n_blocks));
    std::vector<SimCounts> block_counts(static_cast<std::size_t>(n_blocks));

    std::atomic<int64_t> next_block{0};
    auto worker = [&]() {
        for (;;) {
            const int64_t b = next_block.fetch_add(1);
            if (b >= n_blocks) return;
            auto& recs = block_records[static_cast<std::size_t>(b)];
            auto& cnt = block_counts[static_cast<std::size_t>(b)];
            const int64_t lo = b * block_size;
            const int64_t hi = std::min<int64_t>(cfg.n_users, lo + block_size);
            for (int64_t u = lo; u < hi; ++u)
                generate_user(cfg, tables, static_cast<uint32_t>(u), recs, cnt);
        }
    };
    if (threads == 1 || n_blocks == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int use = static_cast<int>(std::min<int64_t>(threads, n_blocks));
        pool.reserve(static_cast<std::size_t>(use));
        for (int i = 0; i < use; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SimCounts totals;
    std::size_t total_records = 0;
    for (const auto& c : block_counts) {
        totals.records += c.records;
        totals.renders += c.renders;
        totals.beacons += c.beacons;
        totals.clicks += c.clicks;
        totals.bot_records += c.bot_records;
        totals.bot_beacons += c.bot_beacons;
        totals.sessions_aa += c.sessions_aa;
        totals.sessions_ab += c.sessions_ab;
    }
    totals.pixel_lost = totals.renders - totals.beacons;
    for (const auto& recs : block_records) total_records += recs.size();

    std::vector<SimRecord> all;
    all.reserve(total_records);
    for (auto& recs : block_records) {
        all.insert(all.end(), recs.begin(), recs.end());
        recs.clear();
        recs.shrink_to_fit();
    }
    std::sort(all.begin(), all.end(), [](const SimRecord& a, const SimRecord& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (a.user != b.user) return a.user < b.user;
        if (a.visit != b.visit) return a.visit < b.visit;
        return a.seq < b.seq;
    });

    WebLogRecord rec;
    for (const SimRecord& r : all) {
        rec.ts_ms = r.ts;
        rec.kind = r.kind == 0   ? RecordKind::ListingRender
                   : r.kind == 1 ? RecordKind::PixelBeacon
                                 : RecordKind::ProductClick;
        rec.anony_id = hex_token(Rng::mix(static_cast<uint64_t>(r.user) + 1));
        rec.treat = r.treat;
        rec.user_agent = r.ua >= kUaCount ? kBotUas[r.ua - kUaCount] : kBrowserUas[r.ua].ua;
        rec.logged_in = r.login;
        rec.orphan_candidate = false;
        rec.query.clear();

        const std::string sid =
            hex_token(Rng::mix(((static_cast<uint64_t>(r.user) + 1) << 21) ^ r.visit));
        const int cat_id = tables.cat_ids[r.cat_index];
        switch (rec.kind) {
            case RecordKind::ListingRender:
                rec.query.emplace_back("categoryId", std::to_string(cat_id));
                rec.query.emplace_back("pageNo", std::to_string(r.page));
                break;
            case RecordKind::PixelBeacon:
                rec.query.emplace_back("sessionId", sid);
                rec.query.emplace_back("categoryId", std::to_string(cat_id));
                rec.query.emplace_back("pageNo", std::to_string(r.page));
                rec.query.emplace_back("itemsPerPage", std::to_string(r.items));
                break;
            case RecordKind::ProductClick:
                rec.query.emplace_back("sessionId", sid);
                rec.query.emplace_back("productId", std::to_string(r.product));
                rec.query.emplace_back("productPos", std::to_string(r.pos));
                rec.query.emplace_back("click_type", "thumbnail");
                break;
        }
        sink(rec);
    }
    return totals;
}

std::vector<ListingSession> simulate_sessions(const ExperimentConfig& cfg, CleaningReport& report,
                                              int threads) {
    BotDetector detector(BotFilterConfig::builtin());
    simulate_experiment(
        cfg,
        [&](const WebLogRecord& r) {
            ++report.records_read;
            detector.observe(r);
        },
        threads);
    detector.finalize();
    report.heuristic_bot_users += detector.heuristic_user_count();

    SessionBuilder builder(cfg.cutover_ms());
    simulate_experiment(
        cfg,
        [&](const WebLogRecord& r) {
            if (detector.is_declared_bot(r)) {
                ++report.declared_bot_records;
                return;
            }
            if (detector.is_heuristic_bot_user(r.anony_id)) {
                ++report.heuristic_bot_records;
                return;
            }
            builder.add(r);
        },
        threads);
    auto sessions = builder.finish(report);
    resolve_zones(sessions, cfg.taxonomy, report);
    return sessions;
}

CalibrationResult calibrate_reassignment(ExperimentConfig cfg, int64_t probe_users,
                                         int max_iterations, int threads) {
    constexpr double kUsersLo = 0.17, kUsersHi = 0.27;
    constexpr double kSessLo = 0.33, kSessHi = 0.43;
    constexpr double kUsersTarget = 0.22;

    auto measure = [&](double rate) {
        ExperimentConfig probe = cfg;
        probe.n_users = std::min<int64_t>(cfg.n_users, probe_users);
        probe.bot_fraction = 0.0;
        probe.visit_rate_per_user_per_day = rate;
        CleaningReport rep;
        auto sessions = simulate_sessions(probe, rep, threads);
        std::vector<ListingSession> ab;
        for (auto& s : sessions)
            if (s.stage == Stage::AB) ab.push_back(std::move(s));
        if (ab.empty()) return std::pair<double, double>{0.0, 0.0};
        auto stats = flag_double_assignment(ab);
        return std::pair<double, double>{stats.fraction_users_double,
                                         stats.fraction_sessions_double};
    };

    double lo = cfg.visit_rate_per_user_per_day;
    double hi = lo;
    auto [ulo, slo] = measure(lo);
    int iters = 1;
    // Expand the bracket around the users-double target.
    std::pair<double, double> at_hi{ulo, slo};
    while (at_hi.first < kUsersTarget && iters < max_iterations && hi < 1024.0) {
        hi *= 2.0;
        at_hi = measure(hi);
        ++iters;
    }
    std::pair<double, double> at_lo{ulo, slo};
    while (at_lo.first > kUsersTarget && iters < max_iterations && lo > 1e-4) {
        lo *= 0.5;
        at_lo = measure(lo);
        ++iters;
    }
    if (at_hi.first < kUsersLo || at_lo.first > kUsersHi) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "calibration cannot reach the target bands: achieved "
                      "fractionUsersDouble=%.4f fractionSessionsDouble=%.4f at rate=%.4g",
                      at_hi.first, at_hi.second, hi);
        throw_model(buf);
    }

    double rate = hi, users = at_hi.first, sessions = at_hi.second;
    while (iters < max_iterations) {
        const double mid = 0.5 * (lo + hi);
        auto [u, s] = measure(mid);
        ++iters;
        rate = mid;
        users = u;
        sessions = s;
        if (u < kUsersTarget)
            lo = mid;
        else
            hi = mid;
        if (u >= kUsersLo && u <= kUsersHi && s >= kSessLo && s <= kSessHi) break;
    }

    if (users < kUsersLo || users > kUsersHi || sessions < kSessLo || sessions > kSessHi) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "calibration did not converge: achieved fractionUsersDouble=%.4f "
                      "fractionSessionsDouble=%.4f at rate=%.4g",
                      users, sessions, rate);
        throw_model(buf);
    }

    CalibrationResult result;
    cfg.visit_rate_per_user_per_day = rate;
    result.config = std::move(cfg);
    result.fraction_users_double = users;
    result.fraction_sessions_double = sessions;
    result.iterations = iters;
    return result;
}

}  // namespace abx
