#include "abx/weblog.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "abx/error.hpp"

namespace abx {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string percent_decode(std::string_view s, std::size_t base_offset) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out += s[i];
            continue;
        }
        int hi = (i + 1 < s.size()) ? hex_digit(s[i + 1]) : -1;
        int lo = (i + 2 < s.size()) ? hex_digit(s[i + 2]) : -1;
        if (hi < 0 || lo < 0)
            throw_io("malformed percent escape at byte offset " + std::to_string(base_offset + i));
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
    }
    return out;
}

void append_json_escaped(std::string& out, std::string_view s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

const char* kind_name(RecordKind k) {
    switch (k) {
        case RecordKind::ListingRender: return "render";
        case RecordKind::PixelBeacon: return "pixel";
        case RecordKind::ProductClick: return "click";
    }
    return "?";
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw_io("log line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

QueryParams parse_query_string(std::string_view raw) {
    QueryParams out;
    if (!raw.empty() && raw.front() == '?') raw.remove_prefix(1);
    if (raw.empty()) return out;

    std::unordered_map<std::string, std::size_t> index;
    std::size_t pos = 0;
    // byte offsets in errors are relative to the string handed in (after '?')
    while (pos <= raw.size()) {
        std::size_t amp = raw.find('&', pos);
        std::string_view piece = raw.substr(pos, amp == std::string_view::npos ? std::string_view::npos : amp - pos);
        if (!piece.empty()) {
            std::size_t eq = piece.find('=');
            std::string key, value;
            if (eq == std::string_view::npos) {
                key = percent_decode(piece, pos);
            } else {
                key = percent_decode(piece.substr(0, eq), pos);
                value = percent_decode(piece.substr(eq + 1), pos + eq + 1);
            }
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, out.size());
                out.emplace_back(std::move(key), std::move(value));
            } else {
                out[it->second].second = std::move(value);
            }
        }
        if (amp == std::string_view::npos) break;
        pos = amp + 1;
    }
    return out;
}

const std::string* WebLogRecord::param(std::string_view key) const {
    for (const auto& [k, v] : query)
        if (k == key) return &v;
    return nullptr;
}

WebLogRecord parse_log_record(std::string_view line, std::size_t line_no) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        line_error(line_no, std::string("JSON syntax error: ") + e.what());
    }
    if (!j.is_object()) line_error(line_no, "expected a JSON object");

    WebLogRecord rec;

    auto require = [&](const char* key) -> const nlohmann::ordered_json& {
        auto it = j.find(key);
        if (it == j.end()) line_error(line_no, std::string("missing field '") + key + "'");
        return *it;
    };

    const auto& ts = require("ts");
    if (!ts.is_number_integer()) line_error(line_no, "'ts' must be an integer");
    rec.ts_ms = ts.get<int64_t>();
    if (rec.ts_ms <= 0) line_error(line_no, "'ts' must be positive");

    const auto& kind = require("kind");
    if (!kind.is_string()) line_error(line_no, "'kind' must be a string");
    const std::string k = kind.get<std::string>();
    if (k == "render")
        rec.kind = RecordKind::ListingRender;
    else if (k == "pixel")
        rec.kind = RecordKind::PixelBeacon;
    else if (k == "click")
        rec.kind = RecordKind::ProductClick;
    else
        line_error(line_no, "unknown kind '" + k + "'");

    const auto& anony = require("anonyId");
    if (!anony.is_string() || anony.get<std::string>().empty())
        line_error(line_no, "'anonyId' must be a non-empty string");
    rec.anony_id = anony.get<std::string>();

    const auto& treat = require("treat");
    if (!treat.is_number_integer() || (treat.get<int>() != 0 && treat.get<int>() != 1))
        line_error(line_no, "'treat' must be 0 or 1");
    rec.treat = treat.get<int>();

    const auto& ua = require("ua");
    if (!ua.is_string()) line_error(line_no, "'ua' must be a string");
    rec.user_agent = ua.get<std::string>();

    const auto& login = require("login");
    if (!login.is_number_integer() || (login.get<int>() != 0 && login.get<int>() != 1))
        line_error(line_no, "'login' must be 0 or 1");
    rec.logged_in = login.get<int>();

    const auto& q = require("q");
    if (q.is_object()) {
        for (auto it = q.begin(); it != q.end(); ++it) {
            if (it.value().is_string())
                rec.query.emplace_back(it.key(), it.value().get<std::string>());
            else
                rec.query.emplace_back(it.key(), it.value().dump());
        }
    } else if (q.is_string()) {
        try {
            rec.query = parse_query_string(q.get<std::string>());
        } catch (const Error& e) {
            line_error(line_no, e.what());
        }
    } else {
        line_error(line_no, "'q' must be an object or a query string");
    }

    auto need_param = [&](const char* name) {
        if (!rec.param(name))
            line_error(line_no, std::string(kind_name(rec.kind)) + " record missing query param '" +
                                    name + "'");
    };
    switch (rec.kind) {
        case RecordKind::ListingRender:
            need_param("categoryId");
            need_param("pageNo");
            break;
        case RecordKind::PixelBeacon:
            // categoryId/pageNo/itemsPerPage are validated (and their absence
            // counted) at session reconstruction, matching the cleanup stage.
            need_param("sessionId");
            break;
        case RecordKind::ProductClick:
            need_param("productId");
            need_param("productPos");
            rec.orphan_candidate = rec.param("sessionId") == nullptr;
            break;
    }
    return rec;
}

std::string serialize_log_record(const WebLogRecord& rec) {
    std::string out;
    out.reserve(160 + rec.user_agent.size());
    out += "{\"ts\":";
    out += std::to_string(rec.ts_ms);
    out += ",\"kind\":\"";
    out += kind_name(rec.kind);
    out += "\",\"anonyId\":";
    append_json_escaped(out, rec.anony_id);
    out += ",\"treat\":";
    out += rec.treat ? '1' : '0';
    out += ",\"ua\":";
    append_json_escaped(out, rec.user_agent);
    out += ",\"login\":";
    out += rec.logged_in ? '1' : '0';
    out += ",\"q\":{";
    bool first = true;
    for (const auto& [k, v] : rec.query) {
        if (!first) out += ',';
        first = false;
        append_json_escaped(out, k);
        out += ':';
        append_json_escaped(out, v);
    }
    out += "}}";
    return out;
}

struct LogReader::Impl {
    std::ifstream in;
    std::string line;
};

LogReader::LogReader(const std::string& path) : impl_(new Impl) {
    impl_->in.open(path);
    if (!impl_->in) {
        delete impl_;
        impl_ = nullptr;
        throw_io("cannot open log file: " + path);
    }
}

LogReader::~LogReader() { delete impl_; }

bool LogReader::next(WebLogRecord& out) {
    while (std::getline(impl_->in, impl_->line)) {
        ++line_no_;
        if (!impl_->line.empty() && impl_->line.back() == '\r') impl_->line.pop_back();
        if (impl_->line.empty()) continue;
        out = parse_log_record(impl_->line, line_no_);
        return true;
    }
    return false;
}

BotFilterConfig BotFilterConfig::builtin() {
    BotFilterConfig cfg;
    cfg.declared_substrings = {"Googlebot", "bingbot",  "Baiduspider", "YandexBot",
                               "AhrefsBot", "Slurp",    "DuckDuckBot", "crawler",
                               "spider",    "HeadlessChrome"};
    return cfg;
}

BotFilterConfig BotFilterConfig::from_list_file(const std::string& path, uint64_t volume_threshold) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open bot list file: " + path);
    BotFilterConfig cfg;
    cfg.volume_threshold = volume_threshold;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        cfg.declared_substrings.push_back(line);
    }
    return cfg;
}

bool BotDetector::is_declared_bot(const WebLogRecord& rec) const {
    for (const auto& sub : cfg_.declared_substrings)
        if (rec.user_agent.find(sub) != std::string::npos) return true;
    return false;
}

void BotDetector::observe(const WebLogRecord& rec) {
    if (is_declared_bot(rec)) return;  // removed before the heuristic applies
    auto& st = stats_[rec.anony_id];
    ++st.records;
    if (rec.kind == RecordKind::ProductClick) {
        if (const std::string* pos = rec.param("productPos")) {
            int p = std::atoi(pos->c_str());
            if (p >= 1 && p <= 15) ++st.position_clicks[p - 1];
        }
    }
}

void BotDetector::finalize() {
    for (auto& [id, st] : stats_) {
        if (st.records <= cfg_.volume_threshold) continue;
        uint32_t first = st.position_clicks[0];
        if (first == 0) continue;
        bool uniform = true;
        for (int i = 1; i < 15; ++i)
            if (st.position_clicks[i] != first) {
                uniform = false;
                break;
            }
        if (uniform) heuristic_users_.emplace(id, true);
    }
    stats_.clear();
    finalized_ = true;
}

bool BotDetector::is_heuristic_bot_user(const std::string& anony_id) const {
    return heuristic_users_.count(anony_id) != 0;
}

std::vector<WebLogRecord> filter_bots(std::vector<WebLogRecord> records, const BotFilterConfig& cfg,
                                      CleaningReport& report) {
    BotDetector det(cfg);
    for (const auto& rec : records) {
        ++report.records_read;
        det.observe(rec);
    }
    det.finalize();
    report.heuristic_bot_users += det.heuristic_user_count();

    std::vector<WebLogRecord> kept;
    kept.reserve(records.size());
    for (auto& rec : records) {
        if (det.is_declared_bot(rec)) {
            ++report.declared_bot_records;
        } else if (det.is_heuristic_bot_user(rec.anony_id)) {
            ++report.heuristic_bot_records;
        } else {
            kept.push_back(std::move(rec));
        }
    }
    return kept;
}

void sort_records(std::vector<WebLogRecord>& records) {
    std::sort(records.begin(), records.end(), [](const WebLogRecord& a, const WebLogRecord& b) {
        if (a.ts_ms != b.ts_ms) return a.ts_ms < b.ts_ms;
        if (a.anony_id != b.anony_id) return a.anony_id < b.anony_id;
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return serialize_log_record(a) < serialize_log_record(b);
    });
}

namespace {

bool parse_int_param(const WebLogRecord& rec, const char* name, int& out) {
    const std::string* v = rec.param(name);
    if (!v || v->empty()) return false;
    char* end = nullptr;
    long parsed = std::strtol(v->c_str(), &end, 10);
    if (end == nullptr || *end != '\0') return false;
    out = static_cast<int>(parsed);
    return true;
}

}  // namespace

void SessionBuilder::add(const WebLogRecord& rec) {
    if (rec.kind == RecordKind::ListingRender) return;

    if (rec.kind == RecordKind::PixelBeacon) {
        const std::string* sid = rec.param("sessionId");
        auto& acc = by_session_[*sid];
        if (acc.has_beacon) {
            ++duplicate_beacons_;  // keep-first
            return;
        }
        acc.has_beacon = true;
        ListingSession& s = acc.session;
        s.session_id = *sid;
        s.anony_id = rec.anony_id;
        s.treat = rec.treat;
        s.logged_in = rec.logged_in;
        s.ts_ms = rec.ts_ms;
        s.stage = rec.ts_ms < cutover_ms_ ? Stage::AA : Stage::AB;
        s.ua_family = ua_family(rec.user_agent);
        if (!parse_int_param(rec, "categoryId", s.category_id)) {
            ++missing_category_;
            acc.has_beacon = false;  // drop the whole session, keep counting clicks
            acc.session = ListingSession{};
            return;
        }
        int page = 0, items = 0;
        bool ok = parse_int_param(rec, "pageNo", page) && page >= 1;
        ok = ok && parse_int_param(rec, "itemsPerPage", items) && items >= 1 && items <= 15;
        if (!ok) {
            ++invalid_field_;
            acc.has_beacon = false;
            acc.session = ListingSession{};
            return;
        }
        s.page_no = page;
        s.items_per_page = items;
        return;
    }

    // ProductClick
    const std::string* sid = rec.param("sessionId");
    if (!sid) {
        ++orphans_no_session_id_[rec.treat ? 1 : 0];
        return;
    }
    auto& acc = by_session_[*sid];
    ++acc.clicks;
    if (acc.clicks == 1) acc.orphan_arm = rec.treat;
    if (acc.has_beacon) acc.session.clicks = acc.clicks;
}

std::vector<ListingSession> SessionBuilder::finish(CleaningReport& report) {
    std::vector<ListingSession> sessions;
    sessions.reserve(by_session_.size());
    for (auto& [sid, acc] : by_session_) {
        if (acc.has_beacon) {
            acc.session.clicks = acc.clicks;
            sessions.push_back(std::move(acc.session));
        } else if (acc.clicks > 0) {
            report.orphan_clicks += acc.clicks;
            report.orphan_clicks_by_arm[acc.orphan_arm ? 1 : 0] += acc.clicks;
        }
    }
    report.orphan_clicks += orphans_no_session_id_[0] + orphans_no_session_id_[1];
    report.orphan_clicks_by_arm[0] += orphans_no_session_id_[0];
    report.orphan_clicks_by_arm[1] += orphans_no_session_id_[1];
    report.duplicate_beacons += duplicate_beacons_;
    report.missing_category_sessions += missing_category_;
    report.invalid_field_sessions += invalid_field_;

    std::sort(sessions.begin(), sessions.end(), [](const ListingSession& a, const ListingSession& b) {
        if (a.ts_ms != b.ts_ms) return a.ts_ms < b.ts_ms;
        return a.session_id < b.session_id;
    });
    report.sessions_emitted += sessions.size();
    by_session_.clear();
    return sessions;
}

std::vector<ListingSession> reconstruct_sessions(const std::vector<WebLogRecord>& sorted_records,
                                                 int64_t cutover_ms, CleaningReport& report) {
    SessionBuilder builder(cutover_ms);
    for (const auto& rec : sorted_records) builder.add(rec);
    return builder.finish(report);
}

void resolve_zones(std::vector<ListingSession>& sessions, const Taxonomy& taxonomy,
                   CleaningReport& report) {
    std::vector<ListingSession> kept;
    kept.reserve(sessions.size());
    uint64_t dropped = 0;
    for (auto& s : sessions) {
        if (taxonomy.has_category(s.category_id)) {
            s.zone_id = taxonomy.zone_of(s.category_id);
            kept.push_back(std::move(s));
        } else {
            ++dropped;
        }
    }
    report.unknown_category_sessions += dropped;
    report.sessions_emitted -= dropped;
    sessions = std::move(kept);
}

ReassignmentStats flag_double_assignment(std::span<const ListingSession> ab_sessions) {
    if (ab_sessions.empty()) throw_model("flag_double_assignment: no sessions");

    std::unordered_map<std::string, unsigned> arms;  // bit0: control seen, bit1: treatment seen
    arms.reserve(ab_sessions.size() / 2);
    for (const auto& s : ab_sessions) {
        if (s.stage != Stage::AB)
            throw_model("flag_double_assignment: input contains non-AB sessions");
        arms[s.anony_id] |= s.treat ? 2u : 1u;
    }

    ReassignmentStats stats;
    stats.is_double_assigned.reserve(arms.size());
    uint64_t double_users = 0;
    for (const auto& [id, mask] : arms) {
        const int flag = mask == 3u ? 1 : 0;
        stats.is_double_assigned.emplace(id, flag);
        double_users += flag;
    }
    uint64_t double_sessions = 0;
    for (const auto& s : ab_sessions)
        double_sessions += stats.is_double_assigned.at(s.anony_id);

    stats.fraction_users_double = static_cast<double>(double_users) / static_cast<double>(arms.size());
    stats.fraction_sessions_double =
        static_cast<double>(double_sessions) / static_cast<double>(ab_sessions.size());
    return stats;
}

std::string ua_family(std::string_view ua) {
    auto has = [&](std::string_view sub) { return ua.find(sub) != std::string_view::npos; };
    if (has("Edge/") || has("Edg/")) return "Edge";
    if (has("OPR/") || has("Opera")) return "Opera";
    if (has("Chrome/")) return "Chrome";
    if (has("Safari/")) return "Safari";
    if (has("Firefox/")) return "Firefox";
    if (has("MSIE") || has("Trident")) return "IE";
    return "Other";
}

void write_sessions_csv(const std::string& path, std::span<const ListingSession> sessions) {
    std::ofstream out(path);
    if (!out) throw_io("cannot write sessions file: " + path);
    out << "sessionId,anonyId,treat,categoryId,zoneId,pageNo,itemsPerPage,isLoggedIn,clicks,ts,stage\n";
    std::string buf;
    for (const auto& s : sessions) {
        buf.clear();
        buf += s.session_id;
        buf += ',';
        buf += s.anony_id;
        buf += ',';
        buf += std::to_string(s.treat);
        buf += ',';
        buf += std::to_string(s.category_id);
        buf += ',';
        buf += std::to_string(s.zone_id);
        buf += ',';
        buf += std::to_string(s.page_no);
        buf += ',';
        buf += std::to_string(s.items_per_page);
        buf += ',';
        buf += std::to_string(s.logged_in);
        buf += ',';
        buf += std::to_string(s.clicks);
        buf += ',';
        buf += std::to_string(s.ts_ms);
        buf += ',';
        buf += stage_name(s.stage);
        buf += '\n';
        out << buf;
    }
    if (!out) throw_io("write failed: " + path);
}

std::vector<ListingSession> read_sessions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open sessions file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw_io(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const char* kHeader =
        "sessionId,anonyId,treat,categoryId,zoneId,pageNo,itemsPerPage,isLoggedIn,clicks,ts,stage";
    if (line != kHeader) throw_io(path + ":1: unexpected sessions header");

    std::vector<ListingSession> sessions;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string_view, 11> f;
        std::size_t start = 0;
        for (int i = 0; i < 11; ++i) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos && i < 10)
                throw_io(path + ":" + std::to_string(line_no) + ": expected 11 fields");
            f[i] = std::string_view(line).substr(start, comma == std::string::npos
                                                            ? std::string::npos
                                                            : comma - start);
            start = comma + 1;
        }
        ListingSession s;
        s.session_id = std::string(f[0]);
        s.anony_id = std::string(f[1]);
        try {
            s.treat = std::stoi(std::string(f[2]));
            s.category_id = std::stoi(std::string(f[3]));
            s.zone_id = std::stoi(std::string(f[4]));
            s.page_no = std::stoi(std::string(f[5]));
            s.items_per_page = std::stoi(std::string(f[6]));
            s.logged_in = std::stoi(std::string(f[7]));
            s.clicks = std::stoi(std::string(f[8]));
            s.ts_ms = std::stoll(std::string(f[9]));
        } catch (const std::exception&) {
            throw_io(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
        if (f[10] == "AA")
            s.stage = Stage::AA;
        else if (f[10] == "AB")
            s.stage = Stage::AB;
        else
            throw_io(path + ":" + std::to_string(line_no) + ": bad stage '" + std::string(f[10]) + "'");
        sessions.push_back(std::move(s));
    }
    return sessions;
}

void write_ua_map_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw_io("cannot write ua map file: " + path);
    out << "anonyId,uaFamily\n";
    for (const auto& [id, fam] : rows) out << id << ',' << fam << '\n';
    if (!out) throw_io("write failed: " + path);
}

std::unordered_map<std::string, std::string> read_ua_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open ua map file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw_io(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "anonyId,uaFamily") throw_io(path + ":1: expected header 'anonyId,uaFamily'");
    std::unordered_map<std::string, std::string> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw_io(path + ":" + std::to_string(line_no) + ": expected 2 fields");
        out.emplace(line.substr(0, comma), line.substr(comma + 1));
    }
    return out;
}

std::string CleaningReport::to_json() const {
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "{\n"
                  "  \"recordsRead\": %llu,\n"
                  "  \"declaredBotRecords\": %llu,\n"
                  "  \"heuristicBotUsers\": %llu,\n"
                  "  \"heuristicBotRecords\": %llu,\n"
                  "  \"orphanClicks\": %llu,\n"
                  "  \"orphanClicksControl\": %llu,\n"
                  "  \"orphanClicksTreatment\": %llu,\n"
                  "  \"duplicateBeacons\": %llu,\n"
                  "  \"missingCategorySessions\": %llu,\n"
                  "  \"invalidFieldSessions\": %llu,\n"
                  "  \"unknownCategorySessions\": %llu,\n"
                  "  \"sessionsEmitted\": %llu\n"
                  "}\n",
                  (unsigned long long)records_read, (unsigned long long)declared_bot_records,
                  (unsigned long long)heuristic_bot_users, (unsigned long long)heuristic_bot_records,
                  (unsigned long long)orphan_clicks, (unsigned long long)orphan_clicks_by_arm[0],
                  (unsigned long long)orphan_clicks_by_arm[1], (unsigned long long)duplicate_beacons,
                  (unsigned long long)missing_category_sessions,
                  (unsigned long long)invalid_field_sessions,
                  (unsigned long long)unknown_category_sessions,
                  (unsigned long long)sessions_emitted);
    return buf;
}

std::string ReassignmentStats::to_json() const {
    std::string out = "{\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "  \"fractionUsersDouble\": %.17g,\n", fraction_users_double);
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"fractionSessionsDouble\": %.17g,\n", fraction_sessions_double);
    out += buf;
    std::snprintf(buf, sizeof buf, "  \"users\": %zu\n", is_double_assigned.size());
    out += buf;
    out += "}\n";
    return out;
}

}  // namespace abx
