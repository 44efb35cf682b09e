#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "abx/taxonomy.hpp"

namespace abx {

enum class RecordKind { ListingRender, PixelBeacon, ProductClick };

// Ordered key/value list: later duplicates overwrite in place, first-seen
// order is preserved.
using QueryParams = std::vector<std::pair<std::string, std::string>>;

// Splits on '&' then the first '='; percent-decodes keys and values.
// Leading '?' is optional. Malformed %XX escapes raise an I/O error naming
// the byte offset within `raw`.
QueryParams parse_query_string(std::string_view raw);

struct WebLogRecord {
    int64_t ts_ms = 0;
    RecordKind kind = RecordKind::ListingRender;
    std::string anony_id;
    int treat = 0;
    std::string user_agent;
    int logged_in = 0;
    QueryParams query;
    // ProductClick lines without a sessionId parse fine but can never be
    // attributed; reconstruction drops them as orphans.
    bool orphan_candidate = false;

    const std::string* param(std::string_view key) const;
};

// One NDJSON object per line:
//   {"ts":int_ms,"kind":"render"|"pixel"|"click","anonyId":str,"treat":0|1,
//    "ua":str,"login":0|1,"q":{...}}
// "q" may also be a raw query string, in which case it goes through
// parse_query_string. line_no is used in error messages only.
WebLogRecord parse_log_record(std::string_view line, std::size_t line_no = 0);
std::string serialize_log_record(const WebLogRecord& rec);

// Streaming NDJSON reader; skips blank lines, reports 1-based line numbers.
class LogReader {
public:
    explicit LogReader(const std::string& path);
    ~LogReader();
    LogReader(const LogReader&) = delete;
    LogReader& operator=(const LogReader&) = delete;

    bool next(WebLogRecord& out);
    std::size_t line_no() const { return line_no_; }

private:
    struct Impl;
    Impl* impl_;
    std::size_t line_no_ = 0;
};

enum class Stage { AA, AB };
inline const char* stage_name(Stage s) { return s == Stage::AA ? "AA" : "AB"; }

struct ListingSession {
    std::string session_id;
    std::string anony_id;
    int treat = 0;
    int category_id = 0;
    int zone_id = -1;  // resolved against a taxonomy later
    int page_no = 1;
    int items_per_page = 15;
    int logged_in = 0;
    int clicks = 0;
    int64_t ts_ms = 0;
    Stage stage = Stage::AA;
    std::string ua_family;  // derived from the beacon's user agent
};

struct CleaningReport {
    uint64_t records_read = 0;
    uint64_t declared_bot_records = 0;
    uint64_t heuristic_bot_users = 0;
    uint64_t heuristic_bot_records = 0;
    uint64_t orphan_clicks = 0;
    uint64_t orphan_clicks_by_arm[2] = {0, 0};
    uint64_t duplicate_beacons = 0;
    uint64_t missing_category_sessions = 0;
    uint64_t invalid_field_sessions = 0;
    uint64_t unknown_category_sessions = 0;
    uint64_t sessions_emitted = 0;

    std::string to_json() const;
};

struct BotFilterConfig {
    std::vector<std::string> declared_substrings;  // case-sensitive UA substrings
    uint64_t volume_threshold = 5000;              // records per anonyId
    static BotFilterConfig builtin();
    static BotFilterConfig from_list_file(const std::string& path, uint64_t volume_threshold);
};

// Two-phase heuristic-bot detector, usable in streaming pipelines: feed every
// record to observe(), call finalize(), then query should_drop() per record.
class BotDetector {
public:
    explicit BotDetector(BotFilterConfig cfg) : cfg_(std::move(cfg)) {}

    void observe(const WebLogRecord& rec);
    void finalize();

    bool is_declared_bot(const WebLogRecord& rec) const;
    // Valid after finalize(); true for records of flagged heavy uniform users.
    bool is_heuristic_bot_user(const std::string& anony_id) const;

    uint64_t heuristic_user_count() const { return heuristic_users_.size(); }

private:
    struct UserStats {
        uint64_t records = 0;
        uint32_t position_clicks[15] = {0};
    };
    BotFilterConfig cfg_;
    std::unordered_map<std::string, UserStats> stats_;
    std::unordered_map<std::string, bool> heuristic_users_;
    bool finalized_ = false;
};

// In-memory form of the bot filter: applies declared-list and volume/uniform
// heuristics, returns surviving records, tallies removals.
std::vector<WebLogRecord> filter_bots(std::vector<WebLogRecord> records, const BotFilterConfig& cfg,
                                      CleaningReport& report);

// Deterministic total order by (ts, anonyId, kind, serialized params).
void sort_records(std::vector<WebLogRecord>& records);

// Streaming sessionizer keyed on the tracking-pixel sessionId.
class SessionBuilder {
public:
    explicit SessionBuilder(int64_t cutover_ms) : cutover_ms_(cutover_ms) {}

    void add(const WebLogRecord& rec);
    // Sessions sorted by (ts, sessionId); report gains orphan/duplicate/drop
    // tallies and sessions_emitted.
    std::vector<ListingSession> finish(CleaningReport& report);

private:
    struct Accum {
        bool has_beacon = false;
        ListingSession session;
        int clicks = 0;
        int orphan_arm = 0;  // treat of first click, for beaconless entries
    };
    int64_t cutover_ms_;
    std::unordered_map<std::string, Accum> by_session_;
    uint64_t duplicate_beacons_ = 0;
    uint64_t missing_category_ = 0;
    uint64_t invalid_field_ = 0;
    uint64_t orphans_no_session_id_[2] = {0, 0};
};

// A session exists iff a pixel beacon with that sessionId exists; clicks are
// counted per sessionId; clicks without a matching beacon are orphans.
// Records must be sorted by timestamp (see sort_records).
std::vector<ListingSession> reconstruct_sessions(const std::vector<WebLogRecord>& sorted_records,
                                                 int64_t cutover_ms, CleaningReport& report);

// Fills zone_id from the taxonomy; sessions with categories absent from the
// taxonomy are dropped and counted.
void resolve_zones(std::vector<ListingSession>& sessions, const Taxonomy& taxonomy,
                   CleaningReport& report);

struct ReassignmentStats {
    std::unordered_map<std::string, int> is_double_assigned;  // anonyId -> 0/1
    double fraction_users_double = 0.0;
    double fraction_sessions_double = 0.0;

    std::string to_json() const;
};

// A user is double-assigned iff both arms are observed for that anonyId.
// Input must be restricted to A/B-stage sessions; empty input is an error.
ReassignmentStats flag_double_assignment(std::span<const ListingSession> ab_sessions);

// Coarse browser family from a user-agent string (Chrome, Safari, Firefox,
// Edge, IE, Opera, Other).
std::string ua_family(std::string_view user_agent);

// Sessions CSV, header:
// sessionId,anonyId,treat,categoryId,zoneId,pageNo,itemsPerPage,isLoggedIn,clicks,ts,stage
void write_sessions_csv(const std::string& path, std::span<const ListingSession> sessions);
std::vector<ListingSession> read_sessions_csv(const std::string& path);

// Per-user browser family side table, header: anonyId,uaFamily
void write_ua_map_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& rows);
std::unordered_map<std::string, std::string> read_ua_map_csv(const std::string& path);

}  // namespace abx
