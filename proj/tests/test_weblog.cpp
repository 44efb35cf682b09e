#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <string>

#include "abx/error.hpp"
#include "abx/rng.hpp"
#include "abx/weblog.hpp"

using namespace abx;

namespace {

WebLogRecord make_record(RecordKind kind, int64_t ts, const std::string& user, int treat,
                         QueryParams q, const std::string& ua = "Mozilla/5.0 Chrome/49.0") {
    WebLogRecord r;
    r.ts_ms = ts;
    r.kind = kind;
    r.anony_id = user;
    r.treat = treat;
    r.user_agent = ua;
    r.logged_in = 0;
    r.query = std::move(q);
    return r;
}

WebLogRecord beacon(const std::string& sid, int64_t ts, const std::string& user, int treat,
                    int cat = 201, int page = 1, int items = 15) {
    return make_record(RecordKind::PixelBeacon, ts, user, treat,
                       {{"sessionId", sid},
                        {"categoryId", std::to_string(cat)},
                        {"pageNo", std::to_string(page)},
                        {"itemsPerPage", std::to_string(items)}});
}

WebLogRecord click(const std::string& sid, int64_t ts, const std::string& user, int treat,
                   int pos = 3) {
    return make_record(RecordKind::ProductClick, ts, user, treat,
                       {{"sessionId", sid},
                        {"productId", "12345"},
                        {"productPos", std::to_string(pos)}});
}

}  // namespace

TEST_CASE("query string: the documented two-parameter example") {
    auto q = parse_query_string("?product_id=123&click_type=thumbnail");
    REQUIRE(q.size() == 2);
    CHECK(q[0].first == "product_id");
    CHECK(q[0].second == "123");
    CHECK(q[1].first == "click_type");
    CHECK(q[1].second == "thumbnail");
}

TEST_CASE("query string: empty input gives an empty map") {
    CHECK(parse_query_string("").empty());
    CHECK(parse_query_string("?").empty());
}

TEST_CASE("query string: duplicate keys overwrite, percent escapes decode") {
    auto q = parse_query_string("a=1&a=2&b=%20");
    REQUIRE(q.size() == 2);
    CHECK(q[0].first == "a");
    CHECK(q[0].second == "2");
    CHECK(q[1].first == "b");
    CHECK(q[1].second == " ");
}

TEST_CASE("query string: malformed percent escape reports the byte offset") {
    try {
        parse_query_string("a=%2");
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("byte offset 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_query_string("x=%GG"), Error);
}

TEST_CASE("log record: serialize then parse is the identity") {
    auto rec = beacon("s1", 1459900800001, "user-a", 1);
    rec.logged_in = 1;
    auto back = parse_log_record(serialize_log_record(rec), 1);
    CHECK(back.ts_ms == rec.ts_ms);
    CHECK(back.kind == rec.kind);
    CHECK(back.anony_id == rec.anony_id);
    CHECK(back.treat == rec.treat);
    CHECK(back.user_agent == rec.user_agent);
    CHECK(back.logged_in == rec.logged_in);
    CHECK(back.query == rec.query);
}

TEST_CASE("log record: error cases carry line numbers") {
    CHECK_THROWS_AS(parse_log_record("{not json", 17), Error);
    try {
        parse_log_record("{not json", 17);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 17") != std::string::npos);
        CHECK(std::string(e.what()).find("JSON syntax") != std::string::npos);
    }
    // missing anonyId
    CHECK_THROWS_AS(
        parse_log_record(R"({"ts":1,"kind":"render","treat":0,"ua":"x","login":0,"q":{"categoryId":"1","pageNo":"1"}})", 1),
        Error);
    // unknown kind
    CHECK_THROWS_AS(
        parse_log_record(R"({"ts":1,"kind":"view","anonyId":"a","treat":0,"ua":"x","login":0,"q":{}})", 1),
        Error);
    // pixel without sessionId
    CHECK_THROWS_AS(
        parse_log_record(R"({"ts":1,"kind":"pixel","anonyId":"a","treat":0,"ua":"x","login":0,"q":{"categoryId":"1"}})", 1),
        Error);
}

TEST_CASE("log record: click without sessionId parses as an orphan candidate") {
    auto rec = parse_log_record(
        R"({"ts":5,"kind":"click","anonyId":"a","treat":1,"ua":"x","login":0,"q":{"productId":"9","productPos":"2"}})",
        3);
    CHECK(rec.kind == RecordKind::ProductClick);
    CHECK(rec.orphan_candidate);
}

TEST_CASE("log record: q as a raw query string") {
    auto rec = parse_log_record(
        R"({"ts":5,"kind":"click","anonyId":"a","treat":0,"ua":"x","login":0,"q":"sessionId=s9&productId=1&productPos=4"})",
        1);
    REQUIRE(rec.param("sessionId"));
    CHECK(*rec.param("sessionId") == "s9");
}

TEST_CASE("bot filter: declared bots removed by substring") {
    std::vector<WebLogRecord> recs = {
        make_record(RecordKind::ListingRender, 1, "bot1", 0,
                    {{"categoryId", "201"}, {"pageNo", "1"}},
                    "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)"),
        beacon("s1", 2, "human", 0),
    };
    CleaningReport rep;
    auto kept = filter_bots(std::move(recs), BotFilterConfig::builtin(), rep);
    CHECK(kept.size() == 1);
    CHECK(kept[0].anony_id == "human");
    CHECK(rep.declared_bot_records == 1);
    CHECK(rep.records_read == 2);
}

TEST_CASE("bot filter: heavy user with exactly uniform click positions is removed") {
    BotFilterConfig cfg = BotFilterConfig::builtin();
    cfg.volume_threshold = 500;

    auto build = [&](bool uniform) {
        std::vector<WebLogRecord> recs;
        // 40 clicks in each of the 15 positions (+1 extra at position 1 when
        // not uniform), plus filler renders to cross the volume threshold.
        for (int p = 1; p <= 15; ++p)
            for (int c = 0; c < 40; ++c)
                recs.push_back(click("s", 100 + p * 100 + c, "heavy", 0, p));
        if (!uniform) recs.push_back(click("s", 9000, "heavy", 0, 1));
        for (int i = 0; i < 400; ++i)
            recs.push_back(make_record(RecordKind::ListingRender, 10000 + i, "heavy", 0,
                                       {{"categoryId", "201"}, {"pageNo", "1"}}));
        return recs;
    };

    CleaningReport uniform_rep;
    auto kept_uniform = filter_bots(build(true), cfg, uniform_rep);
    CHECK(kept_uniform.empty());
    CHECK(uniform_rep.heuristic_bot_users == 1);
    CHECK(uniform_rep.heuristic_bot_records == 1000);

    CleaningReport ragged_rep;
    auto kept_ragged = filter_bots(build(false), cfg, ragged_rep);
    CHECK(kept_ragged.size() == 1001);
    CHECK(ragged_rep.heuristic_bot_users == 0);
}

TEST_CASE("sessionization: beacon with three clicks scores clicks = 3") {
    std::vector<WebLogRecord> recs = {
        beacon("s1", 100, "jane", 1),
        click("s1", 200, "jane", 1),
        click("s1", 300, "jane", 1),
        click("s1", 400, "jane", 1),
        beacon("s2", 500, "jane", 1),
    };
    sort_records(recs);
    CleaningReport rep;
    auto sessions = reconstruct_sessions(recs, 1000, rep);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].session_id == "s1");
    CHECK(sessions[0].clicks == 3);
    CHECK(sessions[1].clicks == 0);
    CHECK(sessions[0].stage == Stage::AA);
    CHECK(rep.orphan_clicks == 0);
}

TEST_CASE("sessionization: clicks without a beacon are orphans") {
    std::vector<WebLogRecord> recs = {click("s3", 100, "u", 1)};
    CleaningReport rep;
    auto sessions = reconstruct_sessions(recs, 50, rep);
    CHECK(sessions.empty());
    CHECK(rep.orphan_clicks == 1);
    CHECK(rep.orphan_clicks_by_arm[1] == 1);
}

TEST_CASE("sessionization: duplicate beacons keep the first") {
    auto first = beacon("dup", 100, "u", 0, 201, 1, 15);
    auto second = beacon("dup", 200, "u", 0, 601, 2, 10);
    std::vector<WebLogRecord> recs = {first, second};
    CleaningReport rep;
    auto sessions = reconstruct_sessions(recs, 1000, rep);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].category_id == 201);
    CHECK(rep.duplicate_beacons == 1);
}

TEST_CASE("sessionization: conservation of clicks") {
    Rng rng(88);
    std::vector<WebLogRecord> recs;
    uint64_t clicks_emitted = 0;
    for (int s = 0; s < 200; ++s) {
        const std::string sid = "s" + std::to_string(s);
        const std::string user = "u" + std::to_string(s % 37);
        const bool has_beacon = rng.bernoulli(0.9);
        const int64_t t0 = 1000 + s * 50;
        if (has_beacon) recs.push_back(beacon(sid, t0, user, s % 2));
        const uint64_t n_clicks = rng.poisson(0.8);
        for (uint64_t c = 0; c < n_clicks; ++c) {
            recs.push_back(click(sid, t0 + 10 + static_cast<int64_t>(c), user, s % 2));
            ++clicks_emitted;
        }
    }
    sort_records(recs);
    CleaningReport rep;
    auto sessions = reconstruct_sessions(recs, 5000, rep);
    uint64_t in_sessions = 0;
    for (const auto& s : sessions) in_sessions += static_cast<uint64_t>(s.clicks);
    CHECK(in_sessions + rep.orphan_clicks == clicks_emitted);
}

TEST_CASE("sessionization: order-insensitive after re-sorting") {
    Rng rng(77);
    std::vector<WebLogRecord> recs;
    for (int s = 0; s < 60; ++s) {
        const std::string sid = "q" + std::to_string(s);
        recs.push_back(beacon(sid, 1000 + s * 10, "u" + std::to_string(s % 7), s % 2));
        for (int c = 0; c < s % 4; ++c)
            recs.push_back(click(sid, 1001 + s * 10 + c, "u" + std::to_string(s % 7), s % 2));
    }
    auto shuffled = recs;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.uniform_below(i)]);

    sort_records(recs);
    sort_records(shuffled);
    CleaningReport rep1, rep2;
    auto s1 = reconstruct_sessions(recs, 2000, rep1);
    auto s2 = reconstruct_sessions(shuffled, 2000, rep2);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].session_id == s2[i].session_id);
        CHECK(s1[i].clicks == s2[i].clicks);
    }
}

TEST_CASE("sessionization: beacon without categoryId is dropped and counted") {
    auto bad = make_record(RecordKind::PixelBeacon, 100, "u", 0,
                           {{"sessionId", "x1"}, {"pageNo", "1"}, {"itemsPerPage", "15"}});
    std::vector<WebLogRecord> recs = {bad, click("x1", 150, "u", 0)};
    CleaningReport rep;
    auto sessions = reconstruct_sessions(recs, 1000, rep);
    CHECK(sessions.empty());
    CHECK(rep.missing_category_sessions == 1);
}

TEST_CASE("zone resolution drops unknown categories") {
    auto t = Taxonomy::from_rows({{201, "SLR", 2}});
    std::vector<ListingSession> sessions;
    ListingSession a;
    a.session_id = "a";
    a.anony_id = "u";
    a.category_id = 201;
    sessions.push_back(a);
    ListingSession b = a;
    b.session_id = "b";
    b.category_id = 999;
    sessions.push_back(b);
    CleaningReport rep;
    rep.sessions_emitted = 2;
    resolve_zones(sessions, t, rep);
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].zone_id == 2);
    CHECK(rep.unknown_category_sessions == 1);
    CHECK(rep.sessions_emitted == 1);
}

TEST_CASE("double assignment: single arm vs both arms") {
    auto ab = [](const std::string& user, int treat, int64_t ts) {
        ListingSession s;
        s.session_id = user + std::to_string(ts);
        s.anony_id = user;
        s.treat = treat;
        s.stage = Stage::AB;
        s.ts_ms = ts;
        return s;
    };
    std::vector<ListingSession> sessions = {ab("mono", 0, 1), ab("mono", 0, 2), ab("mono", 0, 3),
                                            ab("both", 0, 4), ab("both", 1, 5)};
    auto stats = flag_double_assignment(sessions);
    CHECK(stats.is_double_assigned.at("mono") == 0);
    CHECK(stats.is_double_assigned.at("both") == 1);
    CHECK(stats.fraction_users_double == doctest::Approx(0.5));
    CHECK(stats.fraction_sessions_double == doctest::Approx(2.0 / 5.0));

    std::vector<ListingSession> empty;
    CHECK_THROWS_AS(flag_double_assignment(empty), Error);
}

TEST_CASE("ua family extraction") {
    CHECK(ua_family("Mozilla/5.0 (Windows NT 10.0) Chrome/49.0.2623.110 Safari/537.36") == "Chrome");
    CHECK(ua_family("Mozilla/5.0 (Macintosh) Version/9.1 Safari/601.5.17") == "Safari");
    CHECK(ua_family("Mozilla/5.0 (Windows NT 6.1; rv:45.0) Gecko/20100101 Firefox/45.0") == "Firefox");
    CHECK(ua_family("Mozilla/5.0 (Windows NT 10.0) Chrome/46.0.2486.0 Safari/537.36 Edge/13.10586") ==
          "Edge");
    CHECK(ua_family("Mozilla/5.0 (Windows NT 6.1; Trident/7.0; rv:11.0) like Gecko") == "IE");
    CHECK(ua_family("Opera/9.80 (Windows NT 6.2) Presto/2.12.388 Version/12.17") == "Opera");
    CHECK(ua_family("curl/7.47.0") == "Other");
}

TEST_CASE("sessions csv round trip") {
    ListingSession s;
    s.session_id = "sid1";
    s.anony_id = "anon1";
    s.treat = 1;
    s.category_id = 201;
    s.zone_id = 2;
    s.page_no = 3;
    s.items_per_page = 12;
    s.logged_in = 1;
    s.clicks = 4;
    s.ts_ms = 1459900800123;
    s.stage = Stage::AB;
    const std::string path = "/tmp/abx_test_sessions_rt.csv";
    write_sessions_csv(path, std::vector<ListingSession>{s});
    auto back = read_sessions_csv(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].session_id == s.session_id);
    CHECK(back[0].anony_id == s.anony_id);
    CHECK(back[0].treat == s.treat);
    CHECK(back[0].category_id == s.category_id);
    CHECK(back[0].zone_id == s.zone_id);
    CHECK(back[0].page_no == s.page_no);
    CHECK(back[0].items_per_page == s.items_per_page);
    CHECK(back[0].logged_in == s.logged_in);
    CHECK(back[0].clicks == s.clicks);
    CHECK(back[0].ts_ms == s.ts_ms);
    CHECK(back[0].stage == s.stage);
}

TEST_CASE("ua map csv round trip") {
    const std::string path = "/tmp/abx_test_uamap.csv";
    write_ua_map_csv(path, {{"u1", "Chrome"}, {"u2", "Safari"}});
    auto back = read_ua_map_csv(path);
    CHECK(back.at("u1") == "Chrome");
    CHECK(back.at("u2") == "Safari");
}
