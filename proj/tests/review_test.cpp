#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "geocollab/error.hpp"
#include "geocollab/review.hpp"
#include "support/generators.hpp"

using namespace geocollab;
using namespace geocollab::review;
namespace gen = geocollab::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("geocollab-review-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

Errc error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Timeout;
}

GeoAnchor at(double lat, double lon) { return GeoAnchor{lat, lon, 0, std::nullopt}; }

geo::SceneState small_scene() {
  gen::Rng rng(5);
  return gen::random_scene(rng, 4);
}

session::Clock ticking(std::int64_t start = 1000) {
  auto t = std::make_shared<std::atomic<std::int64_t>>(start);
  return [t] { return t->fetch_add(1); };
}

}  // namespace

TEST(Publish, NewIdThenVersions) {
  ReviewService svc(std::make_unique<MemoryReviewStore>(), ticking());
  auto a = svc.publish_solution("s1", "Plan", small_scene());
  EXPECT_EQ(a.solution_id, "sol-1");
  EXPECT_EQ(a.version, 1);
  auto b = svc.publish_solution("s1", "Plan", geo::SceneState{});
  EXPECT_EQ(b.solution_id, "sol-1");
  EXPECT_EQ(b.version, 2);
  auto c = svc.publish_solution("s2", "Plan", geo::SceneState{});
  EXPECT_EQ(c.solution_id, "sol-2");

  EXPECT_EQ(svc.get_solution("sol-1", 1).scene, small_scene());
  EXPECT_TRUE(svc.get_solution("sol-1", 2).scene.sketches.empty());
  EXPECT_EQ(svc.list_solutions().size(), 3u);
  EXPECT_EQ(error_of([&] { svc.get_solution("sol-1", 3); }), Errc::UnknownSolution);
  EXPECT_EQ(error_of([&] { svc.get_solution("sol-9", 1); }), Errc::UnknownSolution);
  EXPECT_EQ(error_of([&] { svc.publish_solution("s1", "", {}); }), Errc::ValidationError);
}

TEST(Comments, ThreadsAndValidation) {
  ReviewService svc(std::make_unique<MemoryReviewStore>(), ticking());
  const auto sol = svc.publish_solution("s1", "Plan", {}).solution_id;
  const auto other = svc.publish_solution("s1", "Other", {}).solution_id;

  auto root = svc.post_comment(sol, 1, "Wei", "Move the entrance", at(31.23, 121.47));
  EXPECT_EQ(root.comment_id, "c-1");
  EXPECT_EQ(root.status, CommentStatus::open);
  auto reply = svc.post_comment(sol, 1, "", "Agreed", at(31.23, 121.47), root.comment_id);
  EXPECT_EQ(reply.author, "anonymous");
  EXPECT_EQ(reply.parent_id, root.comment_id);

  EXPECT_EQ(error_of([&] { svc.post_comment("sol-404", 1, "a", "x", at(0, 0)); }), Errc::UnknownSolution);
  EXPECT_EQ(error_of([&] { svc.post_comment(sol, 2, "a", "x", at(0, 0)); }), Errc::UnknownSolution);
  EXPECT_EQ(error_of([&] { svc.post_comment(sol, 1, "a", "x", at(0, 0), "c-77"); }), Errc::UnknownParent);
  EXPECT_EQ(error_of([&] { svc.post_comment(other, 1, "a", "x", at(0, 0), root.comment_id); }), Errc::UnknownParent);
  EXPECT_EQ(error_of([&] { svc.post_comment(sol, 1, "a", "", at(0, 0)); }), Errc::ValidationError);
  EXPECT_EQ(error_of([&] { svc.post_comment(sol, 1, "a", std::string(4001, 'x'), at(0, 0)); }), Errc::ValidationError);
  EXPECT_EQ(error_of([&] { svc.post_comment(sol, 1, "a", "x", at(95, 0)); }), Errc::ValidationError);
  EXPECT_EQ(error_of([&] { svc.set_comment_status("c-404", CommentStatus::addressed); }), Errc::UnknownComment);

  auto changed = svc.set_comment_status(root.comment_id, CommentStatus::addressed);
  EXPECT_EQ(changed.status, CommentStatus::addressed);
  EXPECT_EQ(svc.set_comment_status(root.comment_id, CommentStatus::addressed).status, CommentStatus::addressed);

  CommentFilter f;
  f.solution_id = sol;
  f.status = CommentStatus::open;
  auto open = svc.list_comments(f);
  ASSERT_EQ(open.size(), 1u);
  EXPECT_EQ(open[0].comment_id, reply.comment_id);
}

TEST(Export, ContainsTheVersionsDiscussion) {
  ReviewService svc(std::make_unique<MemoryReviewStore>(), ticking());
  const auto sol = svc.publish_solution("studio", "Plan", {}).solution_id;
  svc.publish_solution("studio", "Plan", {});
  svc.post_comment(sol, 1, "a", "first", at(1, 1));
  svc.post_comment(sol, 2, "b", "second", at(1, 1));
  Json doc = svc.export_comments(sol, 2);
  EXPECT_EQ(doc["solution_id"], sol);
  EXPECT_EQ(doc["version"], 2);
  EXPECT_EQ(doc["source_session"], "studio");
  ASSERT_EQ(doc["comments"].size(), 1u);
  EXPECT_EQ(doc["comments"][0]["text"], "second");
}

TEST(BBoxes, ParseAndAntimeridian) {
  BBox b = parse_bbox("10,170,20,-170");
  EXPECT_TRUE(b.contains(15, 175));
  EXPECT_TRUE(b.contains(15, -175));
  EXPECT_FALSE(b.contains(15, 0));
  EXPECT_FALSE(b.contains(25, 175));
  EXPECT_EQ(error_of([] { parse_bbox("1,2,3"); }), Errc::ValidationError);
  EXPECT_EQ(error_of([] { parse_bbox("a,b,c,d"); }), Errc::ValidationError);
  EXPECT_EQ(error_of([] { parse_bbox("20,0,10,5"); }), Errc::ValidationError);
}

// The filtered listing equals a brute-force scan over everything posted.
TEST(Property, FilterMatchesBruteForce) {
  gen::Rng rng(31);
  std::int64_t now = 0;
  ReviewService svc(std::make_unique<MemoryReviewStore>(), [&] { return now; });
  const auto sol = svc.publish_solution("s", "t", {}).solution_id;
  svc.publish_solution("s", "t", {});
  std::vector<Comment> all;
  for (int i = 0; i < 300; ++i) {
    now += static_cast<std::int64_t>(gen::pick(rng, 3));  // ties are allowed
    auto c = svc.post_comment(sol, 1 + static_cast<int>(gen::pick(rng, 2)), "u", "t" + std::to_string(i),
                              at(gen::uniform(rng, -60, 60), gen::uniform(rng, -180, 180)));
    if (gen::pick(rng, 3) == 0) c = svc.set_comment_status(c.comment_id, CommentStatus::addressed);
    all.push_back(c);
  }
  for (int q = 0; q < 200; ++q) {
    CommentFilter f;
    f.solution_id = sol;
    if (gen::pick(rng, 2)) f.version = 1 + static_cast<int>(gen::pick(rng, 2));
    if (gen::pick(rng, 2)) {
      const double la = gen::uniform(rng, -60, 50), lo1 = gen::uniform(rng, -180, 180), lo2 = gen::uniform(rng, -180, 180);
      f.bbox = BBox{la, lo1, la + gen::uniform(rng, 0, 40), lo2};
    }
    if (gen::pick(rng, 2)) f.since = static_cast<std::int64_t>(gen::pick(rng, static_cast<std::uint64_t>(now) + 1));
    if (gen::pick(rng, 2)) f.status = gen::pick(rng, 2) ? CommentStatus::open : CommentStatus::addressed;

    std::vector<std::string> expected;
    for (const auto& c : all) {
      bool ok = c.version == f.version.value_or(c.version);
      if (f.bbox) ok = ok && f.bbox->contains(c.anchor.lat, c.anchor.lon);
      if (f.since) ok = ok && c.created_at >= *f.since;
      if (f.status) ok = ok && c.status == *f.status;
      if (ok) expected.push_back(c.comment_id);
    }
    std::vector<std::string> got;
    for (const auto& c : svc.list_comments(f)) got.push_back(c.comment_id);
    ASSERT_EQ(got, expected);
  }
}

TEST(FileStore, StateSurvivesReopen) {
  TempDir dir;
  Comment posted;
  {
    ReviewService svc(std::make_unique<FileReviewStore>(dir.path), ticking());
    svc.publish_solution("s1", "Plan", small_scene());
    svc.publish_solution("s1", "Plan", {});
    posted = svc.post_comment("sol-1", 2, "a", "héllo \"quoted\"\nline", at(31.2, 121.4));
    svc.post_comment("sol-1", 2, "b", "reply", at(31.2, 121.4), posted.comment_id);
    svc.set_comment_status(posted.comment_id, CommentStatus::addressed);
  }
  ReviewService svc(std::make_unique<FileReviewStore>(dir.path), ticking(5000));
  EXPECT_EQ(svc.get_solution("sol-1", 1).scene, small_scene());
  CommentFilter f;
  f.solution_id = "sol-1";
  auto comments = svc.list_comments(f);
  ASSERT_EQ(comments.size(), 2u);
  posted.status = CommentStatus::addressed;
  EXPECT_EQ(comments[0], posted);
  // Counters continue after a restart.
  EXPECT_EQ(svc.post_comment("sol-1", 1, "c", "x", at(0, 0)).comment_id, "c-3");
  EXPECT_EQ(svc.publish_solution("s9", "New", {}).solution_id, "sol-2");
}

TEST(FileStore, TornFinalLineIsDropped) {
  TempDir dir;
  {
    ReviewService svc(std::make_unique<FileReviewStore>(dir.path), ticking());
    svc.publish_solution("s1", "Plan", {});
    svc.post_comment("sol-1", 1, "a", "kept", at(0, 0));
  }
  const fs::path log = dir.path / "review.jsonl";
  const auto intact = fs::file_size(log);
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << R"({"type":"comment","comment_id":"c-2","solution_id":"sol-1","ver)";
  }
  ReviewService svc(std::make_unique<FileReviewStore>(dir.path), ticking());
  CommentFilter f;
  f.solution_id = "sol-1";
  EXPECT_EQ(svc.list_comments(f).size(), 1u);
  EXPECT_EQ(fs::file_size(log), intact);
  svc.post_comment("sol-1", 1, "a", "after", at(0, 0));
  ReviewService again(std::make_unique<FileReviewStore>(dir.path), ticking());
  EXPECT_EQ(again.list_comments(f).size(), 2u);
}

TEST(FileStore, CorruptInteriorLineIsAnError) {
  TempDir dir;
  {
    std::ofstream out(dir.path / "review.jsonl");
    out << "garbage\n";
  }
  EXPECT_EQ(error_of([&] { ReviewService svc(std::make_unique<FileReviewStore>(dir.path)); }), Errc::StoreFailure);
}

TEST(Concurrency, ParallelPostsAllPersistWithUniqueIds) {
  TempDir dir;
  {
    ReviewService svc(std::make_unique<FileReviewStore>(dir.path));
    svc.publish_solution("s", "t", {});
    std::vector<std::thread> threads;
    for (int t = 0; t < 10; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 20; ++i) {
          svc.post_comment("sol-1", 1, "t" + std::to_string(t), "c" + std::to_string(i), at(0, 0));
          CommentFilter f;
          f.solution_id = "sol-1";
          (void)svc.list_comments(f);
        }
      });
    }
    for (auto& th : threads) th.join();
  }
  ReviewService svc(std::make_unique<FileReviewStore>(dir.path));
  CommentFilter f;
  f.solution_id = "sol-1";
  auto all = svc.list_comments(f);
  ASSERT_EQ(all.size(), 200u);
  std::set<std::string> ids;
  for (const auto& c : all) ids.insert(c.comment_id);
  EXPECT_EQ(ids.size(), 200u);
}

TEST(Codec, EventRoundTrip) {
  gen::Rng rng(8);
  SolutionRecord s{"sol-3", 2, "T", gen::random_scene(rng, 6), 123, "sess"};
  Comment c{"c-9", "sol-3", 2, "a", "text", at(1, 2), std::string("c-1"), 55, CommentStatus::addressed};
  StatusChange st{"c-9", CommentStatus::open, 77};
  auto back = [](const StoreEvent& e) { return event_from_json(Json::parse(event_to_json(e).dump())); };
  EXPECT_EQ(std::get<SolutionRecord>(back(s)).scene, s.scene);
  EXPECT_EQ(std::get<Comment>(back(c)), c);
  EXPECT_EQ(std::get<StatusChange>(back(st)).status, CommentStatus::open);
}
