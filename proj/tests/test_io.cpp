#include <fstream>

#include "cloze/dataset.hpp"
#include "cloze/error.hpp"
#include "cloze/io.hpp"
#include "doctest.h"
#include "support/toy_fixture.hpp"

using namespace cloze;
using namespace cloze::testing;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("sha256 test vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
  const auto dir = scratch_dir("io_sha");
  io::write_atomic(dir / "f", "abc");
  CHECK(io::sha256_file(dir / "f") == io::sha256_hex("abc"));
}

TEST_CASE("atomic write replaces content and leaves no temp files") {
  const auto dir = scratch_dir("io_atomic");
  io::write_atomic(dir / "out.txt", "first");
  io::write_atomic(dir / "out.txt", "second");
  CHECK(io::read_text(dir / "out.txt") == "second");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++n;
  CHECK(n == 1);
  io::write_atomic(dir / "sub" / "x", "y");
  CHECK(io::read_text(dir / "sub" / "x") == "y");
  CHECK(code_of([&] { io::write_atomic(dir / "out.txt" / "x", "y"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("jsonl reading") {
  const auto dir = scratch_dir("io_jsonl");
  io::write_atomic(dir / "ok.jsonl", "{\"a\":1}\n\n  \n{\"a\":2}");
  const auto rows = io::read_jsonl(dir / "ok.jsonl");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1]["a"] == 2);
  io::write_atomic(dir / "bad.jsonl", "{\"a\":1}\n{oops\n");
  try {
    io::read_jsonl(dir / "bad.jsonl");
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK(code_of([&] { io::read_jsonl(dir / "nope.jsonl"); }) == ErrorCode::FileNotFound);
  CHECK(code_of([&] { io::read_json(dir / "bad.jsonl"); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("example schema") {
  const std::vector<json> rows{
      {{"id", "a"}, {"text", "t"}, {"label", "X"}},
      {{"id", "b"}, {"text", "t"}, {"label", {"Y"}}},
      {{"id", "c"}, {"text", "t"}, {"label", {"X", "Y"}}},
      {{"id", "d"}, {"text", 3}},
      {{"id", "e"}, {"text", "t"}, {"entity", "Roma"}},
      {{"id", 7}, {"text", "t"}},
  };
  std::vector<RejectedRecord> rejected;
  const auto docs = parse_examples(rows, TemplateTask::document, &rejected);
  REQUIRE(docs.size() == 3);
  CHECK(*docs[0].gold == "X");
  CHECK(*docs[1].gold == "Y");
  CHECK_FALSE(docs[2].gold);
  CHECK(docs[2].id == "7");
  REQUIRE(rejected.size() == 3);
  CHECK(rejected[0].id == "c");
  CHECK(rejected[0].line == 3);
  CHECK(rejected[0].reason.find("single-label") != std::string::npos);
  CHECK(rejected[1].id == "d");
  CHECK(rejected[2].id == "e");

  CHECK(code_of([&] { parse_examples(rows, TemplateTask::document); }) == ErrorCode::SchemaMismatch);

  rejected.clear();
  const auto ents = parse_examples(rows, TemplateTask::entity, &rejected);
  REQUIRE(ents.size() == 1);
  CHECK(*ents[0].entity == "Roma");
}

TEST_CASE("fill-mask records") {
  const auto dir = scratch_dir("io_fill");
  io::write_atomic(dir / "f.jsonl", "{\"id\":\"q\",\"text\":\"il treno\",\"masked_word\":\"treno\"}\n");
  const auto fm = load_fillmask(dir / "f.jsonl");
  REQUIRE(fm.size() == 1);
  CHECK(fm[0].masked_word == "treno");
  io::write_atomic(dir / "g.jsonl", "{\"id\":\"q\",\"text\":\"il treno\"}\n");
  CHECK(code_of([&] { load_fillmask(dir / "g.jsonl"); }) == ErrorCode::SchemaMismatch);
}
