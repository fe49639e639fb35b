#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "semsplit/corpus.hpp"
#include "semsplit/errors.hpp"
#include "support/reference_oracle.hpp"
#include "support/toy_corpus.hpp"

using namespace semsplit;

TEST_CASE("build counts per-term document frequency") {
  std::vector<std::string> docs = {"cancer screening", "flu season",
                                   "cancer treatment", "well visit"};
  CorpusIndex index = CorpusIndex::build(docs, {});
  CHECK(index.total_docs() == 4);
  CHECK(index.doc_count("cancer") == 2);
  CHECK(index.doc_count("flu") == 1);
  CHECK(index.doc_count("unseen") == 0);
}

TEST_CASE("single-document corpus") {
  CorpusIndex index = CorpusIndex::build({"a b"}, {});
  CHECK(index.total_docs() == 1);
  CHECK(index.vocabulary_size() == 2);
  CHECK(index.doc_count("a") == 1);
  CHECK(index.doc_count("b") == 1);
}

TEST_CASE("empty corpus is an error") {
  try {
    CorpusIndex::build({}, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_corpus);
  }
}

TEST_CASE("phrases index as single terms without double counting") {
  TokenizerConfig config;
  config.phrases = {"breast cancer"};
  CorpusIndex index = CorpusIndex::build({"breast cancer found"}, config);
  CHECK(index.doc_count("breast cancer") == 1);
  CHECK(index.doc_count("breast") == 0);
  CHECK(index.doc_count("cancer") == 0);
  CHECK(index.doc_count("found") == 1);
}

TEST_CASE("repeated term counts once per document") {
  CorpusIndex index = CorpusIndex::build({"flu flu flu", "flu"}, {});
  CHECK(index.doc_count("flu") == 2);
}

TEST_CASE("joint counts agree with the set-intersection reference") {
  auto docs = toy::corpus();
  CorpusIndex index = CorpusIndex::build(docs, {});
  refimpl::Oracle ref(docs);

  CHECK(index.total_docs() == 64);
  for (const auto& [term, _] : toy::posting_table()) {
    CHECK(index.doc_count(term) == ref.count(term));
  }
  CHECK(index.joint_doc_count({"hiv", "aids"}) == 4);
  CHECK(index.joint_doc_count({"hiv", "antiretroviral"}) == 4);
  CHECK(index.joint_doc_count({"antiretroviral", "cd4"}) == 4);
  CHECK(index.joint_doc_count({"hiv", "garden"}) == 0);
  CHECK(index.joint_doc_count({"fever", "rash", "fatigue"}) == 2);
  CHECK(index.joint_doc_count({"hiv", "fever", "rash", "fatigue"}) ==
        ref.joint({"hiv", "fever", "rash", "fatigue"}));
  CHECK(index.joint_doc_count({"nonexistent", "hiv"}) == 0);
}

TEST_CASE("joint count is monotone under supersets") {
  auto docs = toy::corpus();
  CorpusIndex index = CorpusIndex::build(docs, {});
  std::vector<std::string> sets[] = {
      {"condition"},
      {"condition", "infection"},
      {"condition", "infection", "virus"},
      {"condition", "infection", "virus", "hiv"},
  };
  uint64_t prev = index.total_docs();
  for (const auto& s : sets) {
    uint64_t count = index.joint_doc_count(s);
    CHECK(count <= prev);
    prev = count;
  }
  CHECK(prev == 4);  // all four nest down to the hiv docs
}

TEST_CASE("save and load round-trip preserves all counts") {
  namespace fs = std::filesystem;
  auto docs = toy::corpus();
  TokenizerConfig config;
  config.phrases = {"immune system"};
  CorpusIndex index = CorpusIndex::build(docs, config);

  fs::path path = fs::temp_directory_path() / "semsplit_test_index.json";
  index.save(path.string());
  CorpusIndex loaded = CorpusIndex::load(path.string());

  CHECK(loaded.total_docs() == index.total_docs());
  CHECK(loaded.vocabulary_size() == index.vocabulary_size());
  CHECK(loaded.phrases() == index.phrases());
  for (const auto& term : index.vocabulary()) {
    CHECK(loaded.doc_count(term) == index.doc_count(term));
  }
  CHECK(loaded.joint_doc_count({"fever", "rash", "fatigue"}) == 2);

  // First line of the file is the format header.
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "SEMSPLIT-IDX-1");
  in.close();
  fs::remove(path);
}

TEST_CASE("load rejects a wrong header") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "semsplit_bad_index.json";
  {
    std::ofstream out(path);
    out << "SOMETHING-ELSE-9\n{}\n";
  }
  try {
    CorpusIndex::load(path.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema_version_mismatch);
  }
  fs::remove(path);
}

TEST_CASE("read_corpus line mode splits on newlines") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "semsplit_corpus_lines.txt";
  {
    std::ofstream out(path);
    out << "doc one\ndoc two\ndoc three\n";
  }
  auto docs = read_corpus(path.string(), CorpusMode::lines);
  REQUIRE(docs.size() == 3);
  CHECK(docs[1] == "doc two");
  fs::remove(path);
}

TEST_CASE("read_corpus directory mode orders files lexicographically") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "semsplit_corpus_dir";
  fs::create_directories(dir);
  std::ofstream(dir / "b.txt") << "second doc";
  std::ofstream(dir / "a.txt") << "first doc";
  auto docs = read_corpus(dir.string(), CorpusMode::directory);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0] == "first doc");
  CHECK(docs[1] == "second doc");
  fs::remove_all(dir);
}
