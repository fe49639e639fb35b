#include "semsplit/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "semsplit/errors.hpp"

namespace semsplit {

CorpusIndex CorpusIndex::build(const std::vector<std::string>& corpus,
                               const TokenizerConfig& tokenizer) {
  if (corpus.empty()) {
    fail(ErrorCode::empty_corpus, "corpus has zero documents");
  }
  CorpusIndex index;
  index.total_docs_ = corpus.size();
  for (const std::string& phrase : tokenizer.phrases) {
    index.phrase_vocab_.insert(phrase);
  }
  for (uint32_t doc_id = 0; doc_id < corpus.size(); ++doc_id) {
    TermSequence seq = extract_terms(corpus[doc_id], tokenizer);
    for (const std::string& term : seq.distinct_content_terms()) {
      index.postings_[term].push_back(doc_id);
    }
  }
  // Per-doc terms were distinct, so postings are already sorted and unique.
  return index;
}

uint64_t CorpusIndex::doc_count(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<uint32_t>* CorpusIndex::postings(
    const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

uint64_t CorpusIndex::joint_doc_count(
    const std::vector<std::string>& terms) const {
  if (terms.empty()) return total_docs_;
  std::vector<const std::vector<uint32_t>*> lists;
  lists.reserve(terms.size());
  for (const std::string& t : terms) {
    const auto* p = postings(t);
    if (p == nullptr) return 0;
    lists.push_back(p);
  }
  // Intersect starting from the rarest list.
  std::sort(lists.begin(), lists.end(),
            [](const auto* a, const auto* b) { return a->size() < b->size(); });
  std::vector<uint32_t> acc = *lists.front();
  std::vector<uint32_t> next;
  for (size_t i = 1; i < lists.size() && !acc.empty(); ++i) {
    next.clear();
    std::set_intersection(acc.begin(), acc.end(), lists[i]->begin(),
                          lists[i]->end(), std::back_inserter(next));
    acc.swap(next);
  }
  return acc.size();
}

std::vector<std::string> CorpusIndex::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(postings_.size());
  for (const auto& [term, _] : postings_) out.push_back(term);
  return out;
}

void CorpusIndex::save(const std::string& path) const {
  nlohmann::json doc;
  doc["total_docs"] = total_docs_;
  nlohmann::json postings = nlohmann::json::object();
  for (const auto& [term, ids] : postings_) postings[term] = ids;
  doc["postings"] = std::move(postings);
  doc["phrases"] = std::vector<std::string>(phrase_vocab_.begin(),
                                            phrase_vocab_.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot write index: " + path);
  out << kMagic << '\n' << doc.dump() << '\n';
  if (!out) fail(ErrorCode::io_failure, "short write to index: " + path);
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot open index: " + path);
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != kMagic) {
    fail(ErrorCode::schema_version_mismatch,
         "index header is '" + header + "', expected '" + kMagic + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::io_failure, std::string("index body: ") + e.what());
  }
  CorpusIndex index;
  index.total_docs_ = doc.at("total_docs").get<uint64_t>();
  for (const auto& [term, ids] : doc.at("postings").items()) {
    index.postings_[term] = ids.get<std::vector<uint32_t>>();
  }
  for (const auto& p : doc.at("phrases")) {
    index.phrase_vocab_.insert(p.get<std::string>());
  }
  return index;
}

const char* corpus_mode_name(CorpusMode mode) {
  return mode == CorpusMode::directory ? "directory" : "lines";
}

CorpusMode corpus_mode_from_name(const std::string& name) {
  if (name == "directory") return CorpusMode::directory;
  if (name == "lines") return CorpusMode::lines;
  fail(ErrorCode::config_error,
       "unknown corpus mode '" + name + "' (expected lines|directory)");
}

std::vector<std::string> read_corpus(const std::string& path,
                                     CorpusMode mode) {
  namespace fs = std::filesystem;
  std::vector<std::string> docs;
  if (mode == CorpusMode::directory) {
    if (!fs::is_directory(path)) {
      fail(ErrorCode::io_failure, "corpus directory missing: " + path);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::ifstream in(f, std::ios::binary);
      if (!in) fail(ErrorCode::io_failure, "cannot read " + f.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      docs.push_back(buf.str());
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open corpus: " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      docs.push_back(line);
    }
    while (!docs.empty() && docs.back().empty()) docs.pop_back();
  }
  if (docs.empty()) fail(ErrorCode::empty_corpus, "corpus is empty: " + path);
  return docs;
}

}  // namespace semsplit
