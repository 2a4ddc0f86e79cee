// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <map>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "xlkd/common/digest.hpp"
#include "xlkd/common/error.hpp"
#include "xlkd/synthlang/benchmark.hpp"
#include "xlkd/tokenize/bpe.hpp"

namespace xlkd::tokenize {
namespace {

using Merge = SubwordVocab::Merge;

const std::vector<std::string> kLetters = [] {
  std::vector<std::string> out;
  for (char c = 'a'; c <= 'z'; ++c) out.emplace_back(1, c);
  return out;
}();

std::vector<std::string> W(std::initializer_list<const char*> ws) { return {ws.begin(), ws.end()}; }

// Plain reference BPE: recount everything each round, scan all pairs.
std::vector<Merge> reference_bpe(std::vector<std::string> corpus, std::size_t target) {
  std::vector<std::vector<std::string>> words;
  std::set<std::string> inventory;
  for (const std::string& w : corpus) {
    std::vector<std::string> p;
    for (char c : w) {
      p.emplace_back(1, c);
      inventory.emplace(1, c);
    }
    words.push_back(p);
  }
  std::vector<Merge> merges;
  while (inventory.size() < target) {
    std::map<Merge, int> counts;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.size(); ++i) ++counts[{w[i], w[i + 1]}];
    int best = 1;
    for (const auto& [p, n] : counts) best = std::max(best, n);
    if (best < 2) break;
    std::string token;
    Merge chosen;
    for (const auto& [p, n] : counts) {
      if (n == best && (token.empty() || p.first + p.second < token)) {
        token = p.first + p.second;
        chosen = p;
      }
    }
    merges.push_back(chosen);
    inventory.insert(token);
    for (auto& w : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i + 1 < w.size() && w[i] == chosen.first && w[i + 1] == chosen.second) {
          next.push_back(token);
          ++i;
        } else {
          next.push_back(w[i]);
        }
      }
      w = next;
    }
  }
  return merges;
}

TEST(Bpe, LowLowLower) {
  // Pair counts: (l,o)=3, (o,w)=3, (w,e)=1, (e,r)=1. "lo" < "ow" wins the
  // tie; then (lo,w)=3; after that every pair occurs once, so training stops.
  SubwordVocab v = SubwordVocab::train(W({"low", "low", "lower"}), 30, "en");
  EXPECT_EQ(v.merges(), (std::vector<Merge>{{"l", "o"}, {"lo", "w"}}));
  EXPECT_EQ(v.alphabet(), W({"e", "l", "o", "r", "w"}));
  EXPECT_EQ(v.size(), 4u + 5u + 2u);
  EXPECT_EQ(v.split("lower"), W({"low", "e", "r"}));
  EXPECT_EQ(v.merges(), reference_bpe(W({"low", "low", "lower"}), 30));
}

TEST(Bpe, MatchesReferenceOnGeneratedText) {
  auto langs = synthlang::LanguageSet::load(std::string(XLKD_SOURCE_DIR) + "/configs/synthlang.json");
  auto bench = synthlang::generate(langs, {100, 100, 50, 50}, 2);
  const auto& c = bench.at("xb").at("unannotated_train");
  std::vector<std::string> words;
  for (std::size_t i = 0; i < c.size(); ++i) words.insert(words.end(), c.words(i).begin(), c.words(i).end());
  for (std::size_t target : {30u, 80u, 200u}) {
    SubwordVocab v = SubwordVocab::train(words, target, "xb");
    EXPECT_EQ(v.merges(), reference_bpe(words, target)) << target;
  }
}

TEST(Bpe, TargetEqualsInventoryGivesCharacters) {
  SubwordVocab v = SubwordVocab::train(W({"low", "low", "lower"}), 5, "en");
  EXPECT_TRUE(v.merges().empty());
  SubwordVocab wide = SubwordVocab::train(W({"low", "lower"}), 30, "en", W({"q", "z"}));
  EXPECT_EQ(wide.alphabet().size(), 7u);
  EXPECT_EQ(wide.split("zoo"), W({"z", "o", "o"}));
  EXPECT_EQ(v.split("lower").size(), 5u);
  EXPECT_THROW(SubwordVocab::train(W({"low", "lower"}), 4, "en"), Error);
  EXPECT_THROW(SubwordVocab::train(std::vector<std::string>{}, 10, "en"), Error);
}

TEST(Bpe, Deterministic) {
  auto words = W({"flights", "flight", "fares", "fare", "flew", "fly", "flying"});
  EXPECT_EQ(SubwordVocab::train(words, 40, "en").to_json(), SubwordVocab::train(words, 40, "en").to_json());
}

TEST(Encode, FirstSubwordIndices) {
  // Vocab splitting flight -> fl+ight and book -> bo+ok, "a" whole.
  nlohmann::json doc = {{"scope", "en"},
                        {"specials", {"<pad>", "<unk>", "<s>", "<mask>"}},
                        {"alphabet", {"a", "b", "f", "g", "h", "i", "k", "l", "o", "t"}},
                        {"merges", nlohmann::json::array({nlohmann::json::array({"b", "o"}), nlohmann::json::array({"o", "k"}),
                                                          nlohmann::json::array({"f", "l"}), nlohmann::json::array({"i", "g"}),
                                                          nlohmann::json::array({"ig", "h"}), nlohmann::json::array({"igh", "t"})})}};
  SubwordVocab split = SubwordVocab::from_json(doc);
  auto words = W({"book", "a", "flight"});
  Tokenization t = split.encode(words);
  EXPECT_EQ(split.split("book"), W({"bo", "ok"}));
  EXPECT_EQ(split.split("flight"), W({"fl", "ight"}));
  EXPECT_EQ(t.first_subword, (std::vector<std::size_t>{0, 2, 3}));
  Tokenization with_bos = split.encode(words, true);
  EXPECT_EQ(with_bos.ids.front(), kBos);
  EXPECT_EQ(with_bos.first_subword, (std::vector<std::size_t>{1, 3, 4}));

  SubwordVocab whole = SubwordVocab::train(W({"book", "book", "a", "a", "flight", "flight"}), 200, "en");
  EXPECT_EQ(whole.encode(words).first_subword, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Encode, UnknownCharactersMapToUnk) {
  SubwordVocab v = SubwordVocab::train(W({"low", "low", "lower"}), 30, "en");
  Tokenization t = v.encode(W({"lowz"}));
  EXPECT_EQ(t.ids.back(), kUnk);
  EXPECT_EQ(t.word_spans[0], (std::pair<std::size_t, std::size_t>{0, 2}));
}

TEST(Align, ZipsFirstSubwords) {
  Tokenization a, b;
  a.word_spans = {{0, 2}, {2, 3}, {3, 5}};
  a.first_subword = {0, 2, 3};
  b.word_spans = {{0, 1}, {1, 2}, {2, 3}};
  b.first_subword = {0, 1, 2};
  auto pairs = align_first_subwords(a, b);
  EXPECT_EQ(pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {2, 1}, {3, 2}}));
  EXPECT_EQ(align_first_subwords(a, a), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {2, 2}, {3, 3}}));
  Tokenization one;
  one.word_spans = {{1, 3}};
  one.first_subword = {1};
  EXPECT_EQ(align_first_subwords(one, one).size(), 1u);
  EXPECT_THROW(align_first_subwords(a, one), Error);
}

class CorpusVocab : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    langs_ = new synthlang::LanguageSet(
        synthlang::LanguageSet::load(std::string(XLKD_SOURCE_DIR) + "/configs/synthlang.json"));
    bench_ = new synthlang::Benchmark(synthlang::generate(*langs_, {300, 300, 100, 200}, 5));
  }
  static void TearDownTestSuite() {
    delete bench_;
    delete langs_;
  }
  static inline synthlang::LanguageSet* langs_ = nullptr;
  static inline synthlang::Benchmark* bench_ = nullptr;
};

TEST_F(CorpusVocab, RoundTripAndMonotoneIndices) {
  for (const auto& [lang, splits] : *bench_) {
    std::vector<synthlang::Corpus> train{splits.at("unannotated_train")};
    SubwordVocab v = SubwordVocab::train(train, 400, lang, kLetters);
    EXPECT_GT(v.merges().size(), 50u) << lang;
    for (const char* split : {"unannotated_train", "test"}) {
      const auto& c = splits.at(split);
      for (std::size_t i = 0; i < c.size(); ++i) {
        auto words = c.words(i);
        for (bool bos : {false, true}) {
          Tokenization t = v.encode(words, bos);
          ASSERT_EQ(v.decode(t), std::vector<std::string>(words.begin(), words.end()));
          std::size_t expect = bos ? 1 : 0;
          for (std::size_t w = 0; w < t.num_words(); ++w) {
            ASSERT_EQ(t.word_spans[w].first, expect);
            ASSERT_LT(t.word_spans[w].first, t.word_spans[w].second);
            ASSERT_EQ(t.first_subword[w], t.word_spans[w].first);
            expect = t.word_spans[w].second;
          }
          ASSERT_EQ(expect, t.ids.size());
        }
      }
    }
  }
}

TEST_F(CorpusVocab, SharedVocabCoversAllLanguages) {
  std::vector<synthlang::Corpus> all;
  for (const auto& [lang, splits] : *bench_) all.push_back(splits.at("unannotated_train"));
  SubwordVocab shared = SubwordVocab::train(all, 800, "shared", kLetters);
  for (const auto& [lang, splits] : *bench_) {
    const auto& c = splits.at("test");
    std::size_t unk = 0, total = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int id : shared.encode(c.words(i)).ids) {
        unk += id == kUnk;
        ++total;
      }
    }
    EXPECT_LT(static_cast<double>(unk) / static_cast<double>(total), 0.01) << lang;
  }
}

TEST_F(CorpusVocab, SaveLoadBitExact) {
  std::vector<synthlang::Corpus> train{bench_->at("xc").at("unannotated_train")};
  SubwordVocab v = SubwordVocab::train(train, 400, "xc");
  auto path = std::filesystem::temp_directory_path() / "xlkd_vocab_test.json";
  v.save(path);
  SubwordVocab back = SubwordVocab::load(path);
  EXPECT_EQ(back.hash(), v.hash());
  EXPECT_EQ(back.size(), v.size());
  const auto& c = bench_->at("xc").at("test");
  for (std::size_t i = 0; i < c.size(); ++i) ASSERT_EQ(back.encode(c.words(i)).ids, v.encode(c.words(i)).ids);
  back.save(path.string() + ".2");
  EXPECT_EQ(read_file(path), read_file(path.string() + ".2"));
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".2");
}

}  // namespace
}  // namespace xlkd::tokenize
