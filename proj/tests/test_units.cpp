#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <sstream>
#include <set>

#include "hctc/units.hpp"

using namespace hctc;
using namespace hctc::units;

namespace {

std::vector<Transcript> corpus_of(std::initializer_list<const char*> lines) {
  std::vector<Transcript> c;
  int n = 0;
  for (const char* text : lines) c.push_back({"utt" + std::to_string(n++), text});
  return c;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

MergeTable weather_merges() {
  MergeTable t;
  t.ops = {{"e@", "a@", "ea@"},
           {"w@", "ea@", "wea@"},
           {"t@", "h@", "th@"},
           {"th@", "e@", "the@"},
           {"the@", "r", "ther"}};
  return t;
}

UnitInventory weather_inventory(const MergeTable& merges) {
  return build_bpe_inventory(corpus_of({"weather cold ld wea"}), merges);
}

}  // namespace

TEST_CASE("character inventory construction") {
  const UnitInventory ab = build_char_inventory(corpus_of({"ab", "ba"}));
  CHECK(ab.size() == 3);  // blank + a + b
  CHECK(ab.unit(0) == "<blank>");
  CHECK(ab.index_of("a") > 0);
  CHECK(ab.index_of("b") > 0);
  CHECK(ab.character_level());

  const UnitInventory yk = build_char_inventory(corpus_of({"you know"}));
  CHECK(yk.index_of(" ") < 0);  // never a space unit
  for (const char* c : {"y", "o", "u", "k", "n", "w"}) CHECK(yk.index_of(c) > 0);
  CHECK(yk.size() == 7);  // six distinct characters + blank

  CHECK_THROWS_AS(build_char_inventory({}), DataError);
}

TEST_CASE("inventory size is distinct characters plus one") {
  const auto corpus = corpus_of({"it's no not even cold weather", "you know"});
  std::set<std::string> distinct;
  for (const auto& t : corpus) {
    for (const auto& c : utf8_chars(t.text)) {
      if (c != " ") distinct.insert(c);
    }
  }
  CHECK(build_char_inventory(corpus).size() == distinct.size() + 1);
}

TEST_CASE("learn_bpe basics") {
  SUBCASE("zero operations") {
    CHECK(learn_bpe(corpus_of({"abc"}), 0).size() == 0);
  }

  SUBCASE("single merge picks the most frequent within-word pair") {
    const MergeTable t = learn_bpe(corpus_of({"aa aa ab"}), 1);
    REQUIRE(t.size() == 1);
    CHECK(t.ops[0].left == "a@");
    CHECK(t.ops[0].right == "a");
    CHECK(t.ops[0].merged == "aa");
  }

  SUBCASE("stops early when no pair repeats") {
    const MergeTable t = learn_bpe(corpus_of({"ab cd"}), 10);
    CHECK(t.size() == 0);  // every pair occurs once
  }

  SUBCASE("ties break on lexicographic (left, right)") {
    // Pairs (a@,b) and (c@,d) both occur twice; (a@,b) must win.
    const MergeTable t = learn_bpe(corpus_of({"ab cd ab cd"}), 1);
    REQUIRE(t.size() == 1);
    CHECK(t.ops[0].merged == "ab");
  }

  SUBCASE("no merge across word boundaries") {
    // "a b" repeated has no within-word pair at all.
    const MergeTable t = learn_bpe(corpus_of({"a b a b a b"}), 5);
    CHECK(t.size() == 0);
  }

  SUBCASE("marker character in the corpus is rejected") {
    CHECK_THROWS_AS(learn_bpe(corpus_of({"a@b"}), 1), DataError);
  }
}

TEST_CASE("encode produces the marker convention of the worked examples") {
  const MergeTable merges = weather_merges();
  const UnitInventory inv = weather_inventory(merges);

  SUBCASE("partial merges split a word") {
    const UnitSequence seq = encode_subwords("weather", merges, inv);
    REQUIRE(seq.units.size() == 2);
    CHECK(inv.unit(seq.units[0]) == "wea@");
    CHECK(inv.unit(seq.units[1]) == "ther");
  }

  SUBCASE("a table merging the whole word emits one unit") {
    MergeTable full = merges;
    full.ops.push_back({"wea@", "ther", "weather"});
    const UnitInventory inv2 = weather_inventory(full);
    const UnitSequence seq = encode_subwords("weather", full, inv2);
    REQUIRE(seq.units.size() == 1);
    CHECK(inv2.unit(seq.units[0]) == "weather");
  }

  SUBCASE("single character word stays itself") {
    const MergeTable none;
    const UnitInventory inv3 = build_bpe_inventory(corpus_of({"a ab"}), none);
    const UnitSequence seq = encode_subwords("a", none, inv3);
    REQUIRE(seq.units.size() == 1);
    CHECK(inv3.unit(seq.units[0]) == "a");
  }

  SUBCASE("unknown character is reported by name") {
    CHECK_THROWS_AS(encode_subwords("xyz", merges, inv), UnknownSymbolError);
    try {
      encode_subwords("xyz", merges, inv);
    } catch (const UnknownSymbolError& e) {
      CHECK(e.symbol() == "x");
    }
  }
}

TEST_CASE("decode_units recovers words from marker absence") {
  const std::vector<std::string> strings{"<blank>", "co@", "ld", "wea@", "ther"};
  const UnitInventory inv(strings, /*character_level=*/false, 4);

  UnitSequence seq;
  seq.units = {1, 2, 3, 4};
  CHECK(decode_units(seq, inv) == "cold weather");

  seq.units.clear();
  CHECK(decode_units(seq, inv).empty());

  // Blanks are skipped, out-of-range indices rejected.
  seq.units = {0, 1, 0, 2};
  CHECK(decode_units(seq, inv) == "cold");
  seq.units = {9};
  CHECK_THROWS_AS(decode_units(seq, inv), ContractViolation);
}

TEST_CASE("character-level decoding concatenates without spaces") {
  const UnitInventory inv = build_char_inventory(corpus_of({"you know"}));
  const UnitSequence seq = encode_units("you know", inv, nullptr);
  CHECK(seq.units.size() == 7);  // spaces dropped
  CHECK(decode_units(seq, inv) == "youknow");
}

TEST_CASE("round trip on every corpus word across merge counts") {
  const auto corpus = corpus_of({"the weather is cold today", "we went there together",
                                 "thee we the weather", "together together we go",
                                 "it's no not even cold weather"});
  const MergeTable all = learn_bpe(corpus, 40);
  for (std::size_t ops : {std::size_t{0}, std::size_t{5}, all.size()}) {
    MergeTable table;
    table.ops.assign(all.ops.begin(), all.ops.begin() + std::min(ops, all.size()));
    const UnitInventory inv = build_bpe_inventory(corpus, table);
    for (const auto& t : corpus) {
      for (const auto& word : words_of(t.text)) {
        const UnitSequence seq = encode_subwords(word, table, inv);
        CHECK(decode_units(seq, inv) == word);
        for (int u : seq.units) CHECK(u != 0);  // never the blank
      }
    }
  }
}

TEST_CASE("inventory size equals base + merges + blank and coarsening is monotone") {
  const auto corpus = corpus_of({"abab abab caba bac abc", "ab ab abab cab bac",
                                 "caba abab ab bac abc"});
  const UnitInventory base_inv = build_bpe_inventory(corpus, MergeTable{});
  const std::size_t base = base_inv.size() - 1;

  const MergeTable all = learn_bpe(corpus, 12);
  double prev_mean = 1e9;
  for (std::size_t ops = 0; ops <= all.size(); ++ops) {
    MergeTable table;
    table.ops.assign(all.ops.begin(), all.ops.begin() + ops);
    const UnitInventory inv = build_bpe_inventory(corpus, table);
    CHECK(inv.size() == base + ops + 1);
    CHECK(inv.bpe_ops() == ops);

    std::size_t pieces = 0, words = 0;
    for (const auto& t : corpus) {
      for (const auto& word : words_of(t.text)) {
        pieces += segment_word(word, table).size();
        ++words;
      }
    }
    const double mean = static_cast<double>(pieces) / static_cast<double>(words);
    CHECK(mean <= prev_mean + 1e-12);
    prev_mean = mean;
  }
}

TEST_CASE("merge table and inventory files round trip") {
  const auto corpus = corpus_of({"the weather the weather cold cold colder"});
  const MergeTable table = learn_bpe(corpus, 8);
  const UnitInventory inv = build_bpe_inventory(corpus, table);

  const std::string mpath = "tmp_units_merges.txt";
  const std::string ipath = "tmp_units_inv.txt";
  write_merge_table(mpath, table);
  const MergeTable table2 = read_merge_table(mpath);
  REQUIRE(table2.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(table2.ops[i].left == table.ops[i].left);
    CHECK(table2.ops[i].right == table.ops[i].right);
    CHECK(table2.ops[i].merged == table.ops[i].merged);
  }

  write_inventory(ipath, inv);
  const UnitInventory inv2 = read_inventory(ipath);
  CHECK(inv2.units() == inv.units());
  CHECK(inv2.character_level() == inv.character_level());
  CHECK(inv2.bpe_ops() == inv.bpe_ops());
  CHECK(inv2.content_hash() == inv.content_hash());

  const UnitInventory chars = build_char_inventory(corpus);
  write_inventory(ipath, chars);
  const UnitInventory chars2 = read_inventory(ipath);
  CHECK(chars2.character_level());
  CHECK(chars2.units() == chars.units());

  std::remove(mpath.c_str());
  std::remove(ipath.c_str());
}

TEST_CASE("transcript files round trip with lowercasing") {
  const std::string path = "tmp_units_transcripts.tsv";
  write_transcripts(path, {{"a1", "Cold Weather"}, {"a2", "IT'S no"}});
  const auto got = read_transcripts(path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].text == "cold weather");
  CHECK(got[1].text == "it's no");
  std::remove(path.c_str());
}

TEST_CASE("apostrophes are ordinary characters") {
  const auto corpus = corpus_of({"it's it's its"});
  const MergeTable table = learn_bpe(corpus, 6);
  const UnitInventory inv = build_bpe_inventory(corpus, table);
  const UnitSequence seq = encode_subwords("it's", table, inv);
  CHECK(decode_units(seq, inv) == "it's");
}
