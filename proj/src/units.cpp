#include "hctc/units.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hctc::units {

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream ss(text);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

bool has_marker(const std::string& unit) {
  return !unit.empty() && unit.back() == kMarker;
}

std::string strip_marker(const std::string& unit) {
  return has_marker(unit) ? unit.substr(0, unit.size() - 1) : unit;
}

// Word as marker-decorated characters: every character except the last
// carries the trailing marker.
std::vector<std::string> decorate_word(const std::string& word) {
  const std::vector<std::string> chars = utf8_chars(word);
  std::vector<std::string> out;
  out.reserve(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (i + 1 < chars.size()) {
      out.push_back(chars[i] + kMarker);
    } else {
      out.push_back(chars[i]);
    }
  }
  return out;
}

void reject_marker_in_corpus(const std::string& word) {
  if (word.find(kMarker) != std::string::npos) {
    throw DataError("corpus word '" + word + "' contains the marker character '@'");
  }
}

// Distinct words with their corpus frequencies, in lexicographic order.
std::map<std::string, long long> word_counts(const std::vector<Transcript>& corpus) {
  std::map<std::string, long long> counts;
  for (const auto& t : corpus) {
    for (const auto& w : split_words(t.text)) {
      reject_marker_in_corpus(w);
      ++counts[w];
    }
  }
  return counts;
}

void apply_merge(std::vector<std::string>& word, const MergeOp& op) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < word.size();) {
    if (r + 1 < word.size() && word[r] == op.left && word[r + 1] == op.right) {
      word[w++] = op.merged;
      r += 2;
    } else {
      if (w != r) word[w] = std::move(word[r]);
      ++w;
      ++r;
    }
  }
  word.resize(w);
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((lead & 0x80u) == 0x00u) len = 1;
    else if ((lead & 0xE0u) == 0xC0u) len = 2;
    else if ((lead & 0xF0u) == 0xE0u) len = 3;
    else if ((lead & 0xF8u) == 0xF0u) len = 4;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

UnitInventory::UnitInventory(std::vector<std::string> unit_strings, bool character_level,
                             std::uint32_t bpe_ops)
    : units_(std::move(unit_strings)), character_level_(character_level), bpe_ops_(bpe_ops) {
  if (units_.empty() || units_[0] != kBlankToken) {
    throw ContractViolation("UnitInventory: index 0 must be the blank");
  }
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (units_[i].empty()) throw ContractViolation("UnitInventory: empty unit string");
    if (!index_.emplace(units_[i], static_cast<int>(i)).second) {
      throw ContractViolation("UnitInventory: duplicate unit '" + units_[i] + "'");
    }
  }
}

int UnitInventory::index_of(std::string_view unit) const {
  const auto it = index_.find(std::string(unit));
  return it == index_.end() ? -1 : it->second;
}

std::uint64_t UnitInventory::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& u : units_) {
    h = fnv1a64(u, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

UnitInventory build_char_inventory(const std::vector<Transcript>& corpus) {
  if (corpus.empty()) throw DataError("build_char_inventory: empty corpus");
  std::set<std::string> chars;
  for (const auto& t : corpus) {
    for (const auto& c : utf8_chars(t.text)) {
      if (c.size() == 1 && std::isspace(static_cast<unsigned char>(c[0]))) continue;
      chars.insert(c);
    }
  }
  if (chars.empty()) throw DataError("build_char_inventory: corpus has no characters");
  std::vector<std::string> units;
  units.reserve(chars.size() + 1);
  units.emplace_back(kBlankToken);
  units.insert(units.end(), chars.begin(), chars.end());
  return UnitInventory(std::move(units), /*character_level=*/true, /*bpe_ops=*/0);
}

MergeTable learn_bpe(const std::vector<Transcript>& corpus, std::size_t n_ops) {
  const auto counts = word_counts(corpus);

  std::vector<std::vector<std::string>> words;
  std::vector<long long> freqs;
  std::set<std::string> known_units;
  for (const auto& [word, freq] : counts) {
    words.push_back(decorate_word(word));
    freqs.push_back(freq);
    for (const auto& u : words.back()) known_units.insert(u);
  }

  MergeTable table;
  for (std::size_t op = 0; op < n_ops; ++op) {
    std::map<std::pair<std::string, std::string>, long long> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& word = words[w];
      for (std::size_t i = 0; i + 1 < word.size(); ++i) {
        pair_counts[{word[i], word[i + 1]}] += freqs[w];
      }
    }
    // Best = highest count among pairs occurring at least twice whose merge
    // would introduce a genuinely new unit string; the ordered map makes the
    // lexicographically smallest pair win ties.
    long long best_count = 0;
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& [pair, count] : pair_counts) {
      if (count < 2 || count <= best_count) continue;
      const std::string merged = strip_marker(pair.first) + pair.second;
      if (merged == kBlankToken || known_units.count(merged)) continue;
      best_count = count;
      best = &pair;
    }
    if (best == nullptr) break;  // no pair repeats: further merges are arbitrary

    MergeOp merge{best->first, best->second, strip_marker(best->first) + best->second};
    for (auto& word : words) apply_merge(word, merge);
    known_units.insert(merge.merged);
    table.ops.push_back(std::move(merge));
  }
  return table;
}

UnitInventory build_bpe_inventory(const std::vector<Transcript>& corpus,
                                  const MergeTable& merges) {
  const auto counts = word_counts(corpus);
  if (counts.empty()) throw DataError("build_bpe_inventory: empty corpus");
  std::set<std::string> base;
  for (const auto& [word, freq] : counts) {
    for (const auto& u : decorate_word(word)) base.insert(u);
  }
  std::vector<std::string> units;
  units.reserve(base.size() + merges.size() + 1);
  units.emplace_back(kBlankToken);
  units.insert(units.end(), base.begin(), base.end());
  for (const auto& op : merges.ops) units.push_back(op.merged);
  return UnitInventory(std::move(units), /*character_level=*/false,
                       static_cast<std::uint32_t>(merges.size()));
}

std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges) {
  reject_marker_in_corpus(word);
  std::vector<std::string> pieces = decorate_word(word);
  for (const auto& op : merges.ops) apply_merge(pieces, op);
  return pieces;
}

UnitSequence encode_subwords(const std::string& text, const MergeTable& merges,
                             const UnitInventory& inv) {
  if (inv.character_level()) {
    throw ContractViolation("encode_subwords: inventory is character-level");
  }
  UnitSequence seq;
  for (const auto& word : split_words(text)) {
    for (const auto& c : utf8_chars(word)) {
      if (inv.index_of(c) < 0 && inv.index_of(c + kMarker) < 0) {
        throw UnknownSymbolError(c);
      }
    }
    for (const auto& piece : segment_word(word, merges)) {
      const int idx = inv.index_of(piece);
      if (idx < 0) throw UnknownSymbolError(piece);
      seq.units.push_back(idx);
    }
  }
  return seq;
}

UnitSequence encode_units(const std::string& text, const UnitInventory& inv,
                          const MergeTable* merges) {
  if (inv.character_level()) {
    UnitSequence seq;
    for (const auto& c : utf8_chars(text)) {
      if (c.size() == 1 && std::isspace(static_cast<unsigned char>(c[0]))) continue;
      const int idx = inv.index_of(c);
      if (idx < 0) throw UnknownSymbolError(c);
      seq.units.push_back(idx);
    }
    return seq;
  }
  if (merges == nullptr) {
    throw ContractViolation("encode_units: subword inventory needs a merge table");
  }
  return encode_subwords(text, *merges, inv);
}

std::string decode_units(const UnitSequence& seq, const UnitInventory& inv) {
  std::string out;
  for (int idx : seq.units) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= inv.size()) {
      throw ContractViolation("decode_units: unit index out of range");
    }
    if (idx == 0) continue;  // blanks never carry text
    const std::string& u = inv.unit(static_cast<std::size_t>(idx));
    if (inv.character_level()) {
      out += u;
    } else if (has_marker(u)) {
      out += strip_marker(u);
    } else {
      out += u;
      out += ' ';
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void write_inventory(const std::string& path, const UnitInventory& inv) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (const auto& u : inv.units()) f << u << '\n';
}

UnitInventory read_inventory(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r')) line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kBlankToken) {
    throw DataError("inventory file must start with '<blank>': " + path);
  }
  // The file carries no flags; a unit with marked multi-codepoint content or
  // a decorated character identifies a subword inventory, and the number of
  // multi-character units recovers the merge count (base units are single
  // characters).
  bool subword = false;
  std::uint32_t merged_units = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cps = utf8_chars(lines[i]);
    if (cps.empty()) continue;  // rejected by the inventory constructor below
    const bool marked = cps.size() >= 2 && cps.back() == std::string(1, kMarker);
    if (marked) subword = true;
    if (cps.size() - (marked ? 1 : 0) >= 2) {
      subword = true;
      ++merged_units;
    }
  }
  return UnitInventory(std::move(lines), /*character_level=*/!subword,
                       subword ? merged_units : 0);
}

void write_merge_table(const std::string& path, const MergeTable& merges) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (const auto& op : merges.ops) f << op.left << ' ' << op.right << '\n';
}

MergeTable read_merge_table(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  MergeTable table;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
      throw ParseError("merge line must be 'left right'", line_start);
    }
    MergeOp op;
    op.left = line.substr(0, sp);
    op.right = line.substr(sp + 1);
    if (op.right.find(' ') != std::string::npos) {
      throw ParseError("merge line has more than two fields", line_start);
    }
    op.merged = strip_marker(op.left) + op.right;
    table.ops.push_back(std::move(op));
  }
  return table;
}

void write_transcripts(const std::string& path, const std::vector<Transcript>& corpus) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (const auto& t : corpus) f << t.utt_id << '\t' << t.text << '\n';
}

std::vector<Transcript> read_transcripts(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  std::vector<Transcript> corpus;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("transcript line missing '<TAB>'", line_start);
    }
    Transcript t;
    t.utt_id = line.substr(0, tab);
    t.text = line.substr(tab + 1);
    // Transcripts are lowercased at ingestion (ASCII range only).
    for (char& c : t.text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    corpus.push_back(std::move(t));
  }
  return corpus;
}

}  // namespace hctc::units
