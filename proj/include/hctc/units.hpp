#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hctc/errors.hpp"

namespace hctc::units {

// Word-position marker: a trailing '@' on a unit means the unit continues
// inside a word; its absence marks a word-final unit. Word boundaries are
// recovered from that absence alone, so no space unit exists anywhere.
inline constexpr char kMarker = '@';
inline constexpr std::string_view kBlankToken = "<blank>";

struct Transcript {
  std::string utt_id;
  std::string text;
};

// Ordered target set L' = L + blank. Index 0 is always the blank and never
// appears in transcriptions. `character_level` selects the marker-free
// decoding convention of plain character systems.
class UnitInventory {
 public:
  UnitInventory() = default;
  explicit UnitInventory(std::vector<std::string> unit_strings, bool character_level,
                         std::uint32_t bpe_ops);

  std::size_t size() const { return units_.size(); }  // |L'|
  const std::string& unit(std::size_t index) const { return units_[index]; }
  const std::vector<std::string>& units() const { return units_; }
  bool character_level() const { return character_level_; }
  std::uint32_t bpe_ops() const { return bpe_ops_; }

  // -1 when absent.
  int index_of(std::string_view unit) const;

  // FNV-1a over the unit list; used to pair LMs and checkpoints with the
  // inventory they were built against.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> units_;  // units_[0] == kBlankToken
  std::unordered_map<std::string, int> index_;
  bool character_level_ = false;
  std::uint32_t bpe_ops_ = 0;
};

struct MergeOp {
  std::string left;    // always carries the marker (it has a right neighbour)
  std::string right;
  std::string merged;  // left without its marker + right
};

struct MergeTable {
  std::vector<MergeOp> ops;
  std::size_t size() const { return ops.size(); }
};

struct UnitSequence {
  std::string utt_id;
  std::vector<int> units;  // indices into an inventory; never the blank
};

// Splits UTF-8 text into code points (each returned as a string).
std::vector<std::string> utf8_chars(std::string_view text);

// Character inventory of a corpus: every distinct non-space character plus
// the blank. No space symbol is included.
UnitInventory build_char_inventory(const std::vector<Transcript>& corpus);

// Learns `n_ops` merges by repeatedly joining the most frequent within-word
// adjacent unit pair. Words start as marker-decorated characters (all but the
// last character of a word carry '@'). Stops early once no pair occurs twice.
// Ties break on lexicographic (left, right).
MergeTable learn_bpe(const std::vector<Transcript>& corpus, std::size_t n_ops);

// Inventory for a merge table: observed decorated/plain character forms of
// the corpus (the base), plus one unit per merge, plus the blank.
UnitInventory build_bpe_inventory(const std::vector<Transcript>& corpus,
                                  const MergeTable& merges);

// Segments one word into subword pieces by applying the merges in order.
// Every piece except the last carries the trailing marker.
std::vector<std::string> segment_word(const std::string& word, const MergeTable& merges);

// Whitespace-tokenizes `text` and encodes each word against `inv`. For
// character-level inventories spaces are dropped and characters map 1:1.
UnitSequence encode_units(const std::string& text, const UnitInventory& inv,
                          const MergeTable* merges);

// Subword encoding per the marker convention; `inv` must be BPE-built.
UnitSequence encode_subwords(const std::string& text, const MergeTable& merges,
                             const UnitInventory& inv);

// Inverse of encoding: strips markers, concatenates pieces, and inserts a
// space after every unit lacking the marker. Character-level inventories
// concatenate without spaces. Total on any index sequence; blanks are skipped.
std::string decode_units(const UnitSequence& seq, const UnitInventory& inv);

// --- file formats ---
// Inventory file: one unit per line, line 0 is the literal "<blank>".
// Merge table: "left<SPACE>right" per line; blank lines and '#' comments
// are ignored. Transcripts: "utt_id<TAB>text", one per line.
void write_inventory(const std::string& path, const UnitInventory& inv);
UnitInventory read_inventory(const std::string& path);
void write_merge_table(const std::string& path, const MergeTable& merges);
MergeTable read_merge_table(const std::string& path);
void write_transcripts(const std::string& path, const std::vector<Transcript>& corpus);
std::vector<Transcript> read_transcripts(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);

}  // namespace hctc::units
