#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace poprec {

// One observed positive event. User/item are dense indices into the
// id tables of the owning Dataset; timestamps are seconds since epoch.
struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// An event as it appears in an input file, before indexing.
struct RawInteraction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

struct Dataset {
  std::vector<Interaction> interactions;  // sorted by timestamp, stable
  std::vector<std::string> user_ids;      // dense index -> external id
  std::vector<std::string> item_ids;

  std::size_t n_users() const { return user_ids.size(); }
  std::size_t n_items() const { return item_ids.size(); }
};

// Chronological partition of a dataset into equal-width time stages.
struct StagedDataset {
  std::vector<std::vector<Interaction>> stages;
  std::vector<double> boundaries;  // n_stages()+1 values; stage t covers [b[t], b[t+1])
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  std::size_t n_stages() const { return stages.size(); }
  std::size_t n_users() const { return user_ids.size(); }
  std::size_t n_items() const { return item_ids.size(); }
  std::size_t total_events() const;
};

// Raw held-out events of one user (duplicates kept; deduplication happens
// only when building metric ground truth).
struct UserHoldout {
  std::int32_t user = 0;
  std::vector<Interaction> events;
};

struct HoldoutGroup {
  std::vector<UserHoldout> users;  // sorted by user index

  std::size_t n_users() const { return users.size(); }
  std::size_t n_events() const;
};

// Train/validation/test split. The last stage of the input becomes the
// holdout; user and item indices are re-assigned over the entities that
// appear in the training stages, so every index below n_users()/n_items()
// is trainable. Holdout events referencing unseen entities are kept
// verbatim (external ids) in `excluded`.
struct EvalSplit {
  StagedDataset train;  // stages 1..T-1 of the input, re-indexed
  HoldoutGroup validation;
  HoldoutGroup test;
  std::vector<RawInteraction> excluded;

  std::size_t n_users() const { return train.n_users(); }
  std::size_t n_items() const { return train.n_items(); }
};

// Builds the dense-index Dataset from raw events: stable sort by
// timestamp, ids assigned in order of first appearance.
Dataset make_dataset(std::vector<RawInteraction> raw);

// Reads delimited text, one "user<delim>item<delim>timestamp" per line.
// Throws std::runtime_error with the offending line number on malformed
// input, and on an empty file.
Dataset load_interactions(const std::string& path, char delimiter = '\t');
Dataset parse_interactions(std::istream& in, char delimiter, const std::string& origin);

// Iteratively removes users and items with fewer than k interactions until
// fixpoint (joint user/item pass per round), then re-indexes densely.
Dataset kcore_filter(const Dataset& d, int k);

// Partitions [min_ts, max_ts + 1) into `stages` equal-width intervals.
// All-equal timestamps degenerate to every event in stage 1.
StagedDataset split_stages(const Dataset& d, int stages);

// Carves the last stage into per-user validation/test holdouts.
// valid_frac of the surviving holdout users (seeded shuffle) become the
// validation group; events whose user or item never occurs in the
// training stages are moved to `excluded`.
EvalSplit make_eval_split(const StagedDataset& s, double valid_frac, std::uint64_t seed);

// Per-user deduplicated, sorted ground-truth item sets of a holdout group.
std::vector<std::vector<std::int32_t>> ground_truth_items(const HoldoutGroup& g);

// Binary cache of a prepared split (versioned, byte-stable for a given
// split) and a human-readable JSON summary with per-stage counts.
void save_split(const EvalSplit& split, std::ostream& out);
void save_split_file(const EvalSplit& split, const std::string& path);
EvalSplit load_split(std::istream& in);
EvalSplit load_split_file(const std::string& path);
std::string split_summary_json(const EvalSplit& split);

}  // namespace poprec
