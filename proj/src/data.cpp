#include "poprec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "poprec/rng.hpp"

namespace poprec {

std::size_t StagedDataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.size();
  return n;
}

std::size_t HoldoutGroup::n_events() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.events.size();
  return n;
}

Dataset make_dataset(std::vector<RawInteraction> raw) {
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawInteraction& a, const RawInteraction& b) {
                     return a.timestamp < b.timestamp;
                   });
  Dataset d;
  d.interactions.reserve(raw.size());
  std::unordered_map<std::string, std::int32_t> umap, imap;
  for (const auto& r : raw) {
    auto [uit, unew] = umap.try_emplace(r.user, static_cast<std::int32_t>(d.user_ids.size()));
    if (unew) d.user_ids.push_back(r.user);
    auto [iit, inew] = imap.try_emplace(r.item, static_cast<std::int32_t>(d.item_ids.size()));
    if (inew) d.item_ids.push_back(r.item);
    d.interactions.push_back({uit->second, iit->second, r.timestamp});
  }
  return d;
}

namespace {

[[noreturn]] void parse_fail(const std::string& origin, std::size_t line_no, const std::string& what) {
  std::ostringstream msg;
  msg << origin << ": parse error at line " << line_no << ": " << what;
  throw std::runtime_error(msg.str());
}

}  // namespace

Dataset parse_interactions(std::istream& in, char delimiter, const std::string& origin) {
  std::vector<RawInteraction> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::size_t p1 = line.find(delimiter);
    if (p1 == std::string::npos) parse_fail(origin, line_no, "expected 3 fields");
    std::size_t p2 = line.find(delimiter, p1 + 1);
    if (p2 == std::string::npos) parse_fail(origin, line_no, "expected 3 fields, got 2");
    if (line.find(delimiter, p2 + 1) != std::string::npos)
      parse_fail(origin, line_no, "expected 3 fields, got more");

    RawInteraction r;
    r.user = line.substr(0, p1);
    r.item = line.substr(p1 + 1, p2 - p1 - 1);
    if (r.user.empty()) parse_fail(origin, line_no, "empty user id");
    if (r.item.empty()) parse_fail(origin, line_no, "empty item id");

    const char* first = line.data() + p2 + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, r.timestamp);
    if (ec != std::errc{} || ptr != last)
      parse_fail(origin, line_no, "bad timestamp '" + line.substr(p2 + 1) + "'");
    if (r.timestamp < 0) parse_fail(origin, line_no, "negative timestamp");
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw std::runtime_error(origin + ": no interactions found");
  return make_dataset(std::move(raw));
}

Dataset load_interactions(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_interactions(in, delimiter, path);
}

Dataset kcore_filter(const Dataset& d, int k) {
  if (k < 1) throw std::invalid_argument("k-core requires k >= 1");
  std::vector<Interaction> cur = d.interactions;
  std::vector<char> keep_user(d.n_users(), 1), keep_item(d.n_items(), 1);
  for (;;) {
    std::vector<std::int32_t> udeg(d.n_users(), 0), ideg(d.n_items(), 0);
    for (const auto& e : cur) {
      ++udeg[e.user];
      ++ideg[e.item];
    }
    for (std::size_t u = 0; u < d.n_users(); ++u)
      if (keep_user[u] && udeg[u] < k) keep_user[u] = 0;
    for (std::size_t i = 0; i < d.n_items(); ++i)
      if (keep_item[i] && ideg[i] < k) keep_item[i] = 0;

    std::vector<Interaction> next;
    next.reserve(cur.size());
    for (const auto& e : cur)
      if (keep_user[e.user] && keep_item[e.item]) next.push_back(e);
    if (next.size() == cur.size()) break;
    cur.swap(next);
  }
  if (cur.empty()) throw std::runtime_error("k-core filter removed every interaction");

  Dataset out;
  out.interactions.reserve(cur.size());
  std::vector<std::int32_t> umap(d.n_users(), -1), imap(d.n_items(), -1);
  for (const auto& e : cur) {
    if (umap[e.user] < 0) {
      umap[e.user] = static_cast<std::int32_t>(out.user_ids.size());
      out.user_ids.push_back(d.user_ids[e.user]);
    }
    if (imap[e.item] < 0) {
      imap[e.item] = static_cast<std::int32_t>(out.item_ids.size());
      out.item_ids.push_back(d.item_ids[e.item]);
    }
    out.interactions.push_back({umap[e.user], imap[e.item], e.timestamp});
  }
  return out;
}

StagedDataset split_stages(const Dataset& d, int stages) {
  if (stages < 1) throw std::invalid_argument("stage count must be >= 1");
  if (d.interactions.empty()) throw std::invalid_argument("cannot stage an empty dataset");

  const std::int64_t lo = d.interactions.front().timestamp;
  const std::int64_t hi = d.interactions.back().timestamp + 1;  // half-open range of ticks
  const std::int64_t span = hi - lo;

  StagedDataset s;
  s.user_ids = d.user_ids;
  s.item_ids = d.item_ids;
  s.stages.resize(static_cast<std::size_t>(stages));
  s.boundaries.resize(static_cast<std::size_t>(stages) + 1);
  for (int t = 0; t <= stages; ++t)
    s.boundaries[t] = static_cast<double>(lo) +
                      static_cast<double>(span) * static_cast<double>(t) / static_cast<double>(stages);

  for (const auto& e : d.interactions) {
    // exact integer bucketing: t <= (ts-lo)*T/span < t+1
    auto t = static_cast<std::int64_t>(
        (static_cast<unsigned __int128>(e.timestamp - lo) * static_cast<unsigned>(stages)) /
        static_cast<unsigned __int128>(span));
    if (t >= stages) t = stages - 1;
    s.stages[static_cast<std::size_t>(t)].push_back(e);
  }
  return s;
}

EvalSplit make_eval_split(const StagedDataset& s, double valid_frac, std::uint64_t seed) {
  const std::size_t T = s.n_stages();
  if (T < 2) throw std::invalid_argument("eval split needs at least 2 stages");
  if (!(valid_frac > 0.0 && valid_frac < 1.0))
    throw std::invalid_argument("valid_frac must lie in (0,1)");

  // entities seen in training stages 1..T-1
  std::vector<std::int32_t> umap(s.n_users(), -1), imap(s.n_items(), -1);
  EvalSplit split;
  split.train.stages.resize(T - 1);
  split.train.boundaries.assign(s.boundaries.begin(), s.boundaries.end() - 1);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (const auto& e : s.stages[t]) {
      if (umap[e.user] < 0) {
        umap[e.user] = static_cast<std::int32_t>(split.train.user_ids.size());
        split.train.user_ids.push_back(s.user_ids[e.user]);
      }
      if (imap[e.item] < 0) {
        imap[e.item] = static_cast<std::int32_t>(split.train.item_ids.size());
        split.train.item_ids.push_back(s.item_ids[e.item]);
      }
      split.train.stages[t].push_back({umap[e.user], imap[e.item], e.timestamp});
    }
  }

  // classify holdout events; group survivors per (new) user index
  std::vector<std::vector<Interaction>> held(split.train.n_users());
  for (const auto& e : s.stages[T - 1]) {
    if (umap[e.user] >= 0 && imap[e.item] >= 0) {
      held[umap[e.user]].push_back({umap[e.user], imap[e.item], e.timestamp});
    } else {
      split.excluded.push_back({s.user_ids[e.user], s.item_ids[e.item], e.timestamp});
    }
  }

  std::vector<std::int32_t> holdout_users;
  for (std::size_t u = 0; u < held.size(); ++u)
    if (!held[u].empty()) holdout_users.push_back(static_cast<std::int32_t>(u));
  if (holdout_users.empty())
    throw std::runtime_error("holdout stage is empty after excluding unseen users/items");

  Rng rng(seed);
  rng.shuffle(holdout_users);
  const auto n_valid = static_cast<std::size_t>(
      std::llround(valid_frac * static_cast<double>(holdout_users.size())));

  std::vector<std::int32_t> vusers(holdout_users.begin(), holdout_users.begin() + n_valid);
  std::vector<std::int32_t> tusers(holdout_users.begin() + n_valid, holdout_users.end());
  std::sort(vusers.begin(), vusers.end());
  std::sort(tusers.begin(), tusers.end());
  for (auto u : vusers) split.validation.users.push_back({u, std::move(held[u])});
  for (auto u : tusers) split.test.users.push_back({u, std::move(held[u])});
  return split;
}

std::vector<std::vector<std::int32_t>> ground_truth_items(const HoldoutGroup& g) {
  std::vector<std::vector<std::int32_t>> truth;
  truth.reserve(g.users.size());
  for (const auto& u : g.users) {
    std::vector<std::int32_t> items;
    items.reserve(u.events.size());
    for (const auto& e : u.events) items.push_back(e.item);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    truth.push_back(std::move(items));
  }
  return truth;
}

namespace {

constexpr char kSplitMagic[4] = {'P', 'S', 'P', 'L'};
constexpr std::uint32_t kSplitVersion = 1;

void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::ostream& o, std::int64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
void put_i32(std::ostream& o, std::int32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ostream& o, double v) { o.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& o, const std::string& s) {
  put_u32(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& i) { std::uint32_t v; i.read(reinterpret_cast<char*>(&v), 4); return v; }
std::uint64_t get_u64(std::istream& i) { std::uint64_t v; i.read(reinterpret_cast<char*>(&v), 8); return v; }
std::int64_t get_i64(std::istream& i) { std::int64_t v; i.read(reinterpret_cast<char*>(&v), 8); return v; }
std::int32_t get_i32(std::istream& i) { std::int32_t v; i.read(reinterpret_cast<char*>(&v), 4); return v; }
double get_f64(std::istream& i) { double v; i.read(reinterpret_cast<char*>(&v), 8); return v; }
std::string get_str(std::istream& i) {
  std::string s(get_u32(i), '\0');
  i.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}

void put_holdout(std::ostream& o, const HoldoutGroup& g) {
  put_u64(o, g.users.size());
  for (const auto& u : g.users) {
    put_i32(o, u.user);
    put_u64(o, u.events.size());
    for (const auto& e : u.events) {
      put_i32(o, e.item);
      put_i64(o, e.timestamp);
    }
  }
}

HoldoutGroup get_holdout(std::istream& in) {
  HoldoutGroup g;
  g.users.resize(get_u64(in));
  for (auto& u : g.users) {
    u.user = get_i32(in);
    u.events.resize(get_u64(in));
    for (auto& e : u.events) {
      e.user = u.user;
      e.item = get_i32(in);
      e.timestamp = get_i64(in);
    }
  }
  return g;
}

}  // namespace

void save_split(const EvalSplit& split, std::ostream& out) {
  out.write(kSplitMagic, 4);
  put_u32(out, kSplitVersion);
  put_u64(out, split.train.user_ids.size());
  for (const auto& s : split.train.user_ids) put_str(out, s);
  put_u64(out, split.train.item_ids.size());
  for (const auto& s : split.train.item_ids) put_str(out, s);

  put_u64(out, split.train.stages.size());
  for (const auto& stage : split.train.stages) {
    put_u64(out, stage.size());
    for (const auto& e : stage) {
      put_i32(out, e.user);
      put_i32(out, e.item);
      put_i64(out, e.timestamp);
    }
  }
  put_u64(out, split.train.boundaries.size());
  for (double b : split.train.boundaries) put_f64(out, b);

  put_holdout(out, split.validation);
  put_holdout(out, split.test);

  put_u64(out, split.excluded.size());
  for (const auto& e : split.excluded) {
    put_str(out, e.user);
    put_str(out, e.item);
    put_i64(out, e.timestamp);
  }
}

void save_split_file(const EvalSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_split(split, out);
}

EvalSplit load_split(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kSplitMagic))
    throw std::runtime_error("not a split cache file");
  if (get_u32(in) != kSplitVersion) throw std::runtime_error("unsupported split cache version");

  EvalSplit split;
  split.train.user_ids.resize(get_u64(in));
  for (auto& s : split.train.user_ids) s = get_str(in);
  split.train.item_ids.resize(get_u64(in));
  for (auto& s : split.train.item_ids) s = get_str(in);

  split.train.stages.resize(get_u64(in));
  for (auto& stage : split.train.stages) {
    stage.resize(get_u64(in));
    for (auto& e : stage) {
      e.user = get_i32(in);
      e.item = get_i32(in);
      e.timestamp = get_i64(in);
    }
  }
  split.train.boundaries.resize(get_u64(in));
  for (auto& b : split.train.boundaries) b = get_f64(in);

  split.validation = get_holdout(in);
  split.test = get_holdout(in);

  split.excluded.resize(get_u64(in));
  for (auto& e : split.excluded) {
    e.user = get_str(in);
    e.item = get_str(in);
    e.timestamp = get_i64(in);
  }
  if (!in) throw std::runtime_error("truncated split cache");
  return split;
}

EvalSplit load_split_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_split(in);
}

std::string split_summary_json(const EvalSplit& split) {
  nlohmann::json j;
  j["users"] = split.n_users();
  j["items"] = split.n_items();
  j["train_stages"] = split.train.n_stages();
  std::vector<std::size_t> counts;
  for (const auto& s : split.train.stages) counts.push_back(s.size());
  j["stage_counts"] = counts;
  j["boundaries"] = split.train.boundaries;
  j["validation_users"] = split.validation.n_users();
  j["validation_events"] = split.validation.n_events();
  j["test_users"] = split.test.n_users();
  j["test_events"] = split.test.n_events();
  j["excluded_events"] = split.excluded.size();
  return j.dump(2);
}

}  // namespace poprec
