#include "policyforge/corpus.hpp"

#include <algorithm>
#include <functional>
#include <unordered_set>

#include "policyforge/fileio.hpp"

namespace policyforge::corpus {

using nlohmann::json;

namespace {

constexpr const char* kChildKeys[] = {"colleges", "departments"};

const char* child_key(NodeLevel level) {
  return level == NodeLevel::Department ? nullptr : kChildKeys[static_cast<int>(level)];
}

std::string pointer_join(const std::string& base, std::string_view token) {
  return base + "/" + std::string(token);
}

[[noreturn]] void fail(const std::string& where, const std::string& node_id,
                       const std::string& what) {
  std::string msg = "malformed corpus at " + (where.empty() ? std::string("/") : where);
  if (!node_id.empty()) msg += " (node '" + node_id + "')";
  msg += ": " + what;
  throw MalformedCorpus(msg);
}

const json& require(const json& obj, const char* key, const std::string& where,
                    const std::string& node_id) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, node_id, std::string("missing required field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where,
                           const std::string& node_id) {
  const json& v = require(obj, key, where, node_id);
  if (!v.is_string()) fail(pointer_join(where, key), node_id, "expected a string");
  return v.get<std::string>();
}

Timestamp require_timestamp(const json& obj, const char* key, const std::string& where,
                            const std::string& node_id) {
  const std::string raw = require_string(obj, key, where, node_id);
  auto ts = Timestamp::parse(raw);
  if (!ts) fail(pointer_join(where, key), node_id, "bad timestamp '" + raw + "'");
  return *ts;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

OrgNode parse_node(const json& j, NodeLevel level, const std::string& where,
                   std::unordered_set<std::string>& seen_ids) {
  if (!j.is_object()) fail(where, "", "expected an object");
  OrgNode node;
  node.level = level;
  node.id = require_string(j, "_id", where, "");
  if (node.id.empty()) fail(pointer_join(where, "_id"), "", "empty id");
  if (!seen_ids.insert(node.id).second) fail(pointer_join(where, "_id"), node.id, "duplicate id");
  node.name = require_string(j, "name", where, node.id);
  node.url = require_string(j, "url", where, node.id);
  node.last_update = require_timestamp(j, "last_update", where, node.id);

  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "_id" || key == "name" || key == "url" || key == "last_update") continue;
    if (key == "policy") {
      node.has_policy_key = true;
      const std::string pw = pointer_join(where, "policy");
      if (!it->is_array()) fail(pw, node.id, "expected an array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        const json& p = (*it)[i];
        const std::string ppw = pointer_join(pw, std::to_string(i));
        if (!p.is_object()) fail(ppw, node.id, "expected an object");
        PolicyText text;
        text.timestamp = require_timestamp(p, "timestamp", ppw, node.id);
        text.text = require_string(p, "text", ppw, node.id);
        if (is_blank(text.text)) fail(pointer_join(ppw, "text"), node.id, "empty policy text");
        node.policies.push_back(std::move(text));
      }
      continue;
    }
    const char* ck = child_key(level);
    if (ck && key == ck) {
      node.has_children_key = true;
      const std::string cw = pointer_join(where, key);
      if (!it->is_array()) fail(cw, node.id, "expected an array");
      const auto child_level = static_cast<NodeLevel>(static_cast<int>(level) + 1);
      for (std::size_t i = 0; i < it->size(); ++i) {
        node.children.push_back(
            parse_node((*it)[i], child_level, pointer_join(cw, std::to_string(i)), seen_ids));
      }
      continue;
    }
    if (key == "colleges" || key == "departments") {
      fail(pointer_join(where, key), node.id, "nesting deeper than institution/college/department");
    }
    node.extra[key] = *it;
  }
  std::stable_sort(node.policies.begin(), node.policies.end(),
                   [](const PolicyText& a, const PolicyText& b) { return a.timestamp < b.timestamp; });
  return node;
}

json node_to_json(const OrgNode& node) {
  json j = node.extra;
  j["_id"] = node.id;
  j["name"] = node.name;
  j["url"] = node.url;
  j["last_update"] = node.last_update.str();
  if (node.has_policy_key || !node.policies.empty()) {
    json arr = json::array();
    for (const auto& p : node.policies) arr.push_back({{"timestamp", p.timestamp.str()}, {"text", p.text}});
    j["policy"] = std::move(arr);
  }
  if (const char* ck = child_key(node.level); ck && (node.has_children_key || !node.children.empty())) {
    json arr = json::array();
    for (const auto& c : node.children) arr.push_back(node_to_json(c));
    j[ck] = std::move(arr);
  }
  return j;
}

void visit(const OrgNode& node, const std::function<void(const OrgNode&)>& fn) {
  fn(node);
  for (const auto& c : node.children) visit(c, fn);
}

OrgNode* find_mut(std::vector<OrgNode>& nodes, std::string_view id) {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
    if (auto* hit = find_mut(n.children, id)) return hit;
  }
  return nullptr;
}

std::size_t whitespace_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : s) {
    const bool space = std::isspace(c);
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

bool has_alnum(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c >= 0x80; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_bullet(std::string_view line) {
  line = trim(line);
  if (line.empty()) return false;
  if ((line[0] == '-' || line[0] == '*') && (line.size() == 1 || line[1] == ' ' || line[1] == '\t')) {
    return true;
  }
  if (line.starts_with("\xE2\x80\xA2")) return true;  // U+2022 bullet
  // "Option N:" header
  if (line.starts_with("Option")) {
    std::size_t i = 6;
    std::size_t spaces = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i, ++spaces;
    std::size_t digits = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i, ++digits;
    while (i < line.size() && line[i] == ' ') ++i;
    return spaces > 0 && digits > 0 && i < line.size() && line[i] == ':';
  }
  return false;
}

std::vector<std::string> split_paragraph(const std::vector<std::string_view>& lines,
                                         std::size_t min_tokens) {
  std::vector<std::string> fragments;
  for (auto line : lines) {
    const auto t = trim(line);
    if (fragments.empty() || starts_bullet(t)) {
      fragments.emplace_back(t);
    } else {
      fragments.back() += '\n';
      fragments.back() += t;
    }
  }
  if (fragments.size() <= 1) return fragments;

  std::vector<std::string> merged;
  std::string carry;  // short leading fragments waiting for a successor
  for (auto& frag : fragments) {
    if (!carry.empty()) {
      frag = carry + '\n' + frag;
      carry.clear();
    }
    if (whitespace_tokens(frag) >= min_tokens) {
      merged.push_back(std::move(frag));
    } else if (!merged.empty()) {
      merged.back() += '\n';
      merged.back() += frag;
    } else {
      carry = std::move(frag);
    }
  }
  if (!carry.empty()) merged.push_back(std::move(carry));
  return merged;
}

}  // namespace

const OrgNode* PolicyCorpus::find(std::string_view node_id) const {
  const OrgNode* hit = nullptr;
  for (const auto& inst : institutions) {
    visit(inst, [&](const OrgNode& n) {
      if (!hit && n.id == node_id) hit = &n;
    });
  }
  return hit;
}

std::size_t PolicyCorpus::node_count() const {
  std::size_t n = 0;
  for (const auto& inst : institutions) visit(inst, [&](const OrgNode&) { ++n; });
  return n;
}

PolicyCorpus parse_corpus(const json& doc) {
  if (!doc.is_object()) fail("", "", "document root must be an object");
  PolicyCorpus corpus;
  std::unordered_set<std::string> seen;
  bool have_institutions = false;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "institutions") {
      have_institutions = true;
      if (!it->is_array()) fail("/institutions", "", "expected an array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        corpus.institutions.push_back(
            parse_node((*it)[i], NodeLevel::Institution, "/institutions/" + std::to_string(i), seen));
      }
    } else if (it.key() == "version") {
      if (!it->is_string()) fail("/version", "", "expected a string");
      corpus.version = it->get<std::string>();
    } else {
      corpus.extra[it.key()] = *it;
    }
  }
  if (!have_institutions) fail("", "", "missing required field 'institutions'");
  corpus.segments = flatten_segments(corpus, false);
  return corpus;
}

PolicyCorpus load_corpus(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedCorpus("malformed corpus " + path.string() + ": " + e.what());
  }
  return parse_corpus(doc);
}

json to_json(const PolicyCorpus& corpus) {
  json j = corpus.extra;
  json arr = json::array();
  for (const auto& inst : corpus.institutions) arr.push_back(node_to_json(inst));
  j["institutions"] = std::move(arr);
  if (!corpus.version.empty()) j["version"] = corpus.version;
  return j;
}

std::string canonical_dump(const json& doc) { return doc.dump(2) + "\n"; }

void save_corpus(const PolicyCorpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, canonical_dump(to_json(corpus)));
}

std::vector<std::string> segment_text(std::string_view text, const SegmentOptions& options) {
  std::vector<std::string> out;
  std::vector<std::string_view> paragraph;
  auto flush = [&] {
    if (paragraph.empty()) return;
    for (auto& seg : split_paragraph(paragraph, options.min_tokens)) {
      if (has_alnum(seg)) out.push_back(std::move(seg));
    }
    paragraph.clear();
  };
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    if (is_blank(line)) {
      flush();
    } else {
      paragraph.push_back(line);
    }
    pos = end + 1;
  }
  flush();
  return out;
}

std::vector<PolicySegment> flatten_segments(const PolicyCorpus& corpus, bool include_history) {
  std::vector<PolicySegment> out;
  auto emit = [&](const OrgNode& node, const PolicyText& policy) {
    const auto parts = segment_text(policy.text);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      PolicySegment seg;
      seg.source_node_id = node.id;
      seg.source_timestamp = policy.timestamp;
      seg.ordinal = static_cast<int>(i);
      seg.segment_id = node.id + "@" + policy.timestamp.compact() + "#" + std::to_string(i);
      seg.text = parts[i];
      out.push_back(std::move(seg));
    }
  };
  for (const auto& inst : corpus.institutions) {
    visit(inst, [&](const OrgNode& node) {
      if (include_history) {
        for (const auto& p : node.policies) emit(node, p);
      } else if (const auto* cur = node.current_policy()) {
        emit(node, *cur);
      }
    });
  }
  return out;
}

PolicyCorpus upsert_policy(const PolicyCorpus& corpus, std::string_view node_id, PolicyText policy) {
  if (is_blank(policy.text)) throw MalformedCorpus("empty policy text for node '" + std::string(node_id) + "'");
  PolicyCorpus next = corpus;
  OrgNode* node = find_mut(next.institutions, node_id);
  if (!node) throw UnknownNode("unknown node '" + std::string(node_id) + "'");
  auto pos = std::upper_bound(node->policies.begin(), node->policies.end(), policy.timestamp,
                              [](const Timestamp& t, const PolicyText& p) { return t < p.timestamp; });
  if (policy.timestamp > node->last_update) node->last_update = policy.timestamp;
  node->policies.insert(pos, std::move(policy));
  node->has_policy_key = true;
  next.segments = flatten_segments(next, false);
  return next;
}

PolicyCorpus FileCorpusStore::load() const { return load_corpus(path_); }

std::filesystem::path FileCorpusStore::change_log_path() const {
  auto p = path_;
  p += ".changes.jsonl";
  return p;
}

PolicyCorpus FileCorpusStore::upsert(std::string_view node_id, PolicyText policy) {
  FileLock lock(path_);
  const PolicyCorpus current = load_corpus(path_);
  json change = {{"op", "upsert_policy"},
                 {"node_id", node_id},
                 {"timestamp", policy.timestamp.str()},
                 {"text", policy.text},
                 {"recorded_at", Timestamp::now().str()}};
  PolicyCorpus next = upsert_policy(current, node_id, std::move(policy));
  append_line(change_log_path(), change.dump());
  save_corpus(next, path_);
  return next;
}

PolicyCorpus refresh(CorpusStore& store, PolicyFetcher& fetcher) {
  PolicyCorpus corpus = store.load();
  std::vector<FetchedPolicy> found;
  for (const auto& inst : corpus.institutions) {
    visit(inst, [&](const OrgNode& node) {
      auto got = fetcher.fetch(node);
      found.insert(found.end(), got.begin(), got.end());
    });
  }
  for (auto& f : found) corpus = store.upsert(f.node_id, std::move(f.policy));
  return corpus;
}

}  // namespace policyforge::corpus
