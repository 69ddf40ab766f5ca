#include "audit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "audit/textproc.hpp"
#include "json.hpp"

namespace audit {

using nlohmann::json;

std::string to_string(Frame f) {
  return f == Frame::episodic ? "episodic" : "thematic";
}

std::string to_string(Sensitivity s) {
  return s == Sensitivity::sensitive ? "sensitive" : "baseline";
}

Frame frame_from_string(const std::string& s) {
  if (s == "episodic") return Frame::episodic;
  if (s == "thematic") return Frame::thematic;
  throw CorpusError("invalid frame value: '" + s + "'");
}

Sensitivity sensitivity_from_string(const std::string& s) {
  if (s == "sensitive") return Sensitivity::sensitive;
  if (s == "baseline") return Sensitivity::baseline;
  throw CorpusError("invalid sensitivity value: '" + s + "'");
}

static void check_topic(const Topic& t) {
  if (t.id.empty()) throw CorpusError("topic with empty id");
  if (t.text.empty()) throw CorpusError("topic '" + t.id + "' has empty text");
  if (t.sensitivity == Sensitivity::baseline) {
    if (t.group != kBaselineGroup) {
      throw CorpusError("baseline topic '" + t.id + "' must have group=baseline");
    }
  } else {
    if (t.group < 1 || t.group > 12) {
      throw CorpusError("sensitive topic '" + t.id + "' has group " +
                        std::to_string(t.group) + ", expected 1..12");
    }
  }
  if (t.censored_article_count && *t.censored_article_count < 0) {
    throw CorpusError("topic '" + t.id + "' has negative censored_article_count");
  }
}

Corpus::Corpus(std::vector<Topic> topics) : topics_(std::move(topics)) {
  std::unordered_set<std::string> seen;
  for (const auto& t : topics_) {
    check_topic(t);
    if (!seen.insert(t.id).second) {
      throw CorpusError("duplicate topic id: '" + t.id + "'");
    }
  }
}

const Topic* Corpus::find(const std::string& id) const {
  for (const auto& t : topics_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::uint64_t Corpus::content_hash() const {
  std::string joined;
  for (const auto& t : topics_) {
    joined += t.id;
    joined += '\x1f';
    joined += t.text;
    joined += '\x1f';
    joined += to_string(t.frame);
    joined += '\x1f';
    joined += std::to_string(t.group);
    joined += '\x1f';
    joined += to_string(t.sensitivity);
    joined += '\n';
  }
  return fnv1a64(joined);
}

// --- CSV ---------------------------------------------------------------

namespace {

// Minimal RFC 4180 row parser. Returns fields; supports quoted fields with
// doubled-quote escapes. Rows never span lines in our files.
std::vector<std::string> parse_csv_row(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else {
      if (c == '"' && cur.empty()) {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    ++i;
  }
  if (in_quotes) {
    throw CorpusError("line " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(cur);
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

int parse_group(const std::string& s, int line_no) {
  if (s == "baseline") return kBaselineGroup;
  try {
    std::size_t pos = 0;
    int g = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return g;
  } catch (const std::exception&) {
    throw CorpusError("line " + std::to_string(line_no) + ": invalid group '" + s + "'");
  }
}

const std::vector<std::string> kCsvHeader = {"id",    "text",        "frame",
                                             "group", "sensitivity", "censored_article_count"};

Topic topic_from_fields(const std::vector<std::string>& f, int line_no) {
  if (f.size() != kCsvHeader.size()) {
    throw CorpusError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(kCsvHeader.size()) + " fields, got " +
                      std::to_string(f.size()));
  }
  Topic t;
  t.id = f[0];
  t.text = f[1];
  try {
    t.frame = frame_from_string(f[2]);
    t.sensitivity = sensitivity_from_string(f[4]);
  } catch (const CorpusError& e) {
    throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
  }
  t.group = parse_group(f[3], line_no);
  if (!f[5].empty()) {
    try {
      t.censored_article_count = std::stol(f[5]);
    } catch (const std::exception&) {
      throw CorpusError("line " + std::to_string(line_no) +
                        ": invalid censored_article_count '" + f[5] + "'");
    }
  }
  return t;
}

Corpus load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path.string());
  std::string line;
  int line_no = 0;
  std::vector<Topic> topics;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    auto fields = parse_csv_row(line, line_no);
    if (line_no == 1) {
      if (fields != kCsvHeader) {
        throw CorpusError("line 1: unexpected header");
      }
      continue;
    }
    topics.push_back(topic_from_fields(fields, line_no));
  }
  return Corpus(std::move(topics));
}

Topic topic_from_json(const json& j, std::size_t record_no) {
  try {
    Topic t;
    t.id = j.at("id").get<std::string>();
    t.text = j.at("text").get<std::string>();
    t.frame = frame_from_string(j.at("frame").get<std::string>());
    t.sensitivity = sensitivity_from_string(j.at("sensitivity").get<std::string>());
    const auto& g = j.at("group");
    t.group = g.is_string() ? parse_group(g.get<std::string>(), 0) : g.get<int>();
    if (j.contains("censored_article_count") && !j["censored_article_count"].is_null()) {
      t.censored_article_count = j["censored_article_count"].get<long>();
    }
    return t;
  } catch (const json::exception& e) {
    throw CorpusError("record " + std::to_string(record_no) + ": " + e.what());
  } catch (const CorpusError& e) {
    throw CorpusError("record " + std::to_string(record_no) + ": " + e.what());
  }
}

Corpus load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CorpusError("json parse error in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw CorpusError("corpus json must be an array of topics");
  std::vector<Topic> topics;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    topics.push_back(topic_from_json(doc[i], i));
  }
  return Corpus(std::move(topics));
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  return format == CorpusFormat::csv ? load_csv(path) : load_json(path);
}

void export_corpus(const Corpus& corpus, const std::filesystem::path& path,
                   CorpusFormat format) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file: " + path.string());
  if (format == CorpusFormat::csv) {
    out << "id,text,frame,group,sensitivity,censored_article_count\n";
    for (const auto& t : corpus.topics()) {
      out << csv_escape(t.id) << ',' << csv_escape(t.text) << ','
          << to_string(t.frame) << ','
          << (t.group == kBaselineGroup ? std::string("baseline")
                                        : std::to_string(t.group))
          << ',' << to_string(t.sensitivity) << ','
          << (t.censored_article_count ? std::to_string(*t.censored_article_count)
                                       : std::string())
          << '\n';
    }
  } else {
    json arr = json::array();
    for (const auto& t : corpus.topics()) {
      json j = {{"id", t.id},
                {"text", t.text},
                {"frame", to_string(t.frame)},
                {"sensitivity", to_string(t.sensitivity)}};
      if (t.group == kBaselineGroup) j["group"] = "baseline";
      else j["group"] = t.group;
      if (t.censored_article_count) j["censored_article_count"] = *t.censored_article_count;
      arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
  }
}

// --- prompts -----------------------------------------------------------

static constexpr std::string_view kPlaceholder = "[topic]";

static std::size_t count_placeholders(const std::string& tmpl) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while ((pos = tmpl.find(kPlaceholder, pos)) != std::string::npos) {
    ++n;
    pos += kPlaceholder.size();
  }
  return n;
}

void validate_templates(const PromptTemplateSet& templates) {
  if (count_placeholders(templates.sensitive_template) != 1) {
    throw CorpusError("sensitive_template must contain exactly one [topic] placeholder");
  }
  if (count_placeholders(templates.baseline_template) != 1) {
    throw CorpusError("baseline_template must contain exactly one [topic] placeholder");
  }
}

std::string render_prompt(const Topic& topic, const PromptTemplateSet& templates) {
  const std::string& tmpl = topic.sensitivity == Sensitivity::sensitive
                                ? templates.sensitive_template
                                : templates.baseline_template;
  std::size_t pos = tmpl.find(kPlaceholder);
  std::string out = tmpl;
  out.replace(pos, kPlaceholder.size(), topic.text);
  return out;
}

// --- manifest ----------------------------------------------------------

static std::string cell_key(const ManifestCell& c) {
  std::string group = c.group == kBaselineGroup ? std::string("baseline")
                                                : std::to_string(c.group);
  return to_string(c.sensitivity) + "/" + to_string(c.frame) + "/" + group;
}

CorpusManifest CorpusManifest::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open manifest file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CorpusError("manifest parse error: " + std::string(e.what()));
  }
  CorpusManifest m;
  for (auto& [key, value] : doc.items()) {
    std::istringstream ss(key);
    std::string sens, frame, group;
    if (!std::getline(ss, sens, '/') || !std::getline(ss, frame, '/') ||
        !std::getline(ss, group, '/')) {
      throw CorpusError("manifest key '" + key + "' is not sensitivity/frame/group");
    }
    ManifestCell cell{sensitivity_from_string(sens), frame_from_string(frame),
                      parse_group(group, 0)};
    long count = value.get<long>();
    if (count < 0) throw CorpusError("manifest cell '" + key + "' has negative count");
    m.expected_counts[cell] = count;
  }
  return m;
}

void CorpusManifest::save(const std::filesystem::path& path) const {
  json doc = json::object();
  for (const auto& [cell, count] : expected_counts) {
    doc[cell_key(cell)] = count;
  }
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write manifest file: " + path.string());
  out << doc.dump(2) << '\n';
}

ValidationReport validate_corpus(const Corpus& corpus, const CorpusManifest& manifest) {
  std::map<ManifestCell, long> observed;
  for (const auto& t : corpus.topics()) {
    observed[ManifestCell{t.sensitivity, t.frame, t.group}]++;
  }
  ValidationReport report;
  report.overall_pass = true;
  std::map<ManifestCell, long> all = manifest.expected_counts;
  for (const auto& [cell, n] : observed) {
    all.try_emplace(cell, 0);  // unexpected cells fail against an implied 0
  }
  for (const auto& [cell, expected] : all) {
    long exp = 0;
    if (auto it = manifest.expected_counts.find(cell); it != manifest.expected_counts.end()) {
      exp = it->second;
    }
    long obs = 0;
    if (auto it = observed.find(cell); it != observed.end()) obs = it->second;
    CellResult r{cell, exp, obs, exp == obs};
    if (!r.pass) report.overall_pass = false;
    report.cells.push_back(r);
  }
  return report;
}

long ValidationReport::failing_cells() const {
  return std::count_if(cells.begin(), cells.end(),
                       [](const CellResult& c) { return !c.pass; });
}

}  // namespace audit
