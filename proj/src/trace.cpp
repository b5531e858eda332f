#include "lfd/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lfd {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& what) {
  throw Error(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& tok, const std::string& path, int line_no) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, "expected a number, got '" + tok + "'");
  }
}

int parse_int(const std::string& tok, const std::string& path, int line_no) {
  try {
    size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, line_no, "expected an integer, got '" + tok + "'");
  }
}

// State token: label[:key=value[,key=value]...]
ObjectState parse_state(const std::string& tok, const std::string& path, int line_no) {
  ObjectState st;
  auto colon = tok.find(':');
  st.label = tok.substr(0, colon);
  if (st.label.empty()) parse_fail(path, line_no, "empty state label");
  if (colon != std::string::npos) {
    for (const auto& kv : split_on(tok.substr(colon + 1), ',')) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) parse_fail(path, line_no, "bad state attribute '" + kv + "'");
      st.attrs[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1), path, line_no);
    }
  }
  return st;
}

std::string state_token(const ObjectState& st) {
  std::string tok = st.label;
  bool first = true;
  for (const auto& [k, v] : st.attrs) {
    tok += (first ? ":" : ",") + k + "=" + fmt_g17(v);
    first = false;
  }
  return tok;
}

}  // namespace

ObjectDatabase ObjectDatabase::builtin() {
  ObjectDatabase db;
  db.add({"cucumber", 500.0, 0.30, Vec3(0.30, 0.04, 0.04), {"unpeeled", "peeled"}, 1.5});
  db.add({"potato", 2000.0, 0.25, Vec3(0.09, 0.07, 0.06), {"unpeeled", "peeled"}, 2.5});
  db.add({"carrot", 2200.0, 0.15, Vec3(0.18, 0.03, 0.03), {"unpeeled", "peeled"}, 2.2});
  db.add({"peeler", 10000.0, 0.10, Vec3(0.15, 0.03, 0.02), {"tool"}, 1000.0});
  return db;
}

void ObjectDatabase::add(ObjectClassInfo info) {
  if (info.stiffness <= 0.0) throw Error("object class '" + info.name + "': stiffness must be > 0");
  if (info.peel_force_threshold <= 0.0)
    throw Error("object class '" + info.name + "': peel_force_threshold must be > 0");
  if (info.state_labels.empty())
    throw Error("object class '" + info.name + "': state labels must be non-empty");
  entries_[info.name] = std::move(info);
}

const ObjectClassInfo& ObjectDatabase::at(const std::string& cls) const {
  auto it = entries_.find(cls);
  if (it == entries_.end()) throw Error("unknown object class '" + cls + "'");
  return it->second;
}

std::vector<std::string> ObjectDatabase::peelable_classes() const {
  std::vector<std::string> out;
  for (const auto& [name, info] : entries_) {
    bool unpeeled = false, peeled = false;
    for (const auto& s : info.state_labels) {
      unpeeled |= s == "unpeeled";
      peeled |= s == "peeled";
    }
    if (unpeeled && peeled) out.push_back(name);
  }
  return out;
}

const std::string& DemonstrationTrace::class_of(int object_id) const {
  auto it = object_classes.find(object_id);
  if (it == object_classes.end())
    throw Error("object id " + std::to_string(object_id) + " not declared in trace header");
  return it->second;
}

std::vector<int> DemonstrationTrace::object_ids() const {
  std::vector<int> ids;
  for (const auto& [id, cls] : object_classes) ids.push_back(id);
  return ids;
}

void validate_trace(const DemonstrationTrace& trace, const ObjectDatabase* db) {
  if (trace.frames.size() < 2) throw Error("trace must have at least 2 frames");
  std::set<int> declared;
  for (const auto& [id, cls] : trace.object_classes) {
    declared.insert(id);
    if (db && !db->has(cls)) throw Error("unknown object class '" + cls + "' in trace header");
  }
  if (declared.empty()) throw Error("trace declares no objects");

  double prev_time = -std::numeric_limits<double>::infinity();
  int prev_index = -1;
  for (size_t fi = 0; fi < trace.frames.size(); ++fi) {
    const Frame& f = trace.frames[fi];
    if (f.index < 0 || f.index <= prev_index)
      throw Error("frame index not strictly increasing at frame " + std::to_string(fi));
    prev_index = f.index;
    if (!(f.time > prev_time)) throw Error("time not strictly increasing at frame " + std::to_string(f.index));
    prev_time = f.time;

    auto check_pos = [&](const Vec3& p, const char* what) {
      if (!p.allFinite())
        throw Error(std::string(what) + " position not finite at frame " + std::to_string(f.index));
      if (!trace.workspace.contains(p))
        throw Error(std::string(what) + " position outside workspace at frame " + std::to_string(f.index));
    };
    check_pos(f.hand, "hand");
    check_pos(f.wrist, "wrist");
    check_pos(f.hand_tip, "hand tip");

    if (f.objects.empty()) throw Error("objects list empty at frame " + std::to_string(f.index));
    std::set<int> seen;
    for (const auto& o : f.objects) {
      if (!seen.insert(o.object_id).second)
        throw Error("duplicate object id " + std::to_string(o.object_id) + " at frame " +
                    std::to_string(f.index));
      check_pos(o.centroid, "object");
      if (db) {
        const auto& info = db->at(trace.class_of(o.object_id));
        if (std::find(info.state_labels.begin(), info.state_labels.end(), o.state.label) ==
            info.state_labels.end())
          throw Error("state label '" + o.state.label + "' not admissible for class '" + info.name +
                      "' at frame " + std::to_string(f.index));
      }
    }
    if (seen != declared) throw Error("object set changed at frame " + std::to_string(f.index));
  }
}

DemonstrationTrace load_trace(const std::string& path, const ObjectDatabase* db) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file '" + path + "'");

  DemonstrationTrace trace;
  bool have_objects = false, have_workspace = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto bar = body.find('|');
    std::vector<std::string> head = split_ws(bar == std::string::npos ? body : body.substr(0, bar));

    if (!head.empty() && head[0] == "objects") {
      for (size_t i = 1; i < head.size(); ++i) {
        auto colon = head[i].find(':');
        if (colon == std::string::npos) parse_fail(path, line_no, "bad object declaration '" + head[i] + "'");
        int id = parse_int(head[i].substr(0, colon), path, line_no);
        if (!trace.object_classes.emplace(id, head[i].substr(colon + 1)).second)
          parse_fail(path, line_no, "object id " + std::to_string(id) + " declared twice");
      }
      have_objects = true;
      continue;
    }
    if (!head.empty() && head[0] == "workspace") {
      if (head.size() != 7) parse_fail(path, line_no, "workspace needs 6 numbers");
      for (int k = 0; k < 3; ++k) trace.workspace.lo[k] = parse_double(head[1 + k], path, line_no);
      for (int k = 0; k < 3; ++k) trace.workspace.hi[k] = parse_double(head[4 + k], path, line_no);
      have_workspace = true;
      continue;
    }

    if (!have_objects) parse_fail(path, line_no, "frame line before 'objects' header");
    if (head.size() != 11) parse_fail(path, line_no, "frame line needs 11 leading fields");
    Frame f;
    f.index = parse_int(head[0], path, line_no);
    f.time = parse_double(head[1], path, line_no);
    for (int k = 0; k < 3; ++k) f.hand[k] = parse_double(head[2 + k], path, line_no);
    for (int k = 0; k < 3; ++k) f.wrist[k] = parse_double(head[5 + k], path, line_no);
    for (int k = 0; k < 3; ++k) f.hand_tip[k] = parse_double(head[8 + k], path, line_no);

    if (bar == std::string::npos) parse_fail(path, line_no, "frame line has no object records");
    for (const auto& rec : split_on(body.substr(bar + 1), '|')) {
      auto fields = split_ws(rec);
      if (fields.size() != 5) parse_fail(path, line_no, "object record needs 5 fields");
      ObjectRecord o;
      o.object_id = parse_int(fields[0], path, line_no);
      for (int k = 0; k < 3; ++k) o.centroid[k] = parse_double(fields[1 + k], path, line_no);
      o.state = parse_state(fields[4], path, line_no);
      f.objects.push_back(std::move(o));
    }
    std::sort(f.objects.begin(), f.objects.end(),
              [](const ObjectRecord& a, const ObjectRecord& b) { return a.object_id < b.object_id; });
    trace.frames.push_back(std::move(f));
  }
  if (!have_workspace) throw Error(path + ": missing workspace header");
  validate_trace(trace, db);
  return trace;
}

void save_trace(const DemonstrationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  out << "# lfd-trace v1\n";
  out << "objects";
  for (const auto& [id, cls] : trace.object_classes) out << " " << id << ":" << cls;
  out << "\n";
  out << "workspace";
  for (int k = 0; k < 3; ++k) out << " " << fmt_g17(trace.workspace.lo[k]);
  for (int k = 0; k < 3; ++k) out << " " << fmt_g17(trace.workspace.hi[k]);
  out << "\n";
  for (const Frame& f : trace.frames) {
    out << f.index << " " << fmt_g17(f.time);
    for (const Vec3* p : {&f.hand, &f.wrist, &f.hand_tip})
      for (int k = 0; k < 3; ++k) out << " " << fmt_g17((*p)[k]);
    for (const auto& o : f.objects) {
      out << " | " << o.object_id;
      for (int k = 0; k < 3; ++k) out << " " << fmt_g17(o.centroid[k]);
      out << " " << state_token(o.state);
    }
    out << "\n";
  }
}

GroundTruth load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open truth file '" + path + "'");
  GroundTruth gt;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto toks = split_ws(body);
    if (toks[0] == "keypoint" && toks.size() == 4) {
      gt.keypoints.push_back({parse_int(toks[1], path, line_no), toks[2], toks[3] == "make"});
    } else if (toks[0] == "segment" && toks.size() == 4) {
      gt.segments.push_back({parse_int(toks[1], path, line_no), parse_int(toks[2], path, line_no), toks[3]});
    } else {
      parse_fail(path, line_no, "unrecognized truth record");
    }
  }
  return gt;
}

void save_truth(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write truth file '" + path + "'");
  out << "# lfd-truth v1\n";
  for (const auto& k : truth.keypoints)
    out << "keypoint " << k.frame << " " << k.feature << " " << (k.make ? "make" : "break") << "\n";
  for (const auto& s : truth.segments)
    out << "segment " << s.start << " " << s.end << " " << s.skill << "\n";
}

}  // namespace lfd
