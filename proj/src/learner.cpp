#include "kibam/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kibam/format.hpp"
#include "kibam/rng.hpp"
#include "kibam/validator.hpp"

namespace kibam {

std::size_t feature_arity(std::size_t batteries, ActiveEncoding encoding) {
  return encoding == ActiveEncoding::OneHot ? 3 * batteries + 1 : 2 * batteries + 2;
}

void TrainingSet::add(std::span<const double> features, int label) {
  if (features.size() != arity())
    throw ArityMismatch("row has " + std::to_string(features.size()) + " features, expected " +
                        std::to_string(arity()));
  if (label < 1 || label > static_cast<int>(batteries_)) throw InvalidArgument("label out of range");
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

TrainingSet TrainingSet::subset(std::span<const std::size_t> rows) const {
  TrainingSet out(batteries_, encoding_);
  out.features_.reserve(rows.size() * arity());
  out.labels_.reserve(rows.size());
  for (auto r : rows) {
    out.features_.insert(out.features_.end(), row(r), row(r) + arity());
    out.labels_.push_back(labels_[r]);
  }
  return out;
}

void TrainingSet::append(const TrainingSet& other) {
  if (other.batteries_ != batteries_ || other.encoding_ != encoding_)
    throw ArityMismatch("cannot append rows with a different feature layout");
  features_.insert(features_.end(), other.features_.begin(), other.features_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
}

std::vector<std::string> feature_names(std::size_t batteries, ActiveEncoding encoding) {
  std::vector<std::string> names;
  for (std::size_t b = 1; b <= batteries; ++b) {
    names.push_back("b" + std::to_string(b) + "sigma");
    names.push_back("b" + std::to_string(b) + "gamma");
  }
  if (encoding == ActiveEncoding::OneHot) {
    for (std::size_t b = 1; b <= batteries; ++b) names.push_back("b" + std::to_string(b) + "active");
  } else {
    names.push_back("active");
  }
  names.push_back("load");
  return names;
}

std::string TrainingSet::to_csv() const {
  std::string out;
  for (const auto& name : feature_names(batteries_, encoding_)) out += name + ",";
  out += "label\n";
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t f = 0; f < arity(); ++f) out += format_decimal(at(i, f)) + ",";
    out += std::to_string(labels_[i]) + "\n";
  }
  return out;
}

TrainingSet extract_training(const std::vector<PlanInstance>& instances, const std::vector<BatteryParams>& batteries,
                             double increment, ActiveEncoding encoding) {
  if (!(increment > 0.0)) throw InvalidArgument("increment must be positive");
  TrainingSet data(batteries.size(), encoding);
  const double eps = LoadProfile::kBoundaryEps;
  std::vector<double> row(data.arity());
  for (std::size_t p = 0; p < instances.size(); ++p) {
    const auto& [plan, profile] = instances[p];
    ValidationReport report;
    try {
      report = validate(plan, profile, batteries);
    } catch (const MalformedPlan& e) {
      throw InvalidPlan("plan " + std::to_string(p + 1) + ": " + e.what());
    }
    if (!report.valid)
      throw InvalidPlan("plan " + std::to_string(p + 1) + " does not validate: " +
                        to_string(report.violations.front().kind) + " at " +
                        format_decimal(report.violations.front().time));
    std::vector<BatteryState> states;
    for (const auto& b : batteries) states.push_back(BatteryState::fresh(b));
    double t_state = 0.0;
    std::size_t step = 0;
    int previous = 0;
    const double end = plan.end();
    for (std::size_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * increment;
      if (t >= end - eps) break;
      while (t_state < t - eps) {
        while (plan.steps[step].end() <= t_state + eps) ++step;
        const auto span = profile.span_at(t_state);
        const double seg_end = std::min({span.end, plan.steps[step].end(), t});
        for (std::size_t b = 0; b < states.size(); ++b)
          states[b] = evolve(states[b], batteries[b],
                             static_cast<int>(b) == plan.steps[step].battery ? span.current : 0.0, seg_end - t_state);
        t_state = seg_end;
      }
      while (plan.steps[step].end() <= t + eps) ++step;
      const double load = profile.current_at(t);
      if (load <= 0.0) continue;
      const int battery = plan.steps[step].battery;
      if (battery < 0) throw InvalidPlan("plan " + std::to_string(p + 1) + " waits under load");
      const std::size_t n = states.size();
      for (std::size_t b = 0; b < n; ++b) {
        row[2 * b] = available_charge(states[b], batteries[b]);
        row[2 * b + 1] = states[b].gamma;
      }
      if (encoding == ActiveEncoding::OneHot) {
        for (std::size_t b = 0; b < n; ++b) row[2 * n + b] = static_cast<int>(b) + 1 == previous ? 1.0 : 0.0;
        row[3 * n] = load;
      } else {
        row[2 * n] = previous;
        row[2 * n + 1] = load;
      }
      data.add(row, battery + 1);
      previous = battery + 1;
    }
  }
  return data;
}

DecisionTree::DecisionTree(std::size_t batteries, std::vector<Node> nodes, ActiveEncoding encoding)
    : batteries_(batteries), encoding_(encoding), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidArgument("a tree needs at least one node");
  const auto arity = static_cast<int>(feature_arity(batteries_, encoding_));
  const auto count = static_cast<int>(nodes_.size());
  for (const auto& n : nodes_) {
    if (n.feature >= arity) throw InvalidArgument("tree node tests a feature beyond the arity");
    if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
      throw InvalidArgument("tree node has a dangling child");
  }
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.feature < 0) {
      best = std::max(best, d);
    } else {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

int DecisionTree::predict(std::span<const double> features) const {
  if (features.size() != arity())
    throw ArityMismatch("expected " + std::to_string(arity()) + " features, got " + std::to_string(features.size()));
  const Node* n = &nodes_.front();
  while (n->feature >= 0) {
    const int next = features[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right;
    n = &nodes_[static_cast<std::size_t>(next)];
  }
  return n->label;
}

std::string DecisionTree::render() const {
  const auto names = feature_names(batteries_, encoding_);
  std::string out = "// batteries=" + std::to_string(batteries_) + "\n";
  if (encoding_ == ActiveEncoding::OneHot) out += "// active=onehot\n";
  auto emit = [&](auto&& self, int id, int indent) -> void {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (n.feature < 0) {
      out += pad + "return " + std::to_string(n.label) + ";\n";
      return;
    }
    const auto& name = names[static_cast<std::size_t>(n.feature)];
    const auto thr = format_decimal(n.threshold);
    out += pad + "if (" + name + "<=" + thr + ") {\n";
    self(self, n.left, indent + 1);
    out += pad + "}\n";
    out += pad + "if (" + name + ">" + thr + ") {\n";
    self(self, n.right, indent + 1);
    out += pad + "}\n";
  };
  emit(emit, 0, 0);
  return out;
}

namespace {

int feature_index(std::string_view name, std::size_t batteries, ActiveEncoding encoding) {
  const bool one_hot = encoding == ActiveEncoding::OneHot;
  if (name == "active" && !one_hot) return static_cast<int>(2 * batteries);
  if (name == "load") return static_cast<int>(feature_arity(batteries, encoding) - 1);
  if (name.size() > 1 && name.front() == 'b') {
    std::size_t i = 1;
    std::size_t k = 0;
    while (i < name.size() && name[i] >= '0' && name[i] <= '9') k = k * 10 + static_cast<std::size_t>(name[i++] - '0');
    const auto suffix = name.substr(i);
    if (i > 1 && k >= 1 && k <= batteries) {
      // y1 is the available well, the same quantity as sigma.
      if (suffix == "sigma" || suffix == "y1") return static_cast<int>(2 * (k - 1));
      if (suffix == "gamma") return static_cast<int>(2 * (k - 1) + 1);
      if (suffix == "active" && one_hot) return static_cast<int>(2 * batteries + k - 1);
    }
  }
  throw ParseError("unknown tree feature '" + std::string(name) + "'");
}

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) {
    std::size_t no = 0;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      auto line = trim(text.substr(0, nl));
      text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
      ++no;
      if (line.empty()) continue;
      if (line.rfind("//", 0) == 0) {
        auto body = trim(line.substr(2));
        if (body.rfind("batteries=", 0) == 0) {
          const double n = parse_decimal(body.substr(10));
          if (n < 1 || n != std::floor(n)) throw ParseError("bad battery count in tree header");
          batteries_ = static_cast<std::size_t>(n);
        } else if (body == "active=onehot") {
          if (!lines_.empty()) throw ParseError("tree line " + std::to_string(no) + ": encoding after the first node");
          encoding_ = ActiveEncoding::OneHot;
        }
        continue;
      }
      if (line == "...") continue;
      lines_.push_back({line, no});
    }
    if (batteries_ == 0) throw ParseError("tree text lacks the '// batteries=N' header");
  }

  DecisionTree run() {
    node(0);
    if (pos_ != lines_.size()) fail("trailing text after the tree");
    return DecisionTree(batteries_, std::move(nodes_), encoding_);
  }

 private:
  struct Line {
    std::string_view text;
    std::size_t no;
  };

  [[noreturn]] void fail(const std::string& msg) const {
    const auto no = pos_ < lines_.size() ? lines_[pos_].no : (lines_.empty() ? 0 : lines_.back().no);
    throw ParseError("tree line " + std::to_string(no) + ": " + msg);
  }

  std::string_view next() {
    if (pos_ >= lines_.size()) fail("unexpected end of tree");
    return lines_[pos_++].text;
  }

  // Parses "if (NAME<op>THR) {" and returns (feature, threshold text).
  std::pair<int, std::string_view> condition(std::string_view line, std::string_view op) {
    if (line.rfind("if (", 0) != 0 || line.size() < 7 || line.substr(line.size() - 3) != ") {")
      fail("expected 'if (<feature>" + std::string(op) + "<threshold>) {'");
    const auto body = line.substr(4, line.size() - 7);
    const auto at = body.find(op);
    if (at == std::string_view::npos || (op == ">" && body.find("<=") != std::string_view::npos))
      fail("expected comparison '" + std::string(op) + "'");
    return {feature_index(trim(body.substr(0, at)), batteries_, encoding_), trim(body.substr(at + op.size()))};
  }

  int node(int depth) {
    if (depth > 100000) fail("tree nesting too deep");
    const auto id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const auto line = next();
    if (line.rfind("return ", 0) == 0) {
      if (line.back() != ';') fail("missing ';' after return");
      const double v = parse_decimal(line.substr(7, line.size() - 8));
      if (v < 1 || v > static_cast<double>(batteries_) || v != std::floor(v)) fail("return value is not a battery");
      nodes_[static_cast<std::size_t>(id)].label = static_cast<int>(v);
      return id;
    }
    const auto [feature, thr_text] = condition(line, "<=");
    const double thr = parse_decimal(thr_text);
    const int left = node(depth + 1);
    if (next() != "}") fail("expected '}'");
    const auto [feature2, thr_text2] = condition(next(), ">");
    if (feature2 != feature || parse_decimal(thr_text2) != thr) fail("'>' branch does not mirror the '<=' branch");
    const int right = node(depth + 1);
    if (next() != "}") fail("expected '}'");
    auto& n = nodes_[static_cast<std::size_t>(id)];
    n.feature = feature;
    n.threshold = thr;
    n.left = left;
    n.right = right;
    return id;
  }

  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  std::size_t batteries_ = 0;
  ActiveEncoding encoding_ = ActiveEncoding::Index;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace

DecisionTree DecisionTree::parse(std::string_view text) { return TreeParser(text).run(); }

DecisionTree DecisionTree::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tree file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void DecisionTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write tree file " + path.string());
  out << render();
}

namespace {

double entropy(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

// Upper confidence bound on the error count of a leaf (confidence 0.25).
double added_errors(double n, double e) {
  constexpr double cf = 0.25;
  constexpr double z = 0.6744897501960817;  // standard normal quantile at 0.75
  if (e < 1.0) {
    const double base = n * (1.0 - std::pow(cf, 1.0 / n));
    if (e == 0.0) return base;
    return base + e * (added_errors(n, 1.0) - base);
  }
  if (e + 0.5 >= n) return std::max(n - e, 0.0);
  const double f = (e + 0.5) / n;
  const double r =
      (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
  return r * n - e;
}

class Builder {
 public:
  Builder(const TrainingSet& data, const TreeConfig& config)
      : data_(data), config_(config), classes_(data.batteries()), goes_left_(data.size()) {}

  DecisionTree run() {
    const std::size_t features = data_.arity();
    std::vector<std::vector<std::uint32_t>> sorted(features);
    for (std::size_t f = 0; f < features; ++f) {
      auto& idx = sorted[f];
      idx.resize(data_.size());
      std::iota(idx.begin(), idx.end(), 0U);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return data_.at(a, f) < data_.at(b, f); });
    }
    build(sorted, 0);
    if (config_.prune) prune(0);
    return DecisionTree(data_.batteries(), compact(), data_.encoding());
  }

 private:
  struct Stats {
    double n = 0;
    double errors = 0;
  };

  int build(std::vector<std::vector<std::uint32_t>>& sorted, std::size_t depth) {
    const auto id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    stats_.emplace_back();
    const auto& rows = sorted.front();
    const std::size_t m = rows.size();
    std::vector<std::size_t> counts(classes_ + 1, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(data_.label(r))];
    std::size_t majority = 1;
    for (std::size_t c = 2; c <= classes_; ++c)
      if (counts[c] > counts[majority]) majority = c;
    nodes_[static_cast<std::size_t>(id)].label = static_cast<int>(majority);
    stats_[static_cast<std::size_t>(id)] = {static_cast<double>(m), static_cast<double>(m - counts[majority])};
    if (counts[majority] == m || m < 2 * config_.min_leaf || depth >= config_.max_depth) return id;

    const double parent_h = entropy(counts, m);
    struct Candidate {
      double gain = 0.0;
      double ratio = 0.0;
      double threshold = 0.0;
      bool valid = false;
    };
    std::vector<Candidate> best(sorted.size());
    std::vector<std::size_t> left(classes_ + 1);
    std::vector<std::size_t> right(classes_ + 1);
    const std::size_t min_leaf = std::max<std::size_t>(config_.min_leaf, 1);
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const auto& idx = sorted[f];
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto lab = static_cast<std::size_t>(data_.label(idx[i]));
        ++left[lab];
        --right[lab];
        const double a = data_.at(idx[i], f);
        const double b = data_.at(idx[i + 1], f);
        const std::size_t nl = i + 1;
        const std::size_t nr = m - nl;
        if (!(a < b) || nl < min_leaf || nr < min_leaf) continue;
        const double wl = static_cast<double>(nl) / static_cast<double>(m);
        const double wr = 1.0 - wl;
        const double gain = parent_h - wl * entropy(left, nl) - wr * entropy(right, nr);
        if (!best[f].valid || gain > best[f].gain + 1e-12) {
          const double split_info = -(wl * std::log2(wl) + wr * std::log2(wr));
          double mid = 0.5 * (a + b);
          if (!(mid < b)) mid = a;
          best[f] = {gain, split_info > 0.0 ? gain / split_info : 0.0, mid, true};
        }
      }
    }
    double gain_sum = 0.0;
    std::size_t positive = 0;
    for (const auto& c : best)
      if (c.valid && c.gain > 1e-12) {
        gain_sum += c.gain;
        ++positive;
      }
    if (positive == 0) return id;
    const double average = gain_sum / static_cast<double>(positive);
    int chosen = -1;
    for (std::size_t f = 0; f < best.size(); ++f) {
      const auto& c = best[f];
      if (!c.valid || c.gain <= 1e-12) continue;
      if (config_.use_gain_ratio) {
        if (c.gain < average - 1e-12) continue;
        if (chosen < 0 || c.ratio > best[static_cast<std::size_t>(chosen)].ratio + 1e-12) chosen = static_cast<int>(f);
      } else if (chosen < 0 || c.gain > best[static_cast<std::size_t>(chosen)].gain + 1e-12) {
        chosen = static_cast<int>(f);
      }
    }
    const auto f = static_cast<std::size_t>(chosen);
    const double thr = best[f].threshold;
    for (auto r : rows) goes_left_[r] = data_.at(r, f) <= thr;

    std::vector<std::vector<std::uint32_t>> lhs(sorted.size());
    std::vector<std::vector<std::uint32_t>> rhs(sorted.size());
    for (std::size_t g = 0; g < sorted.size(); ++g) {
      for (auto r : sorted[g]) (goes_left_[r] ? lhs[g] : rhs[g]).push_back(r);
      std::vector<std::uint32_t>().swap(sorted[g]);
    }
    const int l = build(lhs, depth + 1);
    lhs.clear();
    const int r = build(rhs, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = chosen;
    node.threshold = thr;
    node.left = l;
    node.right = r;
    return id;
  }

  // Returns the estimated error count of the (possibly pruned) subtree.
  double prune(int id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    const auto& st = stats_[static_cast<std::size_t>(id)];
    const double as_leaf = st.errors + added_errors(st.n, st.errors);
    if (node.feature < 0) return as_leaf;
    const double subtree = prune(node.left) + prune(node.right);
    if (as_leaf <= subtree + 0.1) {
      nodes_[static_cast<std::size_t>(id)].feature = -1;
      return as_leaf;
    }
    return subtree;
  }

  std::vector<DecisionTree::Node> compact() const {
    std::vector<DecisionTree::Node> out;
    auto copy = [&](auto&& self, int id) -> int {
      const auto& n = nodes_[static_cast<std::size_t>(id)];
      const auto at = static_cast<int>(out.size());
      out.push_back(n);
      if (n.feature < 0) {
        out.back().left = out.back().right = -1;
        out.back().threshold = 0.0;
        return at;
      }
      const int l = self(self, n.left);
      const int r = self(self, n.right);
      out[static_cast<std::size_t>(at)].left = l;
      out[static_cast<std::size_t>(at)].right = r;
      return at;
    };
    copy(copy, 0);
    return out;
  }

  const TrainingSet& data_;
  const TreeConfig& config_;
  std::size_t classes_;
  std::vector<char> goes_left_;
  std::vector<DecisionTree::Node> nodes_;
  std::vector<Stats> stats_;
};

}  // namespace

DecisionTree train(const TrainingSet& data, const TreeConfig& config) {
  if (data.empty()) throw EmptyDataset("cannot train on an empty dataset");
  return Builder(data, config).run();
}

double accuracy(const DecisionTree& tree, const TrainingSet& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (tree.predict({data.row(i), data.arity()}) == data.label(i)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double cross_validate(const TrainingSet& data, std::size_t k, const TreeConfig& config, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("cross-validation needs k >= 2");
  if (data.size() < k)
    throw TooFewRows("cross-validation with k=" + std::to_string(k) + " needs at least " + std::to_string(k) +
                     " rows, got " + std::to_string(data.size()));
  SplitMix64 rng(seed);
  std::vector<std::size_t> fold(data.size());
  std::size_t next = 0;
  for (std::size_t c = 1; c <= data.batteries(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.label(i) == static_cast<int>(c)) members.push_back(i);
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.next_u64() % i]);
    for (auto i : members) fold[i] = next++ % k;
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
    if (test_rows.empty() || train_rows.empty()) continue;
    const auto tree = train(data.subset(train_rows), config);
    sum += accuracy(tree, data.subset(test_rows));
    ++used;
  }
  return sum / static_cast<double>(used);
}

std::vector<double> features_of(const Observation& obs, ActiveEncoding encoding) {
  std::vector<double> x;
  x.reserve(feature_arity(obs.size(), encoding));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    x.push_back(obs.sigma[b]);
    x.push_back(obs.gamma[b]);
  }
  if (encoding == ActiveEncoding::OneHot) {
    for (std::size_t b = 0; b < obs.size(); ++b) x.push_back(static_cast<int>(b) == obs.active ? 1.0 : 0.0);
  } else {
    x.push_back(static_cast<double>(obs.active + 1));
  }
  x.push_back(obs.load);
  return x;
}

EpsilonFn default_epsilon(const std::vector<BatteryParams>& batteries, double delta) {
  std::vector<double> c;
  for (const auto& b : batteries) c.push_back(b.c);
  return [c, delta](const Observation& obs, int battery) {
    return obs.load * delta / c.at(static_cast<std::size_t>(battery));
  };
}

PlanBasedPolicy::PlanBasedPolicy(DecisionTree tree, EpsilonFn epsilon)
    : tree_(std::move(tree)), epsilon_(std::move(epsilon)) {}

Decision PlanBasedPolicy::decide(const Observation& obs) const {
  if (obs.size() != tree_.batteries())
    throw ArityMismatch("policy trained for " + std::to_string(tree_.batteries()) + " batteries, observed " +
                        std::to_string(obs.size()));
  const int b = tree_.predict(features_of(obs, tree_.encoding())) - 1;
  if (b < 0 || b >= static_cast<int>(obs.size()) || obs.sigma[static_cast<std::size_t>(b)] < epsilon_(obs, b))
    return {decide_builtin(BuiltinKind::Vmax, obs), true};
  return {b, false};
}

}  // namespace kibam
