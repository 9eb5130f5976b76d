#include "finslerlab/model_file.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace finsler {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing `; comment` or `# comment` outside quotes, then quotes.
std::string unquote(const std::string& s) {
  bool quoted = false;
  std::size_t end = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (!quoted && (s[i] == ';' || s[i] == '#')) {
      end = i;
      break;
    }
  }
  std::string t = trim(std::string_view(s).substr(0, end));
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
  return t;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    throw ModelFileError(name_ + ": [" + where + "] " + msg);
  }

  const pt::ptree* section(const std::string& s) const {
    const auto it = tree_.find(s);
    return it == tree_.not_found() ? nullptr : &it->second;
  }

  const pt::ptree& require_section(const std::string& s) const {
    const pt::ptree* p = section(s);
    if (!p) fail(s, "section is missing");
    return *p;
  }

  std::optional<std::string> get(const pt::ptree& sec, const std::string& key) const {
    const auto it = sec.find(key);
    if (it == sec.not_found()) return std::nullopt;
    return unquote(it->second.data());
  }

  std::string require(const pt::ptree& sec, const std::string& where, const std::string& key) const {
    auto v = get(sec, key);
    if (!v) fail(where, "missing key '" + key + "'");
    return *v;
  }

  int require_int(const pt::ptree& sec, const std::string& where, const std::string& key) const {
    const std::string s = require(sec, where, key);
    int out = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) fail(where, "'" + key + "' must be an integer");
    return out;
  }

  void read_params() {
    const pt::ptree* p = section("params");
    if (!p) return;
    for (const auto& [key, node] : *p) {
      const Expression e = parse(unquote(node.data()), ParseOptions{}, "params", key);
      if (!e.free_symbols().empty()) fail("params", "'" + key + "' must be a constant");
      params_[key] = evaluate(e, {});
    }
  }

  Expression parse(const std::string& text, ParseOptions opts, const std::string& where,
                   const std::string& key) const {
    for (const auto& [name, value] : params_) opts.parameters.push_back(name);
    Expression e;
    try {
      e = parse_expression(text, opts);
    } catch (const ParseError& err) {
      fail(where, "'" + key + "': " + err.what());
    }
    std::map<Symbol, Expression> repl;
    for (const auto& [name, value] : params_) repl.emplace(Symbol::parameter(name), Expression::constant(value));
    return repl.empty() ? e : substitute(e, repl);
  }

  FinslerModel read_norm(const pt::ptree& sec, const std::string& where, int dim, const ChartBox& box) {
    const std::string kind = require(sec, where, "kind");
    const ParseOptions chart{dim, 0, 0, {}};
    auto idx = [](int i, int j) { return std::to_string(i + 1) + std::to_string(j + 1); };
    if (dim > 9 && kind != "minkowski" && kind != "raw") fail(where, "indexed keys support dim <= 9");
    if (kind == "riemannian" || kind == "randers") {
      const std::string prefix = kind == "riemannian" ? "g" : "a";
      ExprMatrix m(static_cast<std::size_t>(dim), std::vector<Expression>(static_cast<std::size_t>(dim)));
      for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
          if (auto v = get(sec, prefix + idx(i, j))) {
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = parse(*v, chart, where, prefix + idx(i, j));
          } else if (get(sec, prefix + idx(j, i))) {
            fail(where, "give the upper-triangle key " + prefix + idx(i, j) + " instead of " + prefix + idx(j, i));
          }
        }
      }
      if (kind == "riemannian") return FinslerModel::riemannian(std::move(m), box);
      std::vector<Expression> beta(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) {
        const std::string key = "b" + std::to_string(i + 1);
        if (auto v = get(sec, key)) beta[static_cast<std::size_t>(i)] = parse(*v, chart, where, key);
      }
      return FinslerModel::randers(std::move(m), std::move(beta), box);
    }
    if (kind == "minkowski" || kind == "raw") {
      const auto f = get(sec, "F");
      const auto f2 = get(sec, "F2");
      if (f.has_value() == f2.has_value()) fail(where, "give exactly one of F, F2");
      const Expression e = parse(f ? *f : *f2, chart, where, f ? "F" : "F2");
      return kind == "minkowski" ? FinslerModel::minkowski(dim, e, box, f2.has_value())
                                 : FinslerModel::raw(dim, e, box, f2.has_value());
    }
    if (kind == "product") {
      if (where != "norm") fail(where, "nested products are not supported");
      const int flat = get(sec, "flat_dim") ? require_int(sec, where, "flat_dim") : 0;
      const int count = require_int(sec, where, "factors");
      if (flat < 0 || count < 1) fail(where, "need flat_dim >= 0 and factors >= 1");
      std::vector<FinslerModel> factors;
      int offset = flat;
      for (int k = 1; k <= count; ++k) {
        const std::string fname = "factor" + std::to_string(k);
        const pt::ptree& fsec = require_section(fname);
        const int fdim = require_int(fsec, fname, "dim");
        if (fdim < 1 || offset + fdim > dim) fail(fname, "factor dimensions exceed the chart dimension");
        const ChartBox fbox(box.begin() + offset, box.begin() + offset + fdim);
        factors.push_back(read_norm(fsec, fname, fdim, fbox));
        offset += fdim;
      }
      if (offset != dim) fail(where, "flat_dim plus factor dimensions must equal the chart dimension");
      const auto g = get(sec, "G");
      const auto g2 = get(sec, "G2");
      if (g.has_value() == g2.has_value()) fail(where, "give exactly one of G, G2");
      const ParseOptions slots{0, flat, count, {}};
      const Expression ge = parse(g ? *g : *g2, slots, where, g ? "G" : "G2");
      return make_product_norm(ge, flat, std::move(factors), ChartBox(box.begin(), box.begin() + flat),
                               g2.has_value());
    }
    fail(where, "unknown norm kind '" + kind + "'");
  }

  ModelFile read(std::uint64_t hash) {
    read_params();
    const pt::ptree& chart = require_section("chart");
    const int dim = require_int(chart, "chart", "dim");
    if (dim < 1) fail("chart", "dim must be >= 1");
    ChartBox box;
    try {
      box = parse_box(require(chart, "chart", "box"));
    } catch (const ModelFileError& e) {
      fail("chart", e.what());
    }
    if (static_cast<int>(box.size()) != dim) fail("chart", "box has " + std::to_string(box.size()) + " intervals");
    FinslerModel model = read_norm(require_section("norm"), "norm", dim, box);
    if (const pt::ptree* m = section("measure")) {
      const auto psi = get(*m, "psi");
      const auto rho = get(*m, "density");
      if (psi && rho) fail("measure", "give at most one of psi, density");
      const ParseOptions chart_opts{dim, 0, 0, {}};
      if (psi) model = model.with_weight(parse(*psi, chart_opts, "measure", "psi"));
      if (rho) model = model.with_density(parse(*rho, chart_opts, "measure", "density"));
    }
    return ModelFile{name_, std::move(model), params_, hash};
  }

 private:
  const pt::ptree& tree_;
  std::string name_;
  std::map<std::string, double> params_;
};

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ChartBox parse_box(std::string_view text) {
  ChartBox box;
  std::size_t pos = 0;
  auto fail = [&](const std::string& m) -> void { throw ModelFileError("box: " + m + " near offset " + std::to_string(pos)); };
  auto number = [&](std::string_view s) {
    const std::string t = trim(s);
    double v = 0.0;
    const Expression e = [&] {
      try {
        return parse_expression(t, 0);
      } catch (const ParseError&) {
        fail("bad bound '" + t + "'");
      }
      return Expression();
    }();
    if (!e.free_symbols().empty()) fail("bound '" + t + "' is not constant");
    v = evaluate(e, {});
    return v;
  };
  while (true) {
    const auto open = text.find('[', pos);
    if (open == std::string_view::npos) break;
    if (!trim(text.substr(pos, open - pos)).empty() && trim(text.substr(pos, open - pos)) != "x") fail("expected 'x'");
    const auto close = text.find(']', open);
    if (close == std::string_view::npos) fail("unclosed '['");
    const std::string_view inner = text.substr(open + 1, close - open - 1);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) fail("interval needs 'lo, hi'");
    const Interval iv{number(inner.substr(0, comma)), number(inner.substr(comma + 1))};
    if (!(iv.lo < iv.hi)) fail("empty interval");
    box.push_back(iv);
    pos = close + 1;
  }
  if (!trim(text.substr(pos)).empty() || box.empty()) fail("expected intervals like [a, b] x [c, d]");
  return box;
}

ModelFile parse_model(std::string_view text, const std::string& name) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ModelFileError(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Reader reader(tree, name);
  try {
    return reader.read(fnv1a(text));
  } catch (const GeometryError& e) {
    throw ModelFileError(name + ": " + e.what());
  } catch (const EvalError& e) {
    throw ModelFileError(name + ": " + e.what());
  }
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path.stem().string());
}

}  // namespace finsler
