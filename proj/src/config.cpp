#include "hypelift/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "hypelift/util.hpp"

namespace hypelift {

namespace pt = boost::property_tree;

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

// Reads typed values from one section and remembers which keys were used.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!tree_) return;
    const auto node = tree_->get_child_optional(key);
    if (!node) return;
    const std::string raw = node->data();
    try {
      out = convert<T>(raw);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + raw + "' for " + where(key));
    }
  }

  void allow(const std::string& key) { used_.insert(key); }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!child.empty()) continue;  // sub-sections of the root are checked on their own
      if (!used_.count(key)) throw ConfigError("unknown config key " + where(key));
    }
  }

 private:
  template <class T>
  static T convert(const std::string& raw) {
    if constexpr (std::is_same_v<T, bool>) {
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw ConfigError("not a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return raw;
    } else if constexpr (std::is_same_v<T, double>) {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw ConfigError("trailing characters");
      return v;
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      std::size_t used = 0;
      if (!raw.empty() && raw[0] == '-') throw ConfigError("negative");
      const auto v = std::stoull(raw, &used);
      if (used != raw.size()) throw ConfigError("trailing characters");
      return v;
    } else {
      std::size_t used = 0;
      const long long v = std::stoll(raw, &used);
      if (used != raw.size()) throw ConfigError("trailing characters");
      if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) throw ConfigError("range");
      return static_cast<T>(v);
    }
  }

  std::string where(const std::string& key) const { return name_.empty() ? "'" + key + "'" : "'" + name_ + "." + key + "'"; }

  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace

void PipelineConfig::validate() const {
  if (scene.feature_dim < 2) throw ConfigError("scene.feature_dim must be at least 2");
  if (scene.views < 1) throw ConfigError("scene.views must be at least 1");
  if (scene.view_height > scene.height || scene.view_width > scene.width) {
    throw ConfigError("views must fit inside the world");
  }
  if (!(scene.noise_sigma >= 0.0)) throw ConfigError("scene.noise_sigma must be non-negative");
  if (!(scene.part_dropout >= 0.0 && scene.part_dropout <= 1.0)) throw ConfigError("scene.part_dropout must be in [0, 1]");
  if (ae_dims.size() < 2) throw ConfigError("autoencoder.dims needs at least an input and a latent size");
  if (ae_dims.front() != scene.feature_dim) throw ConfigError("autoencoder.dims must start at scene.feature_dim");
  for (int d : ae_dims) {
    if (d < 1) throw ConfigError("autoencoder.dims must be positive");
  }
  hierarchy.validate();
  geometry.validate();
  autoencoder.validate();
  field.validate();
  query.validate();
  if (scene.tree != "builtin") {
    const auto p = base_dir / scene.tree;
    if (!std::filesystem::exists(p)) throw ConfigError("tree file '" + p.string() + "' does not exist");
  }
}

synth::ConceptTree load_tree(const std::filesystem::path& path, int feature_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read tree file '" + path.string() + "'");
  synth::ConceptTree tree;
  tree.feature_dim = feature_dim;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& n : j.at("nodes")) {
      tree.nodes.push_back({n.at("id").get<int>(), n.at("label").get<std::string>(), n.value("parent", synth::kRoot)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad tree file '" + path.string() + "': " + e.what());
  }
  tree.validate();
  return tree;
}

synth::ConceptTree PipelineConfig::concept_tree() const {
  if (scene.tree == "builtin") return synth::ConceptTree::two_objects_three_parts(scene.feature_dim);
  return load_tree(base_dir / scene.tree, scene.feature_dim);
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  static const std::set<std::string> known{"scene", "hierarchy", "geometry", "autoencoder", "field", "query", "eval"};
  for (const auto& [key, child] : root) {
    if (!child.empty() && !known.count(key)) throw ConfigError("unknown config section [" + key + "]");
  }
  const auto section = [&](const std::string& name) {
    const auto child = root.get_child_optional(name);
    return Section(child ? &*child : nullptr, name);
  };

  PipelineConfig c;
  c.base_dir = base_dir;
  Section top(&root, "");
  std::string output = c.output.string();
  top.read("seed", c.seed);
  top.read("output", output);
  c.output = output;
  for (const auto& name : known) top.allow(name);
  top.check_unknown();

  auto s = section("scene");
  s.read("tree", c.scene.tree);
  s.read("feature_dim", c.scene.feature_dim);
  s.read("height", c.scene.height);
  s.read("width", c.scene.width);
  s.read("views", c.scene.views);
  s.read("view_height", c.scene.view_height);
  s.read("view_width", c.scene.view_width);
  s.read("noise_sigma", c.scene.noise_sigma);
  s.read("part_dropout", c.scene.part_dropout);
  s.check_unknown();

  auto h = section("hierarchy");
  h.read("tolerance", c.hierarchy.tolerance);
  h.read("min_area", c.hierarchy.min_area);
  h.check_unknown();

  auto g = section("geometry");
  double curvature = c.geometry.curvature.value();
  g.read("curvature", curvature);
  if (!(curvature > 0.0)) throw ConfigError("geometry.curvature must be positive");
  c.geometry.curvature = geo::Curvature(curvature);
  g.read("boundary_radius", c.geometry.boundary_radius);
  g.read("arccos_clamp_eps", c.geometry.arccos_clamp_eps);
  g.read("entailment_aperture", c.geometry.entailment_aperture);
  g.check_unknown();

  auto a = section("autoencoder");
  std::string dims = join_ints(c.ae_dims);
  a.read("dims", dims);
  c.ae_dims.clear();
  for (const auto& d : split(dims, ',')) {
    try {
      std::size_t used = 0;
      c.ae_dims.push_back(std::stoi(d, &used));
      if (used != d.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + dims + "' for 'autoencoder.dims'");
    }
  }
  a.read("epochs", c.autoencoder.epochs);
  a.read("peak_lr", c.autoencoder.peak_lr);
  a.read("initial_div", c.autoencoder.initial_div);
  a.read("final_div", c.autoencoder.final_div);
  a.read("warmup_fraction", c.autoencoder.warmup_fraction);
  a.read("weight_decay", c.autoencoder.weight_decay);
  a.read("temperature", c.autoencoder.temperature);
  a.read("batch_images", c.autoencoder.batch_images);
  a.read("weight_distance", c.autoencoder.weights.distance);
  a.read("weight_angle", c.autoencoder.weights.angle);
  a.read("weight_reconstruction", c.autoencoder.weights.reconstruction);
  a.check_unknown();

  auto f = section("field");
  std::string supervision = field::to_string(c.supervision);
  f.read("supervision", supervision);
  c.supervision = field::supervision_from_string(supervision);
  f.read("steps", c.field.steps);
  f.read("batch_size", c.field.batch_size);
  f.read("lr", c.field.lr);
  f.read("lambda", c.field.lambda);
  f.read("squared", c.field.squared);
  f.check_unknown();

  auto q = section("query");
  std::string aggregation = query::to_string(c.query.aggregation);
  std::string negatives = query::to_string(c.query.negatives);
  std::string threshold_mode = query::to_string(c.query.threshold_mode);
  std::string neutrals = join_strings(c.query.neutral_labels);
  q.read("steps", c.query.steps);
  q.read("aggregation", aggregation);
  q.read("negatives", negatives);
  q.read("threshold", c.query.threshold);
  q.read("threshold_mode", threshold_mode);
  q.read("t_max", c.query.t_max);
  q.read("neutrals", neutrals);
  c.query.aggregation = query::aggregation_from_string(aggregation);
  c.query.negatives = query::negative_mode_from_string(negatives);
  c.query.threshold_mode = query::threshold_mode_from_string(threshold_mode);
  c.query.neutral_labels.clear();
  for (auto& n : split(neutrals, ',')) {
    if (!n.empty()) c.query.neutral_labels.push_back(n);
  }
  q.check_unknown();

  auto e = section("eval");
  e.read("oracle_levels", c.oracle_levels);
  e.check_unknown();

  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string to_text(const PipelineConfig& c) {
  std::ostringstream out;
  const auto d = [](double v) { return format_double(v); };
  out << "seed = " << c.seed << "\n";
  out << "output = " << c.output.string() << "\n";
  out << "\n[scene]\n";
  out << "tree = " << c.scene.tree << "\n";
  out << "feature_dim = " << c.scene.feature_dim << "\n";
  out << "height = " << c.scene.height << "\n";
  out << "width = " << c.scene.width << "\n";
  out << "views = " << c.scene.views << "\n";
  out << "view_height = " << c.scene.view_height << "\n";
  out << "view_width = " << c.scene.view_width << "\n";
  out << "noise_sigma = " << d(c.scene.noise_sigma) << "\n";
  out << "part_dropout = " << d(c.scene.part_dropout) << "\n";
  out << "\n[hierarchy]\n";
  out << "tolerance = " << d(c.hierarchy.tolerance) << "\n";
  out << "min_area = " << c.hierarchy.min_area << "\n";
  out << "\n[geometry]\n";
  out << "curvature = " << d(c.geometry.curvature.value()) << "\n";
  out << "boundary_radius = " << d(c.geometry.boundary_radius) << "\n";
  out << "arccos_clamp_eps = " << d(c.geometry.arccos_clamp_eps) << "\n";
  out << "entailment_aperture = " << d(c.geometry.entailment_aperture) << "\n";
  out << "\n[autoencoder]\n";
  out << "dims = " << join_ints(c.ae_dims) << "\n";
  out << "epochs = " << c.autoencoder.epochs << "\n";
  out << "peak_lr = " << d(c.autoencoder.peak_lr) << "\n";
  out << "initial_div = " << d(c.autoencoder.initial_div) << "\n";
  out << "final_div = " << d(c.autoencoder.final_div) << "\n";
  out << "warmup_fraction = " << d(c.autoencoder.warmup_fraction) << "\n";
  out << "weight_decay = " << d(c.autoencoder.weight_decay) << "\n";
  out << "temperature = " << d(c.autoencoder.temperature) << "\n";
  out << "batch_images = " << c.autoencoder.batch_images << "\n";
  out << "weight_distance = " << d(c.autoencoder.weights.distance) << "\n";
  out << "weight_angle = " << d(c.autoencoder.weights.angle) << "\n";
  out << "weight_reconstruction = " << d(c.autoencoder.weights.reconstruction) << "\n";
  out << "\n[field]\n";
  out << "supervision = " << field::to_string(c.supervision) << "\n";
  out << "steps = " << c.field.steps << "\n";
  out << "batch_size = " << c.field.batch_size << "\n";
  out << "lr = " << d(c.field.lr) << "\n";
  out << "lambda = " << d(c.field.lambda) << "\n";
  out << "squared = " << (c.field.squared ? "true" : "false") << "\n";
  out << "\n[query]\n";
  out << "steps = " << c.query.steps << "\n";
  out << "aggregation = " << query::to_string(c.query.aggregation) << "\n";
  out << "negatives = " << query::to_string(c.query.negatives) << "\n";
  out << "threshold = " << d(c.query.threshold) << "\n";
  out << "threshold_mode = " << query::to_string(c.query.threshold_mode) << "\n";
  out << "t_max = " << d(c.query.t_max) << "\n";
  out << "neutrals = " << join_strings(c.query.neutral_labels) << "\n";
  out << "\n[eval]\n";
  out << "oracle_levels = " << (c.oracle_levels ? "true" : "false") << "\n";
  return out.str();
}

bool same_config(const PipelineConfig& a, const PipelineConfig& b) { return to_text(a) == to_text(b); }

}  // namespace hypelift
