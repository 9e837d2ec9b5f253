#include "mmvm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "mmvm/checkpoint.hpp"
#include "mmvm/error.hpp"
#include "mmvm/rng.hpp"
#include "mmvm/textio.hpp"

namespace mmvm::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string>& default_label_names() {
  static const std::vector<std::string> names{
      "Atelectasis",     "Cardiomegaly", "Consolidation",    "Edema",
      "Enlarged Cardiomediastinum", "Fracture", "Lung Lesion", "Lung Opacity",
      "No Finding",      "Pleural Effusion", "Pleural Other", "Pneumonia",
      "Pneumothorax",    "Support Devices"};
  return names;
}

// ---------------------------------------------------------------------------
// Dataset

Matrix Dataset::modality(std::size_t m) const {
  if (m > 1) throw ContractError("bimodal dataset has modalities 0 and 1, asked for " + std::to_string(m));
  const std::size_t d = m == 0 ? dim_f : dim_l;
  Matrix out(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& src = m == 0 ? samples[i].x_f : samples[i].x_l;
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<Matrix> Dataset::modalities() const { return {modality(0), modality(1)}; }

Matrix Dataset::labels() const {
  Matrix out(samples.size(), label_names.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t l = 0; l < label_names.size(); ++l) out(i, l) = samples[i].labels[l];
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out = *this;
  out.samples.clear();
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw ContractError("subset index out of range");
    out.samples.push_back(samples[i]);
  }
  return out;
}

std::vector<std::string> Dataset::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.subject_id).second) out.push_back(s.subject_id);
  }
  return out;
}

void Dataset::validate() const {
  std::set<std::tuple<std::string, std::string, std::string>> tuples;
  for (const auto& s : samples) {
    if (s.x_f.size() != dim_f || s.x_l.size() != dim_l) {
      throw ContractError("sample " + s.sample_id + " has wrong modality dimensions");
    }
    if (s.labels.size() != label_names.size()) {
      throw ContractError("sample " + s.sample_id + " has wrong label count");
    }
    for (auto l : s.labels) {
      if (l > 1) throw ContractError("sample " + s.sample_id + " has a non-binary label");
    }
    if (!tuples.emplace(s.study_id, s.frontal_ref, s.lateral_ref).second) {
      throw ContractError("duplicate tuple (" + s.study_id + ", " + s.frontal_ref + ", " +
                          s.lateral_ref + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Pairing and labels

std::vector<BimodalSample> pair_studies(const std::vector<Study>& studies) {
  std::vector<BimodalSample> out;
  for (const auto& st : studies) {
    if (st.frontal.empty() || st.lateral.empty()) continue;
    for (const auto& f : st.frontal) {
      for (const auto& l : st.lateral) {
        BimodalSample s;
        s.sample_id = st.study_id + ":" + f.ref + ":" + l.ref;
        s.subject_id = st.subject_id;
        s.study_id = st.study_id;
        s.frontal_ref = f.ref;
        s.lateral_ref = l.ref;
        s.x_f = f.values;
        s.x_l = l.values;
        s.labels = st.labels;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::uint8_t binarize_label(const std::string& cell, const std::string& context) {
  std::string v = cell;
  v.erase(0, v.find_first_not_of(" \t\r"));
  v.erase(v.find_last_not_of(" \t\r") + 1);
  if (v.empty()) return 0;
  if (v == "1" || v == "1.0") return 1;
  if (v == "0" || v == "0.0" || v == "-1" || v == "-1.0") return 0;
  throw ParseError("unrecognised label value '" + cell + "'" +
                   (context.empty() ? std::string() : " (" + context + ")"));
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticConfig::validate() const {
  auto range_ok = [](const std::array<std::size_t, 2>& r) { return r[0] <= r[1]; };
  if (n_subjects == 0) throw ContractError("n_subjects must be positive");
  if (!range_ok(studies_per_subject) || !range_ok(frontal_per_study) ||
      !range_ok(lateral_per_study)) {
    throw ContractError("synthetic ranges must satisfy min <= max");
  }
  if (studies_per_subject[1] == 0 || frontal_per_study[1] == 0 || lateral_per_study[1] == 0) {
    throw ContractError("synthetic ranges cannot produce any bimodal tuple");
  }
  if (factor_dim == 0 || label_count == 0) throw ContractError("factor_dim and label_count must be positive");
  if (!(sigma_f > 0.0) || !(sigma_l > 0.0)) throw ContractError("noise scales must be positive");
  for (double r : effective_base_rates()) {
    if (!(r > 0.0 && r < 1.0)) throw ContractError("base rates must lie in (0, 1)");
  }
  if (form == OutputForm::vector && (dim_f == 0 || dim_l == 0)) {
    throw ContractError("vector dimensions must be positive");
  }
  if (form == OutputForm::image && image_side == 0) throw ContractError("image_side must be positive");
}

std::vector<double> SyntheticConfig::effective_base_rates() const {
  if (!base_rates.empty()) {
    if (base_rates.size() != label_count) {
      throw ContractError("base_rates has " + std::to_string(base_rates.size()) +
                          " entries, label_count is " + std::to_string(label_count));
    }
    return base_rates;
  }
  std::vector<double> r(label_count);
  for (std::size_t i = 0; i < label_count; ++i) {
    const double t = label_count == 1 ? 0.5 : static_cast<double>((i * 5) % label_count) /
                                                  static_cast<double>(label_count - 1);
    r[i] = 0.1 + 0.3 * t;
  }
  return r;
}

void to_json(json& j, const SyntheticConfig& c) {
  j = json{{"n_subjects", c.n_subjects},
           {"studies_per_subject", c.studies_per_subject},
           {"frontal_per_study", c.frontal_per_study},
           {"lateral_per_study", c.lateral_per_study},
           {"factor_dim", c.factor_dim},
           {"label_count", c.label_count},
           {"base_rates", c.base_rates},
           {"label_effect", c.label_effect},
           {"sigma_f", c.sigma_f},
           {"sigma_l", c.sigma_l},
           {"nuisance_f", c.nuisance_f},
           {"nuisance_l", c.nuisance_l},
           {"signal_scale", c.signal_scale},
           {"nuisance_scale", c.nuisance_scale},
           {"form", c.form == OutputForm::vector ? "vector" : "image"},
           {"dim_f", c.dim_f},
           {"dim_l", c.dim_l},
           {"image_side", c.image_side}};
}

void from_json(const json& j, SyntheticConfig& c) {
  if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
  static const std::set<std::string> known{
      "n_subjects", "studies_per_subject", "frontal_per_study", "lateral_per_study",
      "factor_dim", "label_count", "base_rates", "label_effect", "sigma_f", "sigma_l",
      "nuisance_f", "nuisance_l", "signal_scale", "nuisance_scale", "form", "dim_f", "dim_l",
      "image_side"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown synthetic config key '" + key + "'");
  }
  c = SyntheticConfig{};
  try {
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.studies_per_subject = j.value("studies_per_subject", c.studies_per_subject);
    c.frontal_per_study = j.value("frontal_per_study", c.frontal_per_study);
    c.lateral_per_study = j.value("lateral_per_study", c.lateral_per_study);
    c.factor_dim = j.value("factor_dim", c.factor_dim);
    c.label_count = j.value("label_count", c.label_count);
    c.base_rates = j.value("base_rates", c.base_rates);
    c.label_effect = j.value("label_effect", c.label_effect);
    c.sigma_f = j.value("sigma_f", c.sigma_f);
    c.sigma_l = j.value("sigma_l", c.sigma_l);
    c.nuisance_f = j.value("nuisance_f", c.nuisance_f);
    c.nuisance_l = j.value("nuisance_l", c.nuisance_l);
    c.signal_scale = j.value("signal_scale", c.signal_scale);
    c.nuisance_scale = j.value("nuisance_scale", c.nuisance_scale);
    c.dim_f = j.value("dim_f", c.dim_f);
    c.dim_l = j.value("dim_l", c.dim_l);
    c.image_side = j.value("image_side", c.image_side);
    const std::string form = j.value("form", std::string("vector"));
    if (form == "vector") {
      c.form = OutputForm::vector;
    } else if (form == "image") {
      c.form = OutputForm::image;
    } else {
      throw ConfigError("synthetic form must be 'vector' or 'image', got '" + form + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
}

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : m.values) v = scale * dist(rng);
  return m;
}

std::size_t draw_count(Rng& rng, const std::array<std::size_t, 2>& range) {
  std::uniform_int_distribution<std::size_t> dist(range[0], range[1]);
  return dist(rng);
}

std::string make_id(char prefix, std::size_t n) {
  std::ostringstream os;
  os << prefix;
  os.width(7);
  os.fill('0');
  os << n;
  return os.str();
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                           SyntheticTruth* truth) {
  config.validate();
  const auto rates = config.effective_base_rates();
  const std::size_t k = config.factor_dim, L = config.label_count;
  const bool image = config.form == OutputForm::image;
  const std::size_t d_f = image ? config.image_side * config.image_side : config.dim_f;
  const std::size_t d_l = image ? config.image_side * config.image_side : config.dim_l;

  // Fixed maps, drawn once per seed. Factor maps are scaled by 1/sqrt(fan-in)
  // so pre-activations stay O(1) whatever the dimensions.
  Rng map_rng(derive_seed(seed, "synthetic-maps"));
  const Matrix W = random_matrix(map_rng, k, L, config.label_effect / std::sqrt(static_cast<double>(L) / 4.0));
  const Matrix A_f = random_matrix(map_rng, d_f, k, config.signal_scale / std::sqrt(static_cast<double>(k)));
  const Matrix A_l = random_matrix(map_rng, d_l, k, config.signal_scale / std::sqrt(static_cast<double>(k)));
  const Matrix B_f = random_matrix(map_rng, d_f, std::max<std::size_t>(config.nuisance_f, 1),
                                   config.nuisance_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(config.nuisance_f, 1))));
  const Matrix B_l = random_matrix(map_rng, d_l, std::max<std::size_t>(config.nuisance_l, 1),
                                   config.nuisance_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(config.nuisance_l, 1))));
  // Centre the label contribution so factors are roughly zero-mean.
  std::vector<double> w_offset(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t l = 0; l < L; ++l) w_offset[i] += W(i, l) * rates[l];

  Rng rng(derive_seed(seed, "synthetic-samples"));
  std::normal_distribution<double> normal(0.0, 1.0);

  auto render = [&](const std::vector<double>& u, const Matrix& A, const Matrix& B,
                    std::size_t nuisance, double sigma, std::size_t dim) {
    std::vector<double> v(std::max<std::size_t>(nuisance, 1), 0.0);
    if (nuisance > 0) {
      for (auto& x : v) x = normal(rng);
    }
    std::vector<double> x(dim);
    for (std::size_t r = 0; r < dim; ++r) {
      double pre = 0.0;
      for (std::size_t i = 0; i < k; ++i) pre += A(r, i) * u[i];
      if (nuisance > 0) {
        for (std::size_t i = 0; i < nuisance; ++i) pre += B(r, i) * v[i];
      }
      const double eps = normal(rng);
      if (image) {
        const double p = 1.0 / (1.0 + std::exp(-2.0 * pre)) + sigma * eps;
        const double byte = std::round(std::clamp(p, 0.0, 1.0) * 255.0);
        x[r] = byte / 255.0;
      } else {
        x[r] = std::tanh(pre) + sigma * eps;
      }
    }
    return x;
  };

  std::vector<Study> studies;
  if (truth) {
    truth->subject_ids.clear();
    truth->factors = Matrix(config.n_subjects, k);
    truth->labels = Matrix(config.n_subjects, L);
  }
  std::size_t study_counter = 0, image_counter = 0;
  for (std::size_t s = 0; s < config.n_subjects; ++s) {
    const std::string subject = make_id('p', s);
    std::vector<std::uint8_t> labels(L);
    for (std::size_t l = 0; l < L; ++l) {
      labels[l] = std::bernoulli_distribution(rates[l])(rng) ? 1 : 0;
    }
    std::vector<double> u(k);
    for (std::size_t i = 0; i < k; ++i) {
      double mean = -w_offset[i];
      for (std::size_t l = 0; l < L; ++l) mean += W(i, l) * labels[l];
      u[i] = mean + normal(rng);
    }
    if (truth) {
      truth->subject_ids.push_back(subject);
      for (std::size_t i = 0; i < k; ++i) truth->factors(s, i) = u[i];
      for (std::size_t l = 0; l < L; ++l) truth->labels(s, l) = labels[l];
    }
    const std::size_t n_studies = draw_count(rng, config.studies_per_subject);
    for (std::size_t t = 0; t < n_studies; ++t) {
      Study st;
      st.subject_id = subject;
      st.study_id = make_id('s', study_counter++);
      st.labels = labels;
      const std::size_t nf = draw_count(rng, config.frontal_per_study);
      const std::size_t nl = draw_count(rng, config.lateral_per_study);
      for (std::size_t i = 0; i < nf; ++i) {
        st.frontal.push_back({make_id('f', image_counter++),
                              render(u, A_f, B_f, config.nuisance_f, config.sigma_f, d_f)});
      }
      for (std::size_t i = 0; i < nl; ++i) {
        st.lateral.push_back({make_id('l', image_counter++),
                              render(u, A_l, B_l, config.nuisance_l, config.sigma_l, d_l)});
      }
      studies.push_back(std::move(st));
    }
  }

  Dataset ds;
  ds.label_names = L == default_label_names().size() ? default_label_names() : std::vector<std::string>{};
  if (ds.label_names.empty()) {
    for (std::size_t l = 0; l < L; ++l) ds.label_names.push_back("label_" + std::to_string(l));
  }
  ds.dim_f = d_f;
  ds.dim_l = d_l;
  ds.image_side = image ? config.image_side : 0;
  ds.samples = pair_studies(studies);
  return ds;
}

// ---------------------------------------------------------------------------
// Splits

std::array<Dataset, 3> subject_split(const Dataset& dataset, const std::array<double, 3>& ratios,
                                     std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ContractError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");

  std::vector<std::string> subjects = dataset.subjects();
  if (subjects.size() < ratios.size()) {
    throw ContractError("cannot split " + std::to_string(subjects.size()) +
                        " subjects into 3 non-empty parts");
  }
  std::sort(subjects.begin(), subjects.end());
  Rng rng(derive_seed(seed, "subject-split"));
  std::shuffle(subjects.begin(), subjects.end(), rng);

  const double n = static_cast<double>(subjects.size());
  std::array<std::size_t, 3> counts{0, 0, 0};
  std::map<std::string, std::size_t> assignment;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    std::size_t target = 0;
    if (i < ratios.size()) {
      target = i;
    } else {
      double best = -1e300;
      for (std::size_t p = 0; p < ratios.size(); ++p) {
        const double deficit = ratios[p] * n - static_cast<double>(counts[p]);
        if (deficit > best) {
          best = deficit;
          target = p;
        }
      }
    }
    ++counts[target];
    assignment[subjects[i]] = target;
  }

  std::array<std::vector<std::size_t>, 3> idx;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    idx[assignment.at(dataset.samples[i].subject_id)].push_back(i);
  }
  return {dataset.subset(idx[0]), dataset.subset(idx[1]), dataset.subset(idx[2])};
}

// ---------------------------------------------------------------------------
// CSV manifest

namespace {

const std::array<std::string, 5> kFixedColumns{"sample_id", "subject_id", "study_id",
                                               "path_frontal", "path_lateral"};

}  // namespace

Manifest read_manifest(const fs::path& path, bool raw_labels) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty manifest " + path.string());
  auto header = split_csv_line(line);
  if (header.size() < kFixedColumns.size() + 1) {
    throw ParseError("manifest " + path.string() + " needs the 5 id/path columns and labels");
  }
  for (std::size_t i = 0; i < kFixedColumns.size(); ++i) {
    if (header[i] != kFixedColumns[i]) {
      throw ParseError("manifest " + path.string() + " column " + std::to_string(i + 1) +
                       " must be '" + kFixedColumns[i] + "', found '" + header[i] + "'");
    }
  }
  Manifest m;
  m.label_names.assign(header.begin() + kFixedColumns.size(), header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    ManifestRow row{cells[0], cells[1], cells[2], cells[3], cells[4], {}};
    for (std::size_t l = 0; l < m.label_names.size(); ++l) {
      const std::string& cell = cells[kFixedColumns.size() + l];
      const std::string ctx = where + ", column '" + m.label_names[l] + "'";
      if (raw_labels) {
        row.labels.push_back(binarize_label(cell, ctx));
      } else if (cell == "0" || cell == "1") {
        row.labels.push_back(cell == "1" ? 1 : 0);
      } else {
        throw ParseError("label must be 0 or 1 at " + ctx + ", got '" + cell +
                         "' (use raw labels for CheXpert codes)");
      }
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (std::size_t i = 0; i < kFixedColumns.size(); ++i) out << (i ? "," : "") << kFixedColumns[i];
  for (const auto& n : manifest.label_names) out << ',' << csv_cell(n);
  out << '\n';
  for (const auto& r : manifest.rows) {
    out << csv_cell(r.sample_id) << ',' << csv_cell(r.subject_id) << ',' << csv_cell(r.study_id)
        << ',' << csv_cell(r.path_frontal) << ',' << csv_cell(r.path_lateral);
    for (auto l : r.labels) out << ',' << static_cast<int>(l);
    out << '\n';
  }
  if (!out) throw IoError("failed writing manifest " + path.string());
}

// ---------------------------------------------------------------------------
// PGM and vector files

GrayImage read_pgm(const fs::path& path) {
  const std::string buf = slurp(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    std::size_t start = pos;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos) throw ParseError("PGM " + path.string() + ": missing " + what);
    return std::stoul(buf.substr(start, pos - start));
  };
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') {
    throw ParseError("PGM " + path.string() + ": bad magic (expected P5)");
  }
  pos = 2;
  GrayImage img;
  img.width = read_int("width");
  img.height = read_int("height");
  const unsigned long maxval = read_int("maxval");
  if (img.width == 0 || img.height == 0) throw ParseError("PGM " + path.string() + ": zero dimension");
  if (maxval != 255) throw ParseError("PGM " + path.string() + ": maxval must be 255");
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw ParseError("PGM " + path.string() + ": malformed header");
  }
  ++pos;
  const std::size_t n = img.width * img.height;
  if (buf.size() - pos < n) throw ParseError("PGM " + path.string() + ": truncated pixel data");
  img.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                    buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_pgm(const GrayImage& image, const fs::path& path) {
  if (image.pixels.size() != image.width * image.height || image.width == 0) {
    throw ContractError("write_pgm: pixel count does not match dimensions");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  spit(path, out);
}

std::vector<double> read_vector_file(const fs::path& path) {
  const std::string buf = slurp(path);
  if (buf.size() < 4) throw ParseError("vector file " + path.string() + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::uint32_t n = binio::get_u32(p);
  if (n == 0) throw ParseError("vector file " + path.string() + ": dimension 0");
  if (buf.size() != 4 + 8 * static_cast<std::size_t>(n)) {
    throw ParseError("vector file " + path.string() + ": length " + std::to_string(n) +
                     " does not match file size");
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = binio::get_f64(p + 4 + 8 * i);
  return v;
}

void write_vector_file(const std::vector<double>& values, const fs::path& path) {
  std::string out;
  binio::put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (double v : values) binio::put_f64(out, v);
  spit(path, out);
}

Matrix center_crop(const Matrix& image) {
  const std::size_t side = std::min(image.rows, image.cols);
  const std::size_t r0 = (image.rows - side) / 2, c0 = (image.cols - side) / 2;
  Matrix out(side, side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) out(r, c) = image(r0 + r, c0 + c);
  return out;
}

Matrix resize_bilinear(const Matrix& image, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || image.rows == 0 || image.cols == 0) {
    throw ContractError("resize_bilinear: dimensions must be positive");
  }
  auto coords = [](std::size_t dst, std::size_t in, std::size_t out) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const std::size_t lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    return std::tuple{lo, hi, src - static_cast<double>(lo)};
  };
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [r0, r1, fr] = coords(r, image.rows, rows);
    for (std::size_t c = 0; c < cols; ++c) {
      const auto [c0, c1, fc] = coords(c, image.cols, cols);
      const double top = fc == 0.0 ? image(r0, c0) : (1 - fc) * image(r0, c0) + fc * image(r0, c1);
      const double bottom = fc == 0.0 ? image(r1, c0) : (1 - fc) * image(r1, c0) + fc * image(r1, c1);
      out(r, c) = fr == 0.0 ? top : (1 - fr) * top + fr * bottom;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

bool is_pgm(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

std::vector<double> load_modality_file(const fs::path& path, const LoadOptions& opt,
                                       std::size_t* side) {
  if (!is_pgm(path)) {
    *side = 0;
    return read_vector_file(path);
  }
  GrayImage img = read_pgm(path);
  Matrix m(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.values[i] = img.pixels[i];
  if (opt.center_crop) m = center_crop(m);
  if (opt.size == 0) throw ContractError("image size must be positive");
  m = resize_bilinear(m, opt.size, opt.size);
  for (auto& v : m.values) v /= 255.0;
  *side = opt.size;
  return m.values;
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path, const LoadOptions& options) {
  const Manifest manifest = read_manifest(manifest_path, options.raw_labels);
  const fs::path base = manifest_path.parent_path();
  Dataset ds;
  ds.label_names = manifest.label_names;
  std::map<std::string, std::vector<double>> cache;
  std::size_t side_seen = 0;
  bool first = true;
  auto fetch = [&](const std::string& rel) -> const std::vector<double>& {
    auto it = cache.find(rel);
    if (it != cache.end()) return it->second;
    std::size_t side = 0;
    auto values = load_modality_file(base / rel, options, &side);
    if (first) {
      side_seen = side;
      first = false;
    } else if ((side == 0) != (side_seen == 0)) {
      throw ParseError("manifest mixes images and vectors: " + rel);
    }
    return cache.emplace(rel, std::move(values)).first->second;
  };
  for (const auto& row : manifest.rows) {
    BimodalSample s;
    s.sample_id = row.sample_id;
    s.subject_id = row.subject_id;
    s.study_id = row.study_id;
    s.frontal_ref = row.path_frontal;
    s.lateral_ref = row.path_lateral;
    s.x_f = fetch(row.path_frontal);
    s.x_l = fetch(row.path_lateral);
    s.labels = row.labels;
    if (ds.samples.empty()) {
      ds.dim_f = s.x_f.size();
      ds.dim_l = s.x_l.size();
    } else if (s.x_f.size() != ds.dim_f || s.x_l.size() != ds.dim_l) {
      throw ParseError("sample " + row.sample_id + " has inconsistent modality dimensions");
    }
    ds.samples.push_back(std::move(s));
  }
  ds.image_side = side_seen;
  try {
    ds.validate();
  } catch (const ContractError& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  return ds;
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "files", ec);
  if (ec) throw IoError("cannot create " + (dir / "files").string() + ": " + ec.message());
  const bool image = dataset.image_side > 0;
  const std::string ext = image ? ".pgm" : ".vec";
  std::set<std::string> written;
  auto emit = [&](const std::string& ref, const std::vector<double>& values) {
    const std::string rel = "files/" + ref + ext;
    if (!written.insert(rel).second) return rel;
    if (image) {
      GrayImage img{dataset.image_side, dataset.image_side, {}};
      img.pixels.reserve(values.size());
      for (double v : values) {
        img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
      write_pgm(img, dir / rel);
    } else {
      write_vector_file(values, dir / rel);
    }
    return rel;
  };
  Manifest m;
  m.label_names = dataset.label_names;
  for (const auto& s : dataset.samples) {
    ManifestRow row{s.sample_id, s.subject_id, s.study_id, emit(s.frontal_ref, s.x_f),
                    emit(s.lateral_ref, s.x_l), s.labels};
    m.rows.push_back(std::move(row));
  }
  const fs::path manifest = dir / "manifest.csv";
  write_manifest(m, manifest);
  return manifest;
}

}  // namespace mmvm::data
