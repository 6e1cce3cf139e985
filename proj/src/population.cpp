#include "acquire/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace acquire {
namespace {

using nlohmann::json;

void require_finite(const Vec& v, int line_no) {
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i)))
      throw std::invalid_argument("population: non-finite preference entry at record " +
                                  std::to_string(line_no));
  }
}

LossModel loss_from_json(const json& spec) {
  const std::string family = spec.at("family").get<std::string>();
  const json params = spec.contains("params") ? spec.at("params") : json::object();
  if (family == "sq_mahalanobis") {
    const auto rows = params.at("sigma").get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(rows.size());
    Mat sigma(d, d);
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(rows[r].size()) != d)
        throw std::invalid_argument("population: sigma must be square");
      for (int c = 0; c < d; ++c) sigma(r, c) = rows[r][c];
    }
    return LossModel::sq_mahalanobis(std::move(sigma));
  }
  if (family == "huber") return LossModel::huber(params.at("delta").get<double>());
  if (family == "cosine") return LossModel::cosine();
  if (family == "metric_l2") return LossModel::metric_l2();
  if (family == "lipschitz_sc")
    return LossModel::lipschitz_sc(params.at("lipschitz").get<double>(),
                                   params.at("mu").get<double>());
  throw std::invalid_argument("population: unknown loss family '" + family + "'");
}

json loss_to_json(const LossModel& model) {
  json spec;
  switch (model.family()) {
    case LossFamily::SqMahalanobis: {
      spec["family"] = "sq_mahalanobis";
      std::vector<std::vector<double>> rows(model.sigma().rows());
      for (int r = 0; r < model.sigma().rows(); ++r)
        for (int c = 0; c < model.sigma().cols(); ++c) rows[r].push_back(model.sigma()(r, c));
      spec["params"] = {{"sigma", rows}};
      break;
    }
    case LossFamily::Huber:
      spec["family"] = "huber";
      spec["params"] = {{"delta", model.delta()}};
      break;
    case LossFamily::Cosine:
      spec["family"] = "cosine";
      spec["params"] = json::object();
      break;
    case LossFamily::MetricL2:
      spec["family"] = "metric_l2";
      spec["params"] = json::object();
      break;
    case LossFamily::LipschitzSc:
      spec["family"] = "lipschitz_sc";
      spec["params"] = {{"lipschitz", model.lipschitz()}, {"mu", model.mu()}};
      break;
  }
  return spec;
}

struct RawUser {
  int user_id;
  std::string group;
  Vec phi;
  LossModel loss;
};

Population assemble(std::vector<RawUser> raw) {
  if (raw.empty()) throw std::invalid_argument("population: no user records (n >= 1 required)");
  std::vector<std::string> labels;
  std::vector<UserProfile> users;
  users.reserve(raw.size());
  for (RawUser& r : raw) {
    int gid = -1;
    for (std::size_t g = 0; g < labels.size(); ++g) {
      if (labels[g] == r.group) {
        gid = static_cast<int>(g);
        break;
      }
    }
    if (gid < 0) {
      gid = static_cast<int>(labels.size());
      labels.push_back(r.group);
    }
    users.push_back({r.user_id, std::move(r.phi), std::move(r.loss), gid});
  }
  return Population::from_users(std::move(users), std::move(labels));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

Population load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_population: cannot open " + path);
  std::vector<RawUser> raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::invalid_argument("load_population: parse error at line " +
                                  std::to_string(line_no) + ": " + e.what());
    }
    try {
      RawUser u{rec.at("user_id").get<int>(), rec.at("group").get<std::string>(), Vec(),
                loss_from_json(rec.at("loss"))};
      const auto coords = rec.at("phi").get<std::vector<double>>();
      u.phi = Eigen::Map<const Vec>(coords.data(), static_cast<Eigen::Index>(coords.size()));
      require_finite(u.phi, line_no);
      raw.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw std::invalid_argument("load_population: invalid record at line " +
                                  std::to_string(line_no) + ": " + e.what());
    }
  }
  return assemble(std::move(raw));
}

Population load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_population: cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::invalid_argument("load_population: empty CSV " + path);
  const std::vector<std::string> cols = split_csv_line(header);
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(cols.begin(), cols.end(), name);
    return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
  };
  const int id_col = col("user_id");
  const int group_col = col("group");
  const int family_col = col("family");
  if (id_col < 0 || group_col < 0 || family_col < 0)
    throw std::invalid_argument("load_population: CSV needs user_id, group, family columns");
  std::vector<int> phi_cols;
  for (int d = 0; col("phi_" + std::to_string(d)) >= 0; ++d)
    phi_cols.push_back(col("phi_" + std::to_string(d)));
  if (phi_cols.empty())
    throw std::invalid_argument("load_population: CSV needs phi_0.. columns");
  const int d = static_cast<int>(phi_cols.size());

  std::vector<RawUser> raw;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    const std::vector<std::string> f = split_csv_line(line);
    auto cell = [&](int idx, const char* what) -> const std::string& {
      if (idx < 0 || idx >= static_cast<int>(f.size()) || f[idx].empty())
        throw std::invalid_argument("load_population: missing " + std::string(what) +
                                    " at line " + std::to_string(line_no));
      return f[idx];
    };
    auto num = [&](int idx, const char* what) { return std::stod(cell(idx, what)); };

    RawUser u{std::stoi(cell(id_col, "user_id")), cell(group_col, "group"), Vec(d),
              LossModel::metric_l2()};
    for (int i = 0; i < d; ++i) u.phi(i) = num(phi_cols[i], "phi");
    require_finite(u.phi, line_no);
    const std::string family = cell(family_col, "family");
    if (family == "sq_mahalanobis") {
      Mat sigma(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          sigma(r, c) = num(col("sigma_" + std::to_string(r) + "_" + std::to_string(c)), "sigma");
      u.loss = LossModel::sq_mahalanobis(std::move(sigma));
    } else if (family == "huber") {
      u.loss = LossModel::huber(num(col("delta"), "delta"));
    } else if (family == "cosine") {
      u.loss = LossModel::cosine();
    } else if (family == "metric_l2") {
      u.loss = LossModel::metric_l2();
    } else if (family == "lipschitz_sc") {
      u.loss = LossModel::lipschitz_sc(num(col("lipschitz"), "lipschitz"), num(col("mu"), "mu"));
    } else {
      throw std::invalid_argument("load_population: unknown family '" + family + "' at line " +
                                  std::to_string(line_no));
    }
    raw.push_back(std::move(u));
  }
  return assemble(std::move(raw));
}

}  // namespace

Population Population::from_users(std::vector<UserProfile> users,
                                  std::vector<std::string> group_labels) {
  if (users.empty()) throw std::invalid_argument("population: n >= 1 required");
  std::sort(users.begin(), users.end(),
            [](const UserProfile& a, const UserProfile& b) { return a.user_id < b.user_id; });
  const int n = static_cast<int>(users.size());
  const int d = static_cast<int>(users[0].preference.size());
  if (d < 1) throw std::invalid_argument("population: dimension must be >= 1");

  Population pop;
  pop.dim_ = d;
  pop.group_labels_ = std::move(group_labels);
  const int m = static_cast<int>(pop.group_labels_.size());
  if (m < 1) throw std::invalid_argument("population: m >= 1 required");
  pop.groups_.resize(m);

  for (int i = 0; i < n; ++i) {
    const UserProfile& u = users[i];
    if (u.user_id != i)
      throw std::invalid_argument("population: user ids must be a permutation of 0..n-1 "
                                  "(duplicate or gap at id " + std::to_string(u.user_id) + ")");
    if (u.preference.size() != d)
      throw std::invalid_argument("population: dimension mismatch at user " + std::to_string(i));
    for (int k = 0; k < d; ++k)
      if (!std::isfinite(u.preference(k)))
        throw std::invalid_argument("population: non-finite preference at user " +
                                    std::to_string(i));
    if (u.group_id < 0 || u.group_id >= m)
      throw std::invalid_argument("population: unknown group id at user " + std::to_string(i));
    if (u.loss.family() == LossFamily::Cosine &&
        std::abs(u.preference.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("population: cosine user " + std::to_string(i) +
                                  " needs a unit-norm preference");
    pop.groups_[u.group_id].push_back(i);
  }
  for (int g = 0; g < m; ++g) {
    if (pop.groups_[g].empty())
      throw std::invalid_argument("population: empty group '" + pop.group_labels_[g] + "'");
    pop.group_sizes_.push_back(static_cast<int>(pop.groups_[g].size()));
  }
  pop.users_ = std::move(users);
  return pop;
}

std::vector<double> Population::inverse_group_weights() const {
  std::vector<double> w(users_.size());
  for (std::size_t i = 0; i < users_.size(); ++i)
    w[i] = 1.0 / group_sizes_[users_[i].group_id];
  return w;
}

Population load_population(const std::string& path, IngestFormat format) {
  return format == IngestFormat::Jsonl ? load_jsonl(path) : load_csv(path);
}

Population load_population(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return load_population(path, IngestFormat::Csv);
  return load_population(path, IngestFormat::Jsonl);
}

void save_population_jsonl(const Population& pop, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_population_jsonl: cannot write " + path);
  for (const UserProfile& u : pop.users()) {
    json rec;
    rec["user_id"] = u.user_id;
    rec["group"] = pop.group_labels()[u.group_id];
    rec["phi"] = std::vector<double>(u.preference.data(), u.preference.data() + u.preference.size());
    rec["loss"] = loss_to_json(u.loss);
    out << rec.dump() << "\n";
  }
}

std::map<int, int> group_sizes(const Population& pop) {
  std::map<int, int> sizes;
  for (int g = 0; g < pop.group_count(); ++g) sizes[g] = pop.group_sizes()[g];
  return sizes;
}

Mat alignment_matrix(const Population& pop) {
  std::vector<const LossModel*> models;
  models.reserve(pop.size());
  for (const UserProfile& u : pop.users()) models.push_back(&u.loss);
  return alignment_matrix(std::span<const LossModel* const>(models));
}

}  // namespace acquire
