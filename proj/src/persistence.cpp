#include "palm/persistence.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace palm {

using nlohmann::json;

MomentPrediction LoadedModel::predict(Point x) const {
  if (two_stage)
    return two_stage->predict(x);
  const PalmPrediction p = palm->predict(x);
  return {p.mean, p.variance};
}

Eigen::Index LoadedModel::dim() const { return local_model().dim(); }

const PalmModel &LoadedModel::local_model() const {
  if (two_stage)
    return two_stage->residual_model();
  if (!palm)
    throw std::logic_error("LoadedModel: empty");
  return *palm;
}

std::string data_checksum(const TrainingSet &data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](double v) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  };
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index l = 0; l < data.dim(); ++l)
      mix(data.X()(i, l));
    mix(data.y()[i]);
  }
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << h;
  return s.str();
}

namespace {

json vec_json(const Eigen::VectorXd &v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd json_vec(const json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char *mode_name(SelectionMode m) {
  return m == SelectionMode::spacefill ? "spacefill" : "sequential";
}

SelectionMode mode_from(const std::string &s) {
  if (s == "spacefill")
    return SelectionMode::spacefill;
  if (s == "sequential")
    return SelectionMode::sequential;
  throw std::runtime_error("model file: unknown selection mode '" + s + "'");
}

json palm_json(const PalmModel &m) {
  json j;
  j["coding"] = {{"lo", vec_json(m.coding().lo())}, {"hi", vec_json(m.coding().hi())}};
  j["tau2"] = m.tau2();
  j["eta"] = m.nugget().eta;
  j["eta_is_jitter"] = m.nugget().is_jitter;
  j["power"] = m.power();
  j["s2"] = m.s2();
  json rho = json::array();
  for (Eigen::Index k = 0; k < m.rho().rows(); ++k)
    rho.push_back(vec_json(m.rho().row(k).transpose()));
  j["rho"] = rho;
  json experts = json::array();
  for (const auto &e : m.experts()) {
    experts.push_back({{"center", vec_json(e.center)},
                       {"design", e.design_indices},
                       {"theta", vec_json(e.fit.theta().values())},
                       {"mse", e.mse},
                       {"mle_converged", e.mle_converged}});
  }
  j["experts"] = experts;
  return j;
}

json header_json(const char *kind, const TrainingSet &data, const ModelMeta &meta) {
  json j;
  j["format"] = "palm-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = kind;
  j["training"] = {{"path", meta.training_path},
                   {"rows", data.size()},
                   {"dim", data.dim()},
                   {"checksum", data_checksum(data)}};
  json hist = json::array();
  for (const auto &[c, mode] : meta.history)
    hist.push_back({{"center", vec_json(c)}, {"mode", mode_name(mode)}});
  j["history"] = hist;
  return j;
}

Design gather_rows(const Design &X, const std::vector<Eigen::Index> &idx) {
  Design out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= X.rows())
      throw std::runtime_error("model file: design index out of range");
    out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  }
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd &y, const std::vector<Eigen::Index> &idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = y[idx[i]];
  return out;
}

Nugget nugget_from(double eta, bool is_jitter) {
  return is_jitter ? Nugget{eta, true} : Nugget::value(eta);
}

PalmModel palm_from(const json &j, const CodedData &coded, const CodingMap &coding) {
  const double tau2 = j.at("tau2").get<double>();
  const Nugget eta = nugget_from(j.at("eta").get<double>(), j.at("eta_is_jitter").get<bool>());
  const auto &rows = j.at("rho");
  const auto K = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd rho(K, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::VectorXd r = json_vec(rows.at(static_cast<std::size_t>(k)));
    if (r.size() != K)
      throw std::runtime_error("model file: rho is not square");
    rho.row(k) = r.transpose();
  }
  std::vector<LocalExpert> experts;
  for (const auto &e : j.at("experts")) {
    auto idx = e.at("design").get<std::vector<Eigen::Index>>();
    Design Xd = gather_rows(coded.X, idx);
    Eigen::VectorXd yd = gather(coded.y, idx);
    GpFit fit(std::move(Xd), std::move(yd), Lengthscales(json_vec(e.at("theta"))), tau2, eta);
    experts.push_back(LocalExpert{json_vec(e.at("center")), std::move(idx), std::move(fit),
                                  e.at("mse").get<double>(),
                                  e.at("mle_converged").get<bool>()});
  }
  return PalmModel(std::move(experts), std::move(rho), tau2, eta,
                   j.at("power").get<double>(), j.at("s2").get<double>(), coding);
}

CodingMap coding_from(const json &j) {
  return CodingMap(json_vec(j.at("lo")), json_vec(j.at("hi")));
}

} // namespace

std::string serialize_model(const PalmModel &model, const TrainingSet &data,
                            const ModelMeta &meta) {
  json j = header_json("palm", data, meta);
  j["palm"] = palm_json(model);
  return j.dump(1) + "\n";
}

std::string serialize_model(const GlobalPlusPalm &model, const TrainingSet &data,
                            const ModelMeta &meta) {
  json j = header_json("global+palm", data, meta);
  const GpFit &g = model.global();
  j["global"] = {{"indices", model.global_indices()},
                 {"theta", vec_json(g.theta().values())},
                 {"tau2", g.tau2()},
                 {"eta", g.nugget().eta},
                 {"eta_is_jitter", g.nugget().is_jitter},
                 {"variance", model.variance_mode() == GlobalVariance::additive
                                  ? "additive"
                                  : "residual_only"}};
  j["palm"] = palm_json(model.residual_model());
  return j.dump(1) + "\n";
}

LoadedModel deserialize_model(const std::string &text, const TrainingSet &data) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "palm-model")
      throw std::runtime_error("model file: not a palm model");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw std::runtime_error("model file: unsupported version " +
                               std::to_string(version));
    const auto &tr = j.at("training");
    if (tr.at("rows").get<Eigen::Index>() != data.size() ||
        tr.at("dim").get<Eigen::Index>() != data.dim() ||
        tr.at("checksum").get<std::string>() != data_checksum(data))
      throw std::runtime_error("model file: training data does not match the fitted data");

    LoadedModel out;
    out.meta.training_path = tr.at("path").get<std::string>();
    for (const auto &h : j.at("history"))
      out.meta.history.emplace_back(json_vec(h.at("center")),
                                    mode_from(h.at("mode").get<std::string>()));

    const json &pj = j.at("palm");
    const CodingMap coding = coding_from(pj.at("coding"));
    const TrainingSet coded_set(data.X(), data.y(), coding);
    const CodedData coded = coded_set.coded();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "palm") {
      out.palm = palm_from(pj, coded, coding);
    } else if (kind == "global+palm") {
      const json &gj = j.at("global");
      const auto idx = gj.at("indices").get<std::vector<Eigen::Index>>();
      GpFit global(gather_rows(coded.X, idx), gather(coded.y, idx),
                   Lengthscales(json_vec(gj.at("theta"))), gj.at("tau2").get<double>(),
                   nugget_from(gj.at("eta").get<double>(), gj.at("eta_is_jitter").get<bool>()));
      const CodedData resid{coded.X, global_residuals(global, coded)};
      PalmModel local = palm_from(pj, resid, coding);
      const auto mode = gj.at("variance").get<std::string>() == "additive"
                            ? GlobalVariance::additive
                            : GlobalVariance::residual_only;
      out.two_stage.emplace(std::move(global), idx, std::move(local), mode);
    } else {
      throw std::runtime_error("model file: unknown kind '" + kind + "'");
    }
    return out;
  } catch (const json::exception &e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path &path, const PalmModel &model,
                const TrainingSet &data, const ModelMeta &meta) {
  write_file_atomic(path, serialize_model(model, data, meta));
}

void save_model(const std::filesystem::path &path, const GlobalPlusPalm &model,
                const TrainingSet &data, const ModelMeta &meta) {
  write_file_atomic(path, serialize_model(model, data, meta));
}

LoadedModel load_model(const std::filesystem::path &path,
                       const std::optional<TrainingSet> &data) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (data)
    return deserialize_model(text, *data);
  std::string train;
  try {
    train = json::parse(text).at("training").at("path").get<std::string>();
  } catch (const json::exception &e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
  if (train.empty())
    throw std::runtime_error("model file names no training data; pass it explicitly");
  return deserialize_model(text, read_dataset_csv(train));
}

} // namespace palm
