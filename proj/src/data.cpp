#include "palm/data.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace palm {

TrainingSet::TrainingSet(Design X, Eigen::VectorXd y,
                         std::optional<CodingMap> coding)
    : X_(std::move(X)), y_(std::move(y)) {
  if (X_.rows() != y_.size())
    throw std::invalid_argument("TrainingSet: X rows and y length differ");
  if (X_.rows() < 1 || X_.cols() < 1)
    throw std::invalid_argument("TrainingSet: empty data");
  if (!X_.allFinite() || !y_.allFinite())
    throw std::invalid_argument("TrainingSet: non-finite values");
  coding_ = coding ? *coding : CodingMap::from_range(X_);
  if (coding_.dim() != X_.cols())
    throw std::invalid_argument("TrainingSet: coding dimension mismatch");
}

namespace {

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ','))
    out.push_back(field);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

double parse_double(const std::string &s, std::size_t line_no) {
  double v = 0.0;
  const char *b = s.data();
  const char *e = s.data() + s.size();
  while (b < e && *b == ' ')
    ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r'))
    --e;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw std::runtime_error(
        fmt::format("csv: bad number '{}' on line {}", s, line_no));
  return v;
}

} // namespace

CsvTable read_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("csv: cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: missing header in " + path.string());
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  t.header = split(line);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r")
      continue;
    auto fields = split(line);
    if (fields.size() != t.header.size())
      throw std::runtime_error(
          fmt::format("csv: line {} has {} fields, expected {}", line_no,
                      fields.size(), t.header.size()));
    std::vector<double> r;
    r.reserve(fields.size());
    for (const auto &f : fields)
      r.push_back(parse_double(f, line_no));
    rows.push_back(std::move(r));
  }
  t.rows.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return t;
}

namespace {

Eigen::Index count_input_columns(const std::vector<std::string> &header) {
  Eigen::Index d = 0;
  while (static_cast<std::size_t>(d) < header.size() &&
         header[static_cast<std::size_t>(d)] == fmt::format("x{}", d + 1))
    ++d;
  if (d == 0)
    throw std::runtime_error("csv: expected columns x1..xd");
  return d;
}

} // namespace

TrainingSet read_dataset_csv(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const Eigen::Index d = count_input_columns(t.header);
  if (t.header.size() != static_cast<std::size_t>(d + 1) ||
      t.header.back() != "y")
    throw std::runtime_error("csv: dataset needs columns x1..xd,y");
  Design X = t.rows.leftCols(d);
  Eigen::VectorXd y = t.rows.col(d);
  return TrainingSet(std::move(X), std::move(y));
}

Design read_inputs_csv(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const Eigen::Index d = count_input_columns(t.header);
  const auto extra = t.header.size() - static_cast<std::size_t>(d);
  if (extra > 1 || (extra == 1 && t.header.back() != "y"))
    throw std::runtime_error("csv: inputs need columns x1..xd[,y]");
  return t.rows.leftCols(d);
}

std::string format_double(double v) { return fmt::format("{}", v); }

void write_dataset_csv(const std::filesystem::path &path, const Design &X,
                       const Eigen::VectorXd &y) {
  std::string out;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    out += fmt::format("x{},", j + 1);
  out += "y\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      out += format_double(X(i, j));
      out += ',';
    }
    out += format_double(y[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_file_atomic(const std::filesystem::path &path,
                       const std::string &contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out)
      throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace palm
