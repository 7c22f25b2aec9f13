#include "exsimex/core_data.hpp"

#include "exsimex/error.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace exsimex {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.array().isFinite().all(); }

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace

std::pair<Eigen::MatrixXd, bool> repair_psd(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double trace = sym.trace();
  const double floor = -1e-10 * std::max(std::abs(trace), 1e-300);
  if (ev.minCoeff() < floor && ev.minCoeff() < 0.0) {
    std::ostringstream msg;
    msg << "measurement-error covariance is not positive semidefinite (smallest eigenvalue "
        << ev.minCoeff() << ")";
    throw InputError(msg.str());
  }
  if (ev.minCoeff() >= 0.0) {
    const bool changed = (sym - a).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
    return {sym, changed};
  }
  Eigen::VectorXd clamped = ev.cwiseMax(0.0);
  Eigen::MatrixXd fixed = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  fixed = 0.5 * (fixed + fixed.transpose());
  return {fixed, true};
}

Dataset::Dataset(Eigen::VectorXd y, Eigen::MatrixXd z, Eigen::MatrixXd sigma_u)
    : y_(std::move(y)), z_(std::move(z)) {
  if (y_.size() < 1 || z_.cols() < 1) throw InputError("dataset needs n >= 1 and p >= 1");
  if (z_.rows() != y_.size()) {
    std::ostringstream msg;
    msg << "response length " << y_.size() << " does not match " << z_.rows() << " covariate rows";
    throw InputError(msg.str());
  }
  if (sigma_u.rows() != z_.cols() || sigma_u.cols() != z_.cols()) {
    std::ostringstream msg;
    msg << "sigma_u must be " << z_.cols() << "x" << z_.cols() << ", got " << sigma_u.rows() << "x"
        << sigma_u.cols();
    throw InputError(msg.str());
  }
  if (!all_finite(y_) || !all_finite(z_) || !all_finite(sigma_u))
    throw InputError("dataset contains non-finite values");
  auto [fixed, changed] = repair_psd(sigma_u);
  if (changed) warnings_.push_back("sigma_u was symmetrized / clamped to the nearest PSD matrix");
  sigma_u_ = std::move(fixed);
  error_free_ = (sigma_u_.array() == 0.0).all();
}

Dataset Dataset::with_surrogates(Eigen::MatrixXd z) const {
  Dataset copy = *this;
  if (z.rows() != z_.rows() || z.cols() != z_.cols())
    throw InputError("replacement surrogate matrix has the wrong shape");
  copy.z_ = std::move(z);
  return copy;
}

Dataset Dataset::with_sigma_u(Eigen::MatrixXd sigma_u) const { return Dataset(y_, z_, std::move(sigma_u)); }

void ReplicatePairs::validate() const {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw InputError("replicate matrices have different dimensions");
  if (!all_finite(z1) || !all_finite(z2)) throw InputError("replicates contain non-finite values");
}

Eigen::MatrixXd ReplicatePairs::mean() const {
  validate();
  return 0.5 * (z1 + z2);
}

Eigen::MatrixXd estimate_sigma_u_from_replicates(const ReplicatePairs& reps) {
  reps.validate();
  const Eigen::Index n = reps.z1.rows();
  if (n < 2) throw InputError("at least two replicate rows are needed to estimate sigma_u");
  Eigen::MatrixXd d = 0.5 * (reps.z1 - reps.z2);
  Eigen::RowVectorXd centre = d.colwise().mean();
  Eigen::MatrixXd dc = d.rowwise() - centre;
  Eigen::MatrixXd cov = (dc.transpose() * dc) / static_cast<double>(n - 1);
  return 0.5 * (cov + cov.transpose());
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::Exponential: return "exponential";
    case Family::Sine: return "sine";
    case Family::Poisson: return "poisson";
    case Family::Logistic: return "logistic";
    case Family::LPRE: return "lpre";
    case Family::LARE: return "lare";
    case Family::Quantile: return "quantile";
    case Family::Walsh: return "walsh";
    case Family::Expectile: return "expectile";
    case Family::GenericLS: return "generic-ls";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::Linear, Family::Exponential, Family::Sine, Family::Poisson,
                   Family::Logistic, Family::LPRE, Family::LARE, Family::Quantile,
                   Family::Walsh, Family::Expectile, Family::GenericLS}) {
    if (family_name(f) == name) return f;
  }
  if (name == "generic" || name == "genericls") return Family::GenericLS;
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

MeanFunction builtin_mean_function(std::string_view name, Eigen::Index p) {
  MeanFunction m;
  m.name = std::string(name);
  if (name == "linear") {
    m.p = p;
    m.q = p;
    m.value = [](const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& t) { return x.dot(t); };
  } else if (name == "exponential") {
    m.p = p;
    m.q = p;
    m.value = [](const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& t) { return std::exp(x.dot(t)); };
  } else if (name == "sshape") {
    m.p = 1;
    m.q = 4;
    m.value = [](const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& t) {
      return t[0] + t[1] / (1.0 + std::exp(t[2] * (x[0] - t[3])));
    };
    // Plateau levels from the response range, centre at the covariate median.
    m.default_start = [](const Dataset& d) {
      std::vector<double> zs(d.z().col(0).data(), d.z().col(0).data() + d.n());
      std::nth_element(zs.begin(), zs.begin() + zs.size() / 2, zs.end());
      const double median = zs[zs.size() / 2];
      Eigen::VectorXd start(4);
      const double lo = d.y().minCoeff();
      const double hi = d.y().maxCoeff();
      double spread = 0.0;
      for (double v : zs) spread += std::abs(v - median);
      spread = std::max(spread / static_cast<double>(zs.size()), 1e-6);
      // b1 < 0 with b2 > 0 gives an increasing curve from b0 + b1 to b0.
      start << hi, lo - hi, 1.0 / spread, median;
      return start;
    };
  } else {
    throw ConfigError("unknown mean function '" + std::string(name) + "'");
  }
  return m;
}

void ModelSpec::validate() const {
  const bool wants_tau = family == Family::Quantile || family == Family::Expectile;
  if (wants_tau != tau.has_value())
    throw ConfigError(wants_tau ? "family '" + std::string(family_name(family)) + "' needs tau"
                                : "tau is only valid for quantile and expectile families");
  if (tau && !(*tau > 0.0 && *tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  const bool intercept_ok = family == Family::Linear || family == Family::Logistic ||
                            family == Family::Quantile || family == Family::Expectile ||
                            family == Family::Walsh;
  if (intercept && !intercept_ok)
    throw ConfigError("family '" + std::string(family_name(family)) + "' takes no intercept");
  if ((family == Family::GenericLS) != mean_fn.has_value())
    throw ConfigError("a mean function is required for, and only for, generic-ls");
  if (mean_fn && !mean_fn->value) throw ConfigError("mean function has no value callable");
}

Eigen::Index ModelSpec::parameter_count(Eigen::Index p) const {
  if (family == Family::GenericLS) return mean_fn->q;
  return p + (intercept ? 1 : 0);
}

bool ModelSpec::pluggable() const {
  switch (family) {
    case Family::Linear:
    case Family::Exponential:
    case Family::Sine:
    case Family::Poisson:
    case Family::LPRE:
      return true;
    case Family::Expectile:
      return tau && *tau == 0.5;
    default:
      return false;
  }
}

bool ModelSpec::nonsmooth_at_zero() const {
  return family == Family::Quantile || family == Family::Walsh || family == Family::LARE;
}

ModelSpec make_model(Family family, std::optional<double> tau, bool intercept) {
  ModelSpec m;
  m.family = family;
  m.tau = tau;
  m.intercept = intercept;
  m.validate();
  return m;
}

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

Table parse_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty input: no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
    line = line.substr(3);
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  t.header = split(line, delim);
  for (const auto& h : t.header)
    if (h.empty()) throw InputError("header has an empty column name");

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split(line, delim);
    if (cells.size() != t.header.size()) {
      std::ostringstream msg;
      msg << "row " << row << ": expected " << t.header.size() << " cells, found " << cells.size();
      throw InputError(msg.str());
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& s = cells[c];
      char* end = nullptr;
      errno = 0;
      const double v = s.empty() ? 0.0 : std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "row " << row << ", column '" << t.header[c] << "': non-numeric or missing value '"
            << s << "'";
        throw InputError(msg.str());
      }
      values[c] = v;
    }
    t.rows.push_back(std::move(values));
  }
  if (t.rows.empty()) throw InputError("input has a header but no data rows");
  return t;
}

namespace {

Eigen::MatrixXd gather(const Table& t, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][cols[j]];
  return m;
}

}  // namespace

ReplicatePairs replicate_pairs(const Table& table,
                               const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw InputError("no replicate columns given");
  std::vector<std::size_t> first, second;
  for (const auto& [a, b] : pairs) {
    first.push_back(table.column(a));
    second.push_back(table.column(b));
  }
  ReplicatePairs reps{gather(table, first), gather(table, second)};
  reps.validate();
  return reps;
}

Dataset load_dataset(std::istream& in, const ColumnMap& columns, const SigmaSource& sigma) {
  Table t = parse_table(in);
  const std::string response = columns.response.empty() ? t.header.front() : columns.response;
  const std::size_t ycol = t.column(response);
  Eigen::VectorXd y = gather(t, {ycol}).col(0);

  if (std::holds_alternative<FromReplicates>(sigma)) {
    ReplicatePairs reps = replicate_pairs(t, columns.replicates);
    Eigen::MatrixXd su = estimate_sigma_u_from_replicates(reps);
    return Dataset(std::move(y), reps.mean(), std::move(su));
  }

  std::vector<std::size_t> zcols;
  if (columns.covariates.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (c != ycol) zcols.push_back(c);
  } else {
    for (const auto& name : columns.covariates) zcols.push_back(t.column(name));
  }
  if (zcols.empty()) throw InputError("no covariate columns");
  return Dataset(std::move(y), gather(t, zcols), std::get<Eigen::MatrixXd>(sigma));
}

}  // namespace exsimex
