#include "robustmm/sample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "robustmm/errors.hpp"

namespace robustmm {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(lineno) + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

BalancedSample load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "subject" || header[1] != "row" || header[2] != "y")
    throw ParseError("header must be subject,row,y,x1,...,xq");
  const int q = static_cast<int>(header.size()) - 3;
  if (q < 1) throw ParseError("at least one design column x1 is required");
  for (int j = 0; j < q; ++j)
    if (header[3 + j] != "x" + std::to_string(j + 1))
      throw ParseError("design columns must be named x1..xq in order");

  struct SubjectRows {
    std::map<int, std::pair<double, Eigen::VectorXd>> rows;  // row index -> (y, x)
  };
  std::vector<long long> order;
  std::map<long long, SubjectRows> subjects;

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) != 3 + q)
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(3 + q) + " fields");
    const long long subj = static_cast<long long>(parse_number(f[0], lineno));
    const int row = static_cast<int>(parse_number(f[1], lineno));
    if (row < 1) throw ParseError("line " + std::to_string(lineno) + ": row index must be >= 1");
    Eigen::VectorXd x(q);
    for (int j = 0; j < q; ++j) x[j] = parse_number(f[3 + j], lineno);
    auto it = subjects.find(subj);
    if (it == subjects.end()) {
      order.push_back(subj);
      it = subjects.emplace(subj, SubjectRows{}).first;
    }
    if (!it->second.rows.emplace(row, std::make_pair(parse_number(f[2], lineno), x)).second)
      throw Unbalanced("subject " + std::to_string(subj) + " has duplicate row " +
                       std::to_string(row));
  }
  if (order.empty()) throw ParseError("file has a header but no data rows");

  const int k = static_cast<int>(subjects[order.front()].rows.size());
  BalancedSample s;
  s.n = static_cast<int>(order.size());
  s.k = k;
  s.q = q;
  for (long long subj : order) {
    const auto& rows = subjects[subj].rows;
    if (static_cast<int>(rows.size()) != k)
      throw Unbalanced("subject " + std::to_string(subj) + " has " +
                       std::to_string(rows.size()) + " rows, expected " + std::to_string(k));
    Eigen::VectorXd y(k);
    Eigen::MatrixXd X(k, q);
    int expect = 1;
    for (const auto& [row, data] : rows) {
      if (row != expect)
        throw Unbalanced("subject " + std::to_string(subj) + " is missing row " +
                         std::to_string(expect));
      y[expect - 1] = data.first;
      X.row(expect - 1) = data.second.transpose();
      ++expect;
    }
    s.y.push_back(std::move(y));
    s.X.push_back(std::move(X));
  }
  compute_rank_flags(s);
  return s;
}

void compute_rank_flags(BalancedSample& sample) {
  sample.full_rank.assign(sample.n, false);
  for (int i = 0; i < sample.n; ++i) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sample.X[i]);
    qr.setThreshold(1e-10);
    sample.full_rank[i] = qr.rank() == sample.q;
  }
}

MahalanobisContext::MahalanobisContext(const Eigen::MatrixXd& V0, double cond_ceiling) {
  if (V0.rows() != V0.cols() || V0.rows() < 1) throw InvalidParams("V0 must be square");
  V_ = 0.5 * (V0 + V0.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V_, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw NotPositiveDefinite("V0 is not positive definite");
  if (lmax / lmin > cond_ceiling)
    throw IllConditioned("V0 condition number exceeds the 1e12 ceiling");
  const int k = static_cast<int>(V_.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(V_);
  V_inv_ = llt.solve(Eigen::MatrixXd::Identity(k, k));
  V_inv_ = 0.5 * (V_inv_ + V_inv_.transpose().eval());
  L_ = Eigen::LLT<Eigen::MatrixXd>(V_inv_).matrixL();
  logdet_ = 0.0;
  for (int i = 0; i < k; ++i) logdet_ += 2.0 * std::log(llt.matrixL()(i, i));
}

std::vector<double> distances(const BalancedSample& sample, const Eigen::VectorXd& beta,
                              const MahalanobisContext& ctx) {
  std::vector<double> d(sample.n);
  for (int i = 0; i < sample.n; ++i)
    d[i] = ctx.distance(sample.y[i] - sample.X[i] * beta);
  return d;
}

namespace {

// Rows of the centered, flattened design stack; also returns an orthonormal
// basis of their span via SVD.
struct DesignSpan {
  int p = 0;
  Eigen::MatrixXd basis;     // (kq) x p, orthonormal columns
  Eigen::RowVectorXd center; // mean of the flattened designs
};

DesignSpan design_span(const BalancedSample& sample) {
  const int kq = sample.k * sample.q;
  Eigen::MatrixXd F(sample.n, kq);
  for (int i = 0; i < sample.n; ++i)
    F.row(i) = Eigen::Map<const Eigen::RowVectorXd>(sample.X[i].data(), kq);
  DesignSpan out;
  out.center = F.colwise().mean();
  F.rowwise() -= out.center;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  int p = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-9 * smax && smax > 0.0) ++p;
  out.p = p;
  out.basis = svd.matrixV().leftCols(p);
  return out;
}

// Counts sample points within tolerance of the affine span of the points
// indexed by `subset`.
int count_on_flat(const std::vector<Eigen::VectorXd>& pts, const std::vector<int>& subset) {
  const Eigen::VectorXd& origin = pts[subset[0]];
  // Gram-Schmidt basis of the subset directions
  std::vector<Eigen::VectorXd> basis;
  for (std::size_t j = 1; j < subset.size(); ++j) {
    Eigen::VectorXd v = pts[subset[j]] - origin;
    const double scale = v.norm();
    for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() > 1e-12 * std::max(1.0, scale)) basis.push_back(v.normalized());
  }
  int count = 0;
  for (const auto& pt : pts) {
    Eigen::VectorXd r = pt - origin;
    const double scale = std::max(1.0, r.norm());
    for (const auto& b : basis) r -= b.dot(r) * b;
    if (r.norm() <= 1e-9 * scale) ++count;
  }
  return count;
}

}  // namespace

int design_span_dim(const BalancedSample& sample) { return design_span(sample).p; }

KappaResult kappa(const BalancedSample& sample, int max_exact_n) {
  const DesignSpan span = design_span(sample);
  KappaResult out;
  out.p = span.p;
  const int D = sample.k + span.p;

  if (sample.n > max_exact_n || D > 6) {
    out.value = D;  // general-position value
    out.exact = false;
    return out;
  }

  // Points of R^k x Xspace in affine coordinates R^D.
  std::vector<Eigen::VectorXd> pts(sample.n);
  const int kq = sample.k * sample.q;
  for (int i = 0; i < sample.n; ++i) {
    Eigen::VectorXd t(D);
    t.head(sample.k) = sample.y[i];
    if (span.p > 0) {
      const Eigen::RowVectorXd f =
          Eigen::Map<const Eigen::RowVectorXd>(sample.X[i].data(), kq) - span.center;
      t.tail(span.p) = (f * span.basis).transpose();
    }
    pts[i] = t;
  }

  out.exact = true;
  if (sample.n <= D) {
    out.value = sample.n;  // n <= D points always share a hyperplane
    return out;
  }

  // Every maximal incidence set is S on the affine span of one of its
  // D-subsets, so scanning all D-subsets finds the maximum.
  std::vector<int> subset(D);
  for (int i = 0; i < D; ++i) subset[i] = i;
  int best = 0;
  for (;;) {
    best = std::max(best, count_on_flat(pts, subset));
    int i = D - 1;
    while (i >= 0 && subset[i] == sample.n - D + i) --i;
    if (i < 0) break;
    ++subset[i];
    for (int j = i + 1; j < D; ++j) subset[j] = subset[j - 1] + 1;
  }
  out.value = best;
  return out;
}

}  // namespace robustmm
