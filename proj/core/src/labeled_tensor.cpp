#include "sjt/labeled_tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sjt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t checked_product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("tensor mode with non-positive cardinality");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// Mode positions sorted so paired contractions line up on both operands:
// by variable id, then occurrence.
std::vector<int> canonical_positions(const LabeledTensor& t, const std::vector<char>& selected) {
  std::vector<int> pos;
  for (int m = 0; m < t.order(); ++m)
    if (selected[static_cast<size_t>(m)]) pos.push_back(m);
  std::sort(pos.begin(), pos.end(), [&](int x, int y) {
    const ModeLabel& lx = t.labels()[static_cast<size_t>(x)];
    const ModeLabel& ly = t.labels()[static_cast<size_t>(y)];
    if (lx.var.id != ly.var.id) return lx.var.id < ly.var.id;
    return lx.occ < ly.occ;
  });
  return pos;
}

std::map<int, int> count_multiset(const ContractionSet& sigma) {
  std::map<int, int> mult;
  for (int id : sigma) ++mult[id];
  return mult;
}

// Marks the modes to contract: per variable, the `m` lowest occurrences.
std::vector<char> select_contracted(const LabeledTensor& t, const std::map<int, int>& mult,
                                    const char* side) {
  std::vector<char> sel(static_cast<size_t>(t.order()), 0);
  for (const auto& [id, m] : mult) {
    std::vector<int> pos = t.modes_of(id);
    if (static_cast<int>(pos.size()) < m) {
      std::ostringstream os;
      os << "contraction over variable " << id << " needs multiplicity " << m << " but " << side
         << " operand carries " << pos.size() << " occurrence(s)";
      throw std::invalid_argument(os.str());
    }
    for (int k = 0; k < m; ++k) sel[static_cast<size_t>(pos[static_cast<size_t>(k)])] = 1;
  }
  return sel;
}

struct Matricization {
  RowMat mat;
  std::vector<int> row_pos;  // mode positions forming the rows, canonical order
  std::vector<int> col_pos;
};

Matricization matricize(const LabeledTensor& t, const std::vector<char>& col_selected,
                        bool canonical_rows = true) {
  std::vector<char> row_selected(col_selected.size());
  for (size_t i = 0; i < col_selected.size(); ++i) row_selected[i] = !col_selected[i];
  Matricization m;
  if (canonical_rows) {
    m.row_pos = canonical_positions(t, row_selected);
  } else {
    for (int p = 0; p < t.order(); ++p)
      if (row_selected[static_cast<size_t>(p)]) m.row_pos.push_back(p);
  }
  m.col_pos = canonical_positions(t, col_selected);
  std::vector<int> perm = m.row_pos;
  perm.insert(perm.end(), m.col_pos.begin(), m.col_pos.end());
  LabeledTensor p = permute_modes(t, perm);
  std::size_t rows = 1, cols = 1;
  for (size_t k = 0; k < m.row_pos.size(); ++k) rows *= static_cast<std::size_t>(p.dim(static_cast<int>(k)));
  for (size_t k = m.row_pos.size(); k < perm.size(); ++k) cols *= static_cast<std::size_t>(p.dim(static_cast<int>(k)));
  m.mat = Eigen::Map<const RowMat>(p.values().data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(cols));
  return m;
}

std::vector<char> select_vars(const LabeledTensor& t, const ContractionSet& var_ids) {
  std::vector<char> sel(static_cast<size_t>(t.order()), 0);
  for (int id : var_ids) {
    std::vector<int> pos = t.modes_of(id);
    if (pos.empty()) throw std::invalid_argument("variable " + std::to_string(id) + " does not label the tensor");
    for (int p : pos) sel[static_cast<size_t>(p)] = 1;
  }
  return sel;
}

// Like select_vars, but repeated ids in the set select that many modes,
// highest occurrences first. This lets one block of a duplicated-label
// tensor (such as the second block of an identity) act as the column
// side while the other stays on the rows.
std::vector<char> select_omega(const LabeledTensor& t, const ContractionSet& omega) {
  std::map<int, int> mult;
  for (int id : omega) ++mult[id];
  std::vector<char> sel(static_cast<size_t>(t.order()), 0);
  for (const auto& [id, m] : mult) {
    std::vector<int> pos = t.modes_of(id);
    if (pos.empty()) throw std::invalid_argument("variable " + std::to_string(id) + " does not label the tensor");
    if (m > static_cast<int>(pos.size()))
      throw std::invalid_argument("omega multiplicity exceeds occurrences of variable " + std::to_string(id));
    for (int k = 0; k < m; ++k) sel[static_cast<size_t>(pos[pos.size() - 1 - static_cast<size_t>(k)])] = 1;
  }
  return sel;
}

}  // namespace

LabeledTensor LabeledTensor::scalar(double v) {
  LabeledTensor t;
  t.values_ = {v};
  return t;
}

void LabeledTensor::init_meta(const std::vector<Variable>& vars) {
  labels_.reserve(vars.size());
  dims_.reserve(vars.size());
  std::map<int, int> seen;
  for (const Variable& v : vars) {
    if (v.card <= 0) throw std::invalid_argument("variable with non-positive cardinality");
    labels_.push_back({v, seen[v.id]++});
    dims_.push_back(v.card);
  }
  strides_.assign(vars.size(), 1);
  for (int m = static_cast<int>(vars.size()) - 2; m >= 0; --m)
    strides_[static_cast<size_t>(m)] =
        strides_[static_cast<size_t>(m) + 1] * static_cast<std::size_t>(dims_[static_cast<size_t>(m) + 1]);
}

LabeledTensor::LabeledTensor(const std::vector<Variable>& vars, std::vector<double> values)
    : values_(std::move(values)) {
  init_meta(vars);
  if (values_.size() != checked_product(dims_))
    throw std::invalid_argument("value count does not match mode cardinalities");
}

LabeledTensor::LabeledTensor(const std::vector<Variable>& vars) {
  init_meta(vars);
  values_.assign(checked_product(dims_), 0.0);
}

std::size_t LabeledTensor::offset(const std::vector<int>& idx) const {
  if (idx.size() != labels_.size()) throw std::invalid_argument("index arity mismatch");
  std::size_t off = 0;
  for (size_t m = 0; m < idx.size(); ++m) {
    if (idx[m] < 0 || idx[m] >= dims_[m]) throw std::out_of_range("tensor index out of range");
    off += static_cast<std::size_t>(idx[m]) * strides_[m];
  }
  return off;
}

std::vector<int> LabeledTensor::modes_of(int var_id) const {
  std::vector<int> pos;
  for (int m = 0; m < order(); ++m)
    if (labels_[static_cast<size_t>(m)].var.id == var_id) pos.push_back(m);
  std::sort(pos.begin(), pos.end(), [&](int x, int y) {
    return labels_[static_cast<size_t>(x)].occ < labels_[static_cast<size_t>(y)].occ;
  });
  return pos;
}

bool LabeledTensor::has_var(int var_id) const { return !modes_of(var_id).empty(); }

int LabeledTensor::multiplicity(int var_id) const { return static_cast<int>(modes_of(var_id).size()); }

std::vector<Variable> LabeledTensor::distinct_vars() const {
  std::vector<Variable> vars;
  for (const ModeLabel& l : labels_)
    if (l.occ == 0) vars.push_back(l.var);
  return vars;
}

LabeledTensor permute_modes(const LabeledTensor& t, const std::vector<int>& perm) {
  if (perm.size() != static_cast<size_t>(t.order())) throw std::invalid_argument("permutation arity mismatch");
  std::vector<Variable> vars;
  vars.reserve(perm.size());
  for (int old : perm) vars.push_back(t.labels()[static_cast<size_t>(old)].var);
  LabeledTensor out(vars);
  if (t.order() == 0) {
    out.values_ = t.values();
    return out;
  }
  const int n = t.order();
  std::vector<std::size_t> src_stride(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m) src_stride[static_cast<size_t>(m)] = t.strides_[static_cast<size_t>(perm[static_cast<size_t>(m)])];
  std::vector<int> idx(static_cast<size_t>(n), 0);
  const std::vector<double>& src = t.values();
  std::vector<double>& dst = out.values_;
  std::size_t src_off = 0;
  for (std::size_t lin = 0; lin < dst.size(); ++lin) {
    dst[lin] = src[src_off];
    for (int m = n - 1; m >= 0; --m) {
      size_t sm = static_cast<size_t>(m);
      if (++idx[sm] < out.dim(m)) {
        src_off += src_stride[sm];
        break;
      }
      idx[sm] = 0;
      src_off -= src_stride[sm] * static_cast<std::size_t>(out.dim(m) - 1);
    }
  }
  return out;
}

LabeledTensor multiply(const LabeledTensor& a, const LabeledTensor& b, const ContractionSet& sigma) {
  const std::map<int, int> mult = count_multiset(sigma);
  std::vector<char> ca = select_contracted(a, mult, "left");
  std::vector<char> cb = select_contracted(b, mult, "right");

  Matricization ma = matricize(a, ca, /*canonical_rows=*/false);
  Matricization mb = matricize(b, cb, /*canonical_rows=*/false);
  if (ma.col_pos.size() != mb.col_pos.size()) throw std::logic_error("contraction arity mismatch");
  for (size_t k = 0; k < ma.col_pos.size(); ++k) {
    int da = a.dim(ma.col_pos[k]);
    int db = b.dim(mb.col_pos[k]);
    if (da != db) {
      const ModeLabel& l = a.labels()[static_cast<size_t>(ma.col_pos[k])];
      throw std::invalid_argument("dimension mismatch on contracted variable " + std::to_string(l.var.id));
    }
  }

  std::vector<Variable> out_vars;
  for (int p : ma.row_pos) out_vars.push_back(a.labels()[static_cast<size_t>(p)].var);
  for (int p : mb.row_pos) out_vars.push_back(b.labels()[static_cast<size_t>(p)].var);

  RowMat c = ma.mat * mb.mat.transpose();
  std::vector<double> vals(static_cast<std::size_t>(c.size()));
  Eigen::Map<RowMat>(vals.data(), c.rows(), c.cols()) = c;
  return LabeledTensor(out_vars, std::move(vals));
}

LabeledTensor identity_tensor(const std::vector<Variable>& sigma) {
  if (sigma.empty()) throw std::invalid_argument("identity over an empty mode set");
  std::vector<Variable> vars = sigma;
  vars.insert(vars.end(), sigma.begin(), sigma.end());
  for (size_t i = 0; i < sigma.size(); ++i)
    for (size_t j = i + 1; j < sigma.size(); ++j)
      if (sigma[i].id == sigma[j].id) throw std::invalid_argument("identity mode set must be distinct variables");
  LabeledTensor t(vars);
  std::size_t block = 1;
  for (const Variable& v : sigma) block *= static_cast<std::size_t>(v.card);
  for (std::size_t k = 0; k < block; ++k) t.mutable_values()[k * block + k] = 1.0;
  return t;
}

LabeledTensor invert(const LabeledTensor& f, const ContractionSet& omega, double rel_cutoff) {
  std::vector<char> col_sel = select_omega(f, omega);
  Matricization m = matricize(f, col_sel);
  if (m.row_pos.empty()) throw std::invalid_argument("inversion needs a non-empty row block");

  Eigen::JacobiSVD<RowMat> svd(m.mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_cutoff * (sv.size() > 0 ? sv(0) : 0.0);
  const Eigen::Index rows = m.mat.rows();
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) ++rank;
  if (rank < rows) {
    std::vector<double> svs(sv.data(), sv.data() + sv.size());
    std::ostringstream os;
    os << "matricization rank " << rank << " below row block size " << rows << "; singular values:";
    for (double s : svs) os << " " << s;
    throw RankDeficiencyError(os.str(), std::move(svs), static_cast<int>(rows));
  }

  // pinv(M) = V S^+ U^T; the inverse tensor's (sigma x omega) matricization
  // is pinv(M)^T so that contracting over omega yields the identity.
  Eigen::VectorXd inv_s = sv;
  for (Eigen::Index k = 0; k < inv_s.size(); ++k) inv_s(k) = sv(k) > cutoff ? 1.0 / sv(k) : 0.0;
  RowMat pinv_t = svd.matrixU() * inv_s.asDiagonal() * svd.matrixV().transpose();

  std::vector<Variable> out_vars;
  for (int p : m.row_pos) out_vars.push_back(f.labels()[static_cast<size_t>(p)].var);
  for (int p : m.col_pos) out_vars.push_back(f.labels()[static_cast<size_t>(p)].var);
  std::vector<double> vals(static_cast<std::size_t>(pinv_t.size()));
  Eigen::Map<RowMat>(vals.data(), pinv_t.rows(), pinv_t.cols()) = pinv_t;
  return LabeledTensor(out_vars, std::move(vals));
}

LabeledTensor diag_embed(const LabeledTensor& base, const std::map<int, int>& multiplicities) {
  for (const auto& [id, d] : multiplicities) {
    if (d <= 0) throw std::invalid_argument("diagonal multiplicity must be positive");
    if (base.multiplicity(id) != 1)
      throw std::invalid_argument("diag_embed key must label the base tensor exactly once: variable " +
                                  std::to_string(id));
  }
  std::vector<Variable> out_vars;
  std::vector<int> src_mode_of_out;  // base mode each output mode mirrors
  for (int m = 0; m < base.order(); ++m) {
    const Variable v = base.labels()[static_cast<size_t>(m)].var;
    auto it = multiplicities.find(v.id);
    int d = it == multiplicities.end() ? 1 : it->second;
    for (int k = 0; k < d; ++k) {
      out_vars.push_back(v);
      src_mode_of_out.push_back(m);
    }
  }
  LabeledTensor out(out_vars);
  std::vector<int> out_idx(out_vars.size(), 0);
  std::vector<int> base_idx(static_cast<size_t>(base.order()), 0);
  const std::size_t n = out.size();
  for (std::size_t lin = 0; lin < n; ++lin) {
    // decode lin -> out_idx (row-major)
    std::size_t rem = lin;
    for (int m = static_cast<int>(out_vars.size()) - 1; m >= 0; --m) {
      out_idx[static_cast<size_t>(m)] = static_cast<int>(rem % static_cast<std::size_t>(out.dim(m)));
      rem /= static_cast<std::size_t>(out.dim(m));
    }
    bool on_diag = true;
    std::fill(base_idx.begin(), base_idx.end(), -1);
    for (size_t m = 0; m < out_vars.size() && on_diag; ++m) {
      int& cell = base_idx[static_cast<size_t>(src_mode_of_out[m])];
      if (cell == -1)
        cell = out_idx[m];
      else if (cell != out_idx[m])
        on_diag = false;
    }
    if (on_diag) out.mutable_values()[lin] = base.at(base_idx);
  }
  return out;
}

LabeledTensor fix_index(const LabeledTensor& t, const std::map<int, int>& assignment) {
  LabeledTensor out = t;
  // Fix one variable at a time; order does not matter.
  for (const auto& [id, state] : assignment) {
    std::vector<int> pos = out.modes_of(id);
    if (pos.empty()) throw std::invalid_argument("fix_index: unknown variable " + std::to_string(id));
    // slice highest position first so earlier positions stay valid
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) out = fix_mode(out, *it, state);
  }
  return out;
}

LabeledTensor fix_mode(const LabeledTensor& t, int mode, int state) {
  if (mode < 0 || mode >= t.order()) throw std::invalid_argument("fix_mode: bad mode");
  if (state < 0 || state >= t.dim(mode)) throw std::out_of_range("fix_mode: state index out of range");
  std::vector<int> perm;
  for (int m = 0; m < t.order(); ++m)
    if (m != mode) perm.push_back(m);
  perm.push_back(mode);
  LabeledTensor moved = permute_modes(t, perm);
  std::vector<Variable> out_vars;
  for (int m = 0; m + 1 < moved.order(); ++m) out_vars.push_back(moved.labels()[static_cast<size_t>(m)].var);
  const int k = t.dim(mode);
  std::vector<double> vals;
  vals.reserve(moved.size() / static_cast<std::size_t>(k));
  const std::vector<double>& src = moved.values();
  for (std::size_t i = static_cast<std::size_t>(state); i < src.size(); i += static_cast<std::size_t>(k))
    vals.push_back(src[i]);
  return LabeledTensor(out_vars, std::move(vals));
}

LabeledTensor sum_out(const LabeledTensor& t, int var_id) {
  std::vector<int> pos = t.modes_of(var_id);
  if (pos.empty()) throw std::invalid_argument("sum_out: unknown variable " + std::to_string(var_id));
  LabeledTensor cur = t;
  while (cur.has_var(var_id)) {
    int mode = cur.modes_of(var_id).back();
    LabeledTensor acc = fix_mode(cur, mode, 0);
    for (int s = 1; s < cur.dim(mode); ++s) {
      LabeledTensor slice = fix_mode(cur, mode, s);
      for (std::size_t i = 0; i < acc.size(); ++i) acc.mutable_values()[i] += slice.values()[i];
    }
    cur = acc;
  }
  return cur;
}

namespace {

// Enumerates within-group permutations of duplicated labels, comparing
// entries for each candidate alignment. Group sizes stay tiny here (the
// pipeline produces at most triple repeats), so the search is cheap.
bool equivalent_search(const LabeledTensor& ca, const LabeledTensor& cb, double tol) {
  struct Group {
    int first_mode;
    int count;
  };
  std::vector<Group> groups;
  for (int m = 0; m < ca.order();) {
    int j = m;
    while (j < ca.order() && ca.labels()[static_cast<size_t>(j)].var.id == ca.labels()[static_cast<size_t>(m)].var.id) ++j;
    groups.push_back({m, j - m});
    m = j;
  }
  std::vector<std::vector<int>> group_perms(groups.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    group_perms[g].resize(static_cast<size_t>(groups[g].count));
    std::iota(group_perms[g].begin(), group_perms[g].end(), 0);
  }
  // odometer over per-group permutations
  while (true) {
    std::vector<int> perm(static_cast<size_t>(cb.order()));
    for (size_t g = 0; g < groups.size(); ++g)
      for (int k = 0; k < groups[g].count; ++k)
        perm[static_cast<size_t>(groups[g].first_mode + k)] =
            groups[g].first_mode + group_perms[g][static_cast<size_t>(k)];
    LabeledTensor pb = permute_modes(cb, perm);
    bool ok = true;
    for (std::size_t i = 0; i < ca.size() && ok; ++i)
      if (std::abs(ca.values()[i] - pb.values()[i]) > tol) ok = false;
    if (ok) return true;
    // advance: next permutation of the last group that has one
    int g = static_cast<int>(groups.size()) - 1;
    while (g >= 0 && !std::next_permutation(group_perms[static_cast<size_t>(g)].begin(),
                                            group_perms[static_cast<size_t>(g)].end()))
      --g;
    if (g < 0) return false;
  }
}

}  // namespace

bool equivalent(const LabeledTensor& a, const LabeledTensor& b, double tol) {
  if (a.order() != b.order()) return false;
  auto canon = [](const LabeledTensor& t) {
    std::vector<char> none(static_cast<size_t>(t.order()), 0);
    std::vector<int> perm = canonical_positions(t, std::vector<char>(static_cast<size_t>(t.order()), 1));
    return permute_modes(t, perm);
  };
  LabeledTensor ca = canon(a);
  LabeledTensor cb = canon(b);
  for (int m = 0; m < ca.order(); ++m) {
    if (!(ca.labels()[static_cast<size_t>(m)] == cb.labels()[static_cast<size_t>(m)])) return false;
    if (ca.dim(m) != cb.dim(m)) return false;
  }
  if (ca.order() == 0) return std::abs(ca.values()[0] - cb.values()[0]) <= tol;
  return equivalent_search(ca, cb, tol);
}

LabeledTensor svd_projector(const LabeledTensor& t, const ContractionSet& row_vars, int rank,
                            Variable projected) {
  std::vector<char> row_sel = select_vars(t, row_vars);
  std::vector<char> col_sel(row_sel.size());
  for (size_t i = 0; i < row_sel.size(); ++i) col_sel[i] = !row_sel[i];
  Matricization m = matricize(t, col_sel);
  if (rank <= 0 || rank > std::min(m.mat.rows(), m.mat.cols()))
    throw std::invalid_argument("svd_projector: rank exceeds matrix dimensions");
  if (projected.card != rank) throw std::invalid_argument("svd_projector: projected mode size must equal rank");

  Eigen::JacobiSVD<RowMat> svd(m.mat, Eigen::ComputeThinU);
  RowMat u = svd.matrixU().leftCols(rank);
  std::vector<Variable> out_vars;
  for (int p : m.row_pos) out_vars.push_back(t.labels()[static_cast<size_t>(p)].var);
  out_vars.push_back(projected);
  std::vector<double> vals(static_cast<std::size_t>(u.size()));
  Eigen::Map<RowMat>(vals.data(), u.rows(), u.cols()) = u;
  return LabeledTensor(out_vars, std::move(vals));
}

std::vector<double> matricization_singular_values(const LabeledTensor& t, const ContractionSet& row_vars) {
  std::vector<char> row_sel = select_vars(t, row_vars);
  std::vector<char> col_sel(row_sel.size());
  for (size_t i = 0; i < row_sel.size(); ++i) col_sel[i] = !row_sel[i];
  Matricization m = matricize(t, col_sel);
  Eigen::JacobiSVD<RowMat> svd(m.mat);
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

std::string to_string(const LabeledTensor& t) {
  std::ostringstream os;
  os << "[";
  for (int m = 0; m < t.order(); ++m) {
    if (m) os << ",";
    os << t.labels()[static_cast<size_t>(m)].var.id << ":" << t.labels()[static_cast<size_t>(m)].occ;
  }
  os << "](";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) os << ",";
    if (i > 24) {
      os << "...";
      break;
    }
    os << t.values()[i];
  }
  os << ")";
  return os.str();
}

}  // namespace sjt
