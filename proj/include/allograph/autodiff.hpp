// allograph/autodiff.hpp
//
// Copyright 2026 The Allograph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Reverse-mode automatic differentiation over dense tensors. Forward values
// are computed eagerly; every operation records a backward closure on a tape.
// Calling backward() on a scalar loss replays the closures in reverse and
// accumulates gradients into every node, leaves included.
//
// A tape and the values on it belong to a single worker. Independent tapes
// may run concurrently; gradient maps are merged by summation outside.

#ifndef ALLOGRAPH_AUTODIFF_HPP_
#define ALLOGRAPH_AUTODIFF_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "allograph/common.hpp"
#include "allograph/tensor.hpp"

namespace allograph::ad {

// Handle to a value on a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  const Tensor& value(Var v) const { return node(v).value; }
  const Tensor& grad(Var v) const { return node(v).grad; }
  Tensor& grad_ref(Var v) { return node(v).grad; }

  Var leaf(Tensor value, bool trainable = false) {
    return record("leaf", std::move(value), nullptr, trainable);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double value) { return leaf(Tensor::scalar(value), false); }

  // Records an operation whose forward value has already been computed.
  // The backward closure receives the tape and the output node and must add
  // its contribution into the gradients of the operation's inputs.
  Var record(std::string kind, Tensor value,
             std::function<void(Tape&, Var)> backward, bool trainable = false) {
    Node n;
    n.kind = std::move(kind);
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.backward = std::move(backward);
    n.trainable = trainable;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  // ---- elementwise and linear algebra ----

  Var add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.same_shape(tb)) {
      Tensor out = ta;
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
      return record("add", std::move(out), [a, b](Tape& t, Var o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
      });
    }
    // Row broadcast: [T x C] + [C].
    if (ta.rank() == 2 && tb.rank() == 1 && ta.shape[1] == tb.shape[0]) {
      Tensor out = ta;
      const std::size_t rows = ta.shape[0], cols = ta.shape[1];
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += tb.data[c];
      return record("add", std::move(out), [a, b, rows, cols](Tape& t, Var o) {
        const Tensor& g = t.grad(o);
        Tensor& ga = t.grad_ref(a);
        Tensor& gb = t.grad_ref(b);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            ga.at(r, c) += g.at(r, c);
            gb.data[c] += g.at(r, c);
          }
      });
    }
    throw_numeric("add: incompatible shapes " + ta.shape_str() + " and " +
                  tb.shape_str());
  }

  Var mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb))
      throw_numeric("mul: incompatible shapes " + ta.shape_str() + " and " +
                    tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
    return record("mul", std::move(out), [a, b](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * vb.data[i];
        gb.data[i] += g.data[i] * va.data[i];
      }
    });
  }

  Var scale(Var a, double c) {
    Tensor out = value(a);
    for (double& v : out.data) v *= c;
    return record("scale", std::move(out), [a, c](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  Var matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
      throw_numeric("matmul: incompatible shapes " + ta.shape_str() + " and " +
                    tb.shape_str());
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta.at(i, p);
        if (av == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * tb.at(p, j);
      }
    return record("matmul", std::move(out), [a, b, m, k, n](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gv = g.at(i, j);
          if (gv == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            ga.at(i, p) += gv * vb.at(p, j);
            gb.at(p, j) += gv * va.at(i, p);
          }
        }
    });
  }

  Var log(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) {
      if (v <= 0.0) throw_numeric("log: non-positive input " + precise(v));
      v = std::log(v);
    }
    return record("log", std::move(out), [a](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& va = t.value(a);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] / va.data[i];
    });
  }

  Var exp(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::exp(v);
    return record("exp", std::move(out), [a](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& vo = t.value(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * vo.data[i];
    });
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::tanh(v);
    return record("tanh", std::move(out), [a](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& vo = t.value(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * (1.0 - vo.data[i] * vo.data[i]);
    });
  }

  Var relu(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return record("relu", std::move(out), [a](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& va = t.value(a);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (va.data[i] > 0.0) ga.data[i] += g.data[i];
    });
  }

  // ---- reductions over the last axis ----

  // [T x C] -> [T]; [C] -> scalar.
  Var logsumexp(Var a) {
    const Tensor& ta = value(a);
    const std::size_t rows = ta.rows(), cols = ta.cols();
    if (cols == 0) throw_numeric("logsumexp: empty input");
    Tensor out = ta.rank() == 2 ? Tensor::zeros({rows}) : Tensor::scalar(0.0);
    for (std::size_t r = 0; r < rows; ++r)
      out.data[r] = row_logsumexp(&ta.data[r * cols], cols);
    return record("logsumexp", std::move(out), [a, rows, cols](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& va = t.value(a);
      const Tensor& vo = t.value(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t r = 0; r < rows; ++r) {
        const double gv = g.data[r];
        if (gv == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c)
          ga.data[r * cols + c] += gv * std::exp(va.data[r * cols + c] - vo.data[r]);
      }
    });
  }

  Var softmax(Var a) {
    const Tensor& ta = value(a);
    const std::size_t rows = ta.rows(), cols = ta.cols();
    Tensor out = ta;
    for (std::size_t r = 0; r < rows; ++r) {
      const double lse = row_logsumexp(&ta.data[r * cols], cols);
      for (std::size_t c = 0; c < cols; ++c)
        out.data[r * cols + c] = std::exp(ta.data[r * cols + c] - lse);
    }
    return record("softmax", std::move(out), [a, rows, cols](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& vo = t.value(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
          dot += g.data[r * cols + c] * vo.data[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          ga.data[r * cols + c] +=
              vo.data[r * cols + c] * (g.data[r * cols + c] - dot);
      }
    });
  }

  Var log_softmax(Var a) {
    const Tensor& ta = value(a);
    const std::size_t rows = ta.rows(), cols = ta.cols();
    Tensor out = ta;
    for (std::size_t r = 0; r < rows; ++r) {
      const double lse = row_logsumexp(&ta.data[r * cols], cols);
      for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] -= lse;
    }
    return record("log_softmax", std::move(out), [a, rows, cols](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      const Tensor& vo = t.value(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gsum += g.data[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          ga.data[r * cols + c] +=
              g.data[r * cols + c] - std::exp(vo.data[r * cols + c]) * gsum;
      }
    });
  }

  Var reduce_sum(Var a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    return record("reduce_sum", Tensor::scalar(s), [a](Tape& t, Var o) {
      const double g = t.grad(o).data[0];
      Tensor& ga = t.grad_ref(a);
      for (double& v : ga.data) v += g;
    });
  }

  // ---- structural ops ----

  // Replaces the entries of dropped columns with `fill`; no gradient flows
  // to dropped entries. `keep` has one flag per column.
  Var mask_cols(Var a, const std::vector<bool>& keep, double fill = kLogZero) {
    const Tensor& ta = value(a);
    const std::size_t rows = ta.rows(), cols = ta.cols();
    if (keep.size() != cols)
      throw_numeric("mask_cols: mask size " + std::to_string(keep.size()) +
                    " vs " + std::to_string(cols) + " columns");
    Tensor out = ta;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (!keep[c]) out.data[r * cols + c] = fill;
    return record("mask", std::move(out), [a, keep, rows, cols](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          if (keep[c]) ga.data[r * cols + c] += g.data[r * cols + c];
    });
  }

  // Gathers a subset of rows: out[i] = a[rows[i]].
  Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2) throw_numeric("gather_rows: rank-2 input required");
    const std::size_t cols = ta.shape[1];
    Tensor out = Tensor::zeros({rows.size(), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= ta.shape[0]) throw_numeric("gather_rows: index out of range");
      for (std::size_t c = 0; c < cols; ++c) out.at(i, c) = ta.at(rows[i], c);
    }
    return record("gather", std::move(out), [a, rows, cols](Tape& t, Var o) {
      const Tensor& g = t.grad(o);
      Tensor& ga = t.grad_ref(a);
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < cols; ++c)
          ga.data[rows[i] * cols + c] += g.data[i * cols + c];
    });
  }

  // Mean over consecutive groups of k rows; the last group may be shorter.
  Var mean_pool_rows(Var a, std::size_t k) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2 || k == 0) throw_numeric("mean_pool_rows: bad input");
    const std::size_t rows = ta.shape[0], cols = ta.shape[1];
    const std::size_t out_rows = (rows + k - 1) / k;
    Tensor out = Tensor::zeros({out_rows, cols});
    for (std::size_t i = 0; i < out_rows; ++i) {
      const std::size_t lo = i * k, hi = std::min(rows, lo + k);
      for (std::size_t r = lo; r < hi; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(i, c) += ta.at(r, c);
      for (std::size_t c = 0; c < cols; ++c) out.at(i, c) /= double(hi - lo);
    }
    return record("mean_pool", std::move(out),
                  [a, k, rows, cols, out_rows](Tape& t, Var o) {
                    const Tensor& g = t.grad(o);
                    Tensor& ga = t.grad_ref(a);
                    for (std::size_t i = 0; i < out_rows; ++i) {
                      const std::size_t lo = i * k, hi = std::min(rows, lo + k);
                      const double inv = 1.0 / double(hi - lo);
                      for (std::size_t r = lo; r < hi; ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                          ga.data[r * cols + c] += g.data[i * cols + c] * inv;
                    }
                  });
  }

  // Log-softmax of a rank-1 tensor within groups given by `group` labels.
  // Entries sharing a label normalize together.
  Var segment_log_softmax(Var a, const std::vector<int>& group) {
    const Tensor& ta = value(a);
    if (ta.rank() != 1 || group.size() != ta.data.size())
      throw_numeric("segment_log_softmax: bad input shapes");
    std::map<int, double> lse;
    for (std::size_t i = 0; i < group.size(); ++i) {
      auto it = lse.find(group[i]);
      if (it == lse.end())
        lse[group[i]] = ta.data[i];
      else
        it->second = logadd(it->second, ta.data[i]);
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < group.size(); ++i) out.data[i] -= lse[group[i]];
    return record("segment_log_softmax", std::move(out),
                  [a, group](Tape& t, Var o) {
                    const Tensor& g = t.grad(o);
                    const Tensor& vo = t.value(o);
                    Tensor& ga = t.grad_ref(a);
                    std::map<int, double> gsum;
                    for (std::size_t i = 0; i < group.size(); ++i)
                      gsum[group[i]] += g.data[i];
                    for (std::size_t i = 0; i < group.size(); ++i)
                      ga.data[i] += g.data[i] -
                                    std::exp(vo.data[i]) * gsum[group[i]];
                  });
  }

  // ---- backward ----

  // Seeds d(loss)/d(loss)=1 and replays the tape in reverse. After this the
  // tape is consumed; gradients accumulate, so a loss formed as a sum of two
  // graphs contributes both parts to shared leaves.
  void backward(Var loss) {
    if (consumed_) throw_numeric("backward: tape already consumed");
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size())
      throw_numeric("backward: invalid loss node");
    if (!value(loss).is_scalar())
      throw_numeric("backward: loss must be scalar, got shape " +
                    value(loss).shape_str());
    grad_ref(loss).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      if (nodes_[i].backward) nodes_[i].backward(*this, Var{i});
    }
    consumed_ = true;
  }

 private:
  struct Node {
    std::string kind;
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Var)> backward;
    bool trainable = false;
  };

  const Node& node(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw_numeric("invalid tape handle");
    return nodes_[v.id];
  }
  Node& node(Var v) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw_numeric("invalid tape handle");
    return nodes_[v.id];
  }

  static double row_logsumexp(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - m);
    return m + std::log(s);
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---- finite-difference gradient checking ----

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool all_pass = true;
};

// Checks the analytic gradient of a scalar-valued function against central
// finite differences. `build` receives a fresh tape plus one Var per leaf
// (in the order of `leaves`) and returns the scalar loss.
template <typename BuildFn>
GradCheckReport gradcheck(BuildFn build,
                          std::vector<std::pair<std::string, Tensor>> leaves,
                          double step = 1e-5, double tolerance = 1e-4) {
  GradCheckReport report;

  auto eval = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const Tensor& t : values) vars.push_back(tape.leaf(t, true));
    Var loss = build(tape, vars);
    return tape.value(loss).data[0];
  };

  std::vector<Tensor> values;
  values.reserve(leaves.size());
  for (auto& [name, t] : leaves) values.push_back(t);

  // Analytic pass.
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : values) vars.push_back(tape.leaf(t, true));
  Var loss = build(tape, vars);
  tape.backward(loss);

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    GradCheckEntry entry;
    entry.name = leaves[li].first;
    const Tensor& analytic = tape.grad(vars[li]);
    for (std::size_t i = 0; i < values[li].data.size(); ++i) {
      std::vector<Tensor> perturbed = values;
      perturbed[li].data[i] += step;
      const double fp = eval(perturbed);
      perturbed[li].data[i] = values[li].data[i] - step;
      const double fm = eval(perturbed);
      const double numeric = (fp - fm) / (2.0 * step);
      // The floor keeps central-difference noise on near-zero gradients
      // from registering as a relative error.
      const double denom =
          std::max({std::fabs(analytic.data[i]), std::fabs(numeric), 1e-2});
      const double rel = std::fabs(analytic.data[i] - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < tolerance;
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace allograph::ad

#endif  // ALLOGRAPH_AUTODIFF_HPP_
