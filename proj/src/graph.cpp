#include "gtsad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "gtsad/rng.hpp"

namespace gtsad {

namespace {

void checkConnected(int n, const Tensor& w) {
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> queue{0};
    seen[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        int u = queue.back();
        queue.pop_back();
        for (int v = 0; v < n; ++v) {
            if (!seen[static_cast<size_t>(v)] && w.at(u, v) > 0.0) {
                seen[static_cast<size_t>(v)] = 1;
                ++reached;
                queue.push_back(v);
            }
        }
    }
    if (reached != n) {
        throw std::invalid_argument("graph is not connected: reached " + std::to_string(reached) +
                                    " of " + std::to_string(n) + " nodes");
    }
}

} // namespace

WeightedGraph::WeightedGraph(int nodeCount, Tensor weights) : n_(nodeCount), weights_(std::move(weights)) {
    if (n_ < 2) throw std::invalid_argument("graph needs at least 2 nodes, got " + std::to_string(n_));
    if (weights_.rank() != 2 || weights_.dim(0) != n_ || weights_.dim(1) != n_) {
        throw std::invalid_argument("weight matrix shape " + weights_.shapeString() + " does not match " +
                                    std::to_string(n_) + " nodes");
    }
    for (int i = 0; i < n_; ++i) {
        if (weights_.at(i, i) != 0.0) {
            throw std::invalid_argument("weight matrix has nonzero diagonal at node " + std::to_string(i));
        }
        for (int j = 0; j < n_; ++j) {
            double w = weights_.at(i, j);
            if (!(w >= 0.0)) {
                throw std::invalid_argument("negative or non-finite weight at (" + std::to_string(i) + ", " +
                                            std::to_string(j) + ")");
            }
            if (w != weights_.at(j, i)) {
                throw std::invalid_argument("weight matrix is not symmetric at (" + std::to_string(i) + ", " +
                                            std::to_string(j) + ")");
            }
        }
    }
    checkConnected(n_, weights_);
}

Tensor WeightedGraph::degrees() const {
    Tensor d = Tensor::zeros({n_});
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += weights_.at(i, j);
        d[static_cast<size_t>(i)] = s;
    }
    return d;
}

WeightedGraph buildGridGraph(int rows, int cols) {
    if (rows < 1 || cols < 1 || rows * cols < 2) {
        throw std::invalid_argument("grid needs at least 2 nodes, got " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    int n = rows * cols;
    Tensor w = Tensor::zeros({n, n});
    auto id = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) {
                w.at(id(r, c), id(r, c + 1)) = 1.0;
                w.at(id(r, c + 1), id(r, c)) = 1.0;
            }
            if (r + 1 < rows) {
                w.at(id(r, c), id(r + 1, c)) = 1.0;
                w.at(id(r + 1, c), id(r, c)) = 1.0;
            }
        }
    }
    return WeightedGraph(n, std::move(w));
}

Tensor normalizedLaplacian(const WeightedGraph& g) {
    int n = g.nodeCount();
    Tensor d = g.degrees();
    for (int i = 0; i < n; ++i) {
        if (d[static_cast<size_t>(i)] <= 0.0) {
            throw std::domain_error("node " + std::to_string(i) + " has zero degree");
        }
    }
    Tensor l = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        double di = 1.0 / std::sqrt(d[static_cast<size_t>(i)]);
        for (int j = 0; j < n; ++j) {
            double w = g.weights().at(i, j);
            if (w != 0.0) {
                l.at(i, j) = -w * di / std::sqrt(d[static_cast<size_t>(j)]);
            }
        }
        l.at(i, i) += 1.0;
    }
    return l;
}

double estimateLambdaMax(const Tensor& sym, double tol, int maxIterations) {
    if (sym.rank() != 2 || sym.dim(0) != sym.dim(1)) {
        throw std::invalid_argument("expected a square matrix, got shape " + sym.shapeString());
    }
    int n = sym.dim(0);
    // Random start: a fixed vector such as all-ones can be orthogonal to the
    // dominant eigenvector (e.g. the two-node path graph), stalling forever.
    Rng rng(0x9e3779b97f4a7c15ull);
    std::vector<double> v(static_cast<size_t>(n));
    double norm = 0.0;
    for (double& vi : v) {
        vi = rng.normal();
        norm += vi * vi;
    }
    norm = std::sqrt(norm);
    for (double& vi : v) vi /= norm;

    std::vector<double> av(static_cast<size_t>(n));
    double lambda = 0.0;
    for (int iter = 0; iter < maxIterations; ++iter) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += sym.at(i, j) * v[static_cast<size_t>(j)];
            av[static_cast<size_t>(i)] = s;
        }
        double rayleigh = 0.0;
        double avNorm = 0.0;
        for (int i = 0; i < n; ++i) {
            rayleigh += v[static_cast<size_t>(i)] * av[static_cast<size_t>(i)];
            avNorm += av[static_cast<size_t>(i)] * av[static_cast<size_t>(i)];
        }
        avNorm = std::sqrt(avNorm);
        if (avNorm == 0.0) return 0.0; // start vector is in the null space of a singular matrix
        if (iter > 0 && std::abs(rayleigh - lambda) <= tol * std::max(1.0, std::abs(rayleigh))) {
            return rayleigh;
        }
        lambda = rayleigh;
        for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = av[static_cast<size_t>(i)] / avNorm;
    }
    throw PowerIterationError("power iteration did not converge within " + std::to_string(maxIterations) +
                                  " iterations (best estimate " + std::to_string(lambda) + ")",
                              lambda);
}

ScaledLaplacian::ScaledLaplacian(const WeightedGraph& g, double lambdaTol) : n_(g.nodeCount()) {
    laplacian_ = normalizedLaplacian(g);
    lambdaMax_ = estimateLambdaMax(laplacian_, lambdaTol);
    if (lambdaMax_ <= 0.0) {
        throw std::domain_error("estimated lambda_max is not positive: " + std::to_string(lambdaMax_));
    }
    double s = 2.0 / lambdaMax_;
    dense_ = Tensor::zeros({n_, n_});
    sparse_.n = n_;
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            double e = s * laplacian_.at(i, j) - (i == j ? 1.0 : 0.0);
            dense_.at(i, j) = e;
            if (e != 0.0) sparse_.add(i, j, e);
        }
    }
}

Val chebyshevApply(Tape& tape, Val coefficients, const ScaledLaplacian& sl, Val x) {
    const Tensor& cv = tape.value(coefficients);
    if (cv.rank() != 3) {
        throw std::invalid_argument("filter coefficients must be rank-3 (order, cIn, cOut), got " +
                                    cv.shapeString());
    }
    int k = cv.dim(0);
    int cIn = cv.dim(1);
    int cOut = cv.dim(2);
    const Tensor& xv = tape.value(x);
    if (xv.rank() != 2 || xv.dim(0) != sl.nodeCount() || xv.dim(1) != cIn) {
        throw std::invalid_argument("signal shape " + xv.shapeString() + " does not match (" +
                                    std::to_string(sl.nodeCount()) + ", " + std::to_string(cIn) + ")");
    }
    if (k < 1) throw std::invalid_argument("filter order must be at least 1");

    auto weight = [&](int order) {
        Val flat = tape.slice(coefficients, order * cIn * cOut, cIn * cOut);
        return tape.reshape(flat, {cIn, cOut});
    };

    Val prev = x; // T_0 x = x
    Val y = tape.matmul(prev, weight(0));
    if (k == 1) return y;

    Val cur = tape.sparseMatmul(&sl.matrix(), x); // T_1 x = Lt x
    y = tape.add(y, tape.matmul(cur, weight(1)));
    for (int order = 2; order < k; ++order) {
        Val next = tape.sub(tape.scale(tape.sparseMatmul(&sl.matrix(), cur), 2.0), prev);
        y = tape.add(y, tape.matmul(next, weight(order)));
        prev = cur;
        cur = next;
    }
    return y;
}

Tensor chebyshevApply(const ChebyshevFilter& filter, const ScaledLaplacian& sl, const Tensor& x) {
    Tape tape;
    Val c = tape.constantRef(&filter.coefficients);
    Val xv = tape.constantRef(&x);
    return tape.value(chebyshevApply(tape, c, sl, xv));
}

void jacobiEigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors, double tol) {
    if (sym.rank() != 2 || sym.dim(0) != sym.dim(1)) {
        throw std::invalid_argument("expected a square matrix, got shape " + sym.shapeString());
    }
    int n = sym.dim(0);
    Tensor a = sym;
    Tensor v = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double frob = 0.0;
    for (int i = 0; i < n * n; ++i) frob += sym[static_cast<size_t>(i)] * sym[static_cast<size_t>(i)];
    frob = std::sqrt(frob);
    double target = tol * std::max(frob, 1e-300);

    auto offNorm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i != j) s += a.at(i, j) * a.at(i, j);
            }
        }
        return std::sqrt(s);
    };

    const int maxSweeps = 100;
    int sweep = 0;
    while (offNorm() > target) {
        if (++sweep > maxSweeps) {
            throw std::runtime_error("Jacobi eigendecomposition did not converge in " +
                                     std::to_string(maxSweeps) + " sweeps");
        }
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (apq == 0.0) continue;
                double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int i = 0; i < n; ++i) {
                    double aip = a.at(i, p);
                    double aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    double api = a.at(p, i);
                    double aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    double vip = v.at(i, p);
                    double viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a.at(x, x) < a.at(y, y); });

    eigenvalues = Tensor::zeros({n});
    eigenvectors = Tensor::zeros({n, n});
    for (int k = 0; k < n; ++k) {
        int src = order[static_cast<size_t>(k)];
        eigenvalues[static_cast<size_t>(k)] = a.at(src, src);
        for (int i = 0; i < n; ++i) eigenvectors.at(i, k) = v.at(i, src);
    }
}

Tensor spectralOracle(const Tensor& laplacian, const Tensor& monomialCoefficients, const Tensor& x) {
    if (laplacian.rank() != 2 || laplacian.dim(0) != laplacian.dim(1)) {
        throw std::invalid_argument("expected a square matrix, got shape " + laplacian.shapeString());
    }
    int n = laplacian.dim(0);
    if (n > 64) {
        throw std::invalid_argument("dense spectral oracle refuses n > 64, got n = " + std::to_string(n));
    }
    if (monomialCoefficients.rank() != 1 || monomialCoefficients.size() < 1) {
        throw std::invalid_argument("monomial coefficients must be a nonempty vector, got " +
                                    monomialCoefficients.shapeString());
    }
    bool vec = x.rank() == 1;
    if ((vec && x.dim(0) != n) || (!vec && (x.rank() != 2 || x.dim(0) != n))) {
        throw std::invalid_argument("signal shape " + x.shapeString() + " does not match n = " +
                                    std::to_string(n));
    }
    int channels = vec ? 1 : x.dim(1);

    Tensor lambda, u;
    jacobiEigen(laplacian, lambda, u, 1e-12);

    int k = monomialCoefficients.size();
    Tensor g = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) {
        double li = lambda[static_cast<size_t>(i)];
        double acc = monomialCoefficients[static_cast<size_t>(k - 1)];
        for (int j = k - 2; j >= 0; --j) acc = acc * li + monomialCoefficients[static_cast<size_t>(j)];
        g[static_cast<size_t>(i)] = acc;
    }

    Tensor y = vec ? Tensor::zeros({n}) : Tensor::zeros({n, channels});
    for (int c = 0; c < channels; ++c) {
        for (int e = 0; e < n; ++e) {
            double proj = 0.0;
            for (int i = 0; i < n; ++i) {
                double xi = vec ? x[static_cast<size_t>(i)] : x.at(i, c);
                proj += u.at(i, e) * xi;
            }
            proj *= g[static_cast<size_t>(e)];
            for (int i = 0; i < n; ++i) {
                double& yi = vec ? y[static_cast<size_t>(i)] : y.at(i, c);
                yi += u.at(i, e) * proj;
            }
        }
    }
    return y;
}

void writeEdgeList(const WeightedGraph& g, std::ostream& out) {
    int n = g.nodeCount();
    char buf[64];
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            double w = g.weights().at(u, v);
            if (w != 0.0) {
                std::snprintf(buf, sizeof buf, "%d %d %.17g\n", u, v, w);
                out << buf;
            }
        }
    }
}

WeightedGraph readEdgeList(std::istream& in) {
    struct Edge {
        int u, v;
        double w;
    };
    std::vector<Edge> edges;
    std::map<std::pair<int, int>, bool> seen;
    int maxNode = -1;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        Edge e{};
        if (!(ls >> e.u >> e.v >> e.w)) {
            throw std::invalid_argument("edge list line " + std::to_string(lineNo) + " is malformed: " + line);
        }
        if (e.u < 0 || e.v < 0 || e.u == e.v) {
            throw std::invalid_argument("edge list line " + std::to_string(lineNo) + " has invalid endpoints");
        }
        if (!(e.w > 0.0)) {
            throw std::invalid_argument("edge list line " + std::to_string(lineNo) + " has nonpositive weight");
        }
        auto key = std::minmax(e.u, e.v);
        if (seen.count(key)) {
            throw std::invalid_argument("edge list line " + std::to_string(lineNo) + " repeats edge " +
                                        std::to_string(e.u) + "-" + std::to_string(e.v));
        }
        seen[key] = true;
        edges.push_back(e);
        maxNode = std::max({maxNode, e.u, e.v});
    }
    if (edges.empty()) throw std::invalid_argument("edge list is empty");
    int n = maxNode + 1;
    Tensor w = Tensor::zeros({n, n});
    for (const Edge& e : edges) {
        w.at(e.u, e.v) = e.w;
        w.at(e.v, e.u) = e.w;
    }
    return WeightedGraph(n, std::move(w));
}

} // namespace gtsad
