#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <limits>
#include <vector>

namespace dhwflex::qp {

// Dense convex QP
//     minimize   0.5 y'H y + q'y
//     subject to A y >= b
// solved with a primal active-set method (null-space form). H may be positive
// semidefinite; zero-curvature directions are followed to a blocking row,
// which exists whenever the feasible set is bounded along them. The caller
// must supply a feasible starting point.
//
// Sizes here are tiny (tens of variables), so everything is dense and the
// working-set linear algebra is redone from scratch each iteration.

enum class QpStatus { Optimal, InfeasibleStart, Unbounded, IterLimit };

struct QpOptions {
    double feas_tol = 1e-9;        // start-point feasibility check
    double mult_tol = 1e-9;        // dual feasibility threshold
    double step_tol = 1e-11;       // ||p|| below this counts as stationary
    double zero_grad_tol = 1e-10;  // reduced-gradient threshold in flat directions
    int max_iter = 5000;
};

struct QpResult {
    QpStatus status = QpStatus::IterLimit;
    Eigen::VectorXd y;
    Eigen::VectorXd lambda;  // one multiplier per row, zero when inactive
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
};

struct KktReport {
    double stationarity = 0;     // ||H y + q - A' lambda||_inf
    double min_slack = 0;        // min_i (a_i'y - b_i)
    double complementarity = 0;  // max_i lambda_i * slack_i
};

inline KktReport check_kkt(const Eigen::MatrixXd& H, const Eigen::VectorXd& q,
                           const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& y, const Eigen::VectorXd& lambda) {
    KktReport r;
    Eigen::VectorXd stat = H * y + q;
    if (A.rows() > 0) stat -= A.transpose() * lambda;
    r.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
    r.min_slack = 0.0;
    r.complementarity = 0.0;
    if (A.rows() > 0) {
        Eigen::VectorXd slack = A * y - b;
        r.min_slack = slack.minCoeff();
        r.complementarity = (lambda.array() * slack.array()).abs().maxCoeff();
    }
    return r;
}

inline QpResult solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& q,
                      const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& y0, const QpOptions& opt = {}) {
    const int n = static_cast<int>(y0.size());
    const int m = static_cast<int>(A.rows());
    QpResult res;
    res.y = y0;
    res.lambda = Eigen::VectorXd::Zero(m);

    if (m > 0) {
        const double worst = (A * y0 - b).minCoeff();
        if (worst < -opt.feas_tol) {
            res.status = QpStatus::InfeasibleStart;
            return res;
        }
    }

    Eigen::VectorXd y = y0;
    std::vector<int> work;  // active rows treated as equalities
    std::vector<char> in_work(m, 0);
    int degenerate_streak = 0;

    for (int iter = 0; iter < opt.max_iter; ++iter) {
        res.iterations = iter + 1;

        // Null-space basis of the working-set rows.
        Eigen::MatrixXd Z;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
        int rank = 0;
        if (work.empty()) {
            Z = Eigen::MatrixXd::Identity(n, n);
        } else {
            Eigen::MatrixXd At(n, work.size());
            for (size_t k = 0; k < work.size(); ++k) At.col(k) = A.row(work[k]).transpose();
            qr.compute(At);
            rank = static_cast<int>(qr.rank());
            Eigen::MatrixXd Q = qr.householderQ();
            Z = Q.rightCols(n - rank);
        }

        const Eigen::VectorXd grad = H * y + q;
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        bool flat_direction = false;

        if (Z.cols() > 0) {
            const Eigen::MatrixXd Hz = Z.transpose() * H * Z;
            const Eigen::VectorXd gz = Z.transpose() * grad;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hz);
            const Eigen::VectorXd evals = es.eigenvalues();
            const Eigen::MatrixXd evecs = es.eigenvectors();
            const double lam_max = evals.size() ? std::max(0.0, evals.maxCoeff()) : 0.0;
            const double tau = std::max(1e-12, 1e-12 * lam_max);

            Eigen::VectorXd flat = Eigen::VectorXd::Zero(Z.cols());
            Eigen::VectorXd newton = Eigen::VectorXd::Zero(Z.cols());
            for (int i = 0; i < evals.size(); ++i) {
                const double gi = evecs.col(i).dot(gz);
                if (evals[i] > tau) {
                    newton -= (gi / evals[i]) * evecs.col(i);
                } else {
                    flat -= gi * evecs.col(i);
                }
            }
            if (flat.norm() > opt.zero_grad_tol * (1.0 + grad.norm())) {
                p = Z * flat;
                flat_direction = true;  // descent at zero curvature: run to a blocking row
            } else {
                p = Z * newton;
            }
        }

        if (!flat_direction && p.norm() <= opt.step_tol * (1.0 + y.norm())) {
            // Stationary on the working set; check multipliers.
            if (work.empty()) {
                res.status = QpStatus::Optimal;
                break;
            }
            Eigen::MatrixXd At(n, work.size());
            for (size_t k = 0; k < work.size(); ++k) At.col(k) = A.row(work[k]).transpose();
            Eigen::VectorXd lam = At.colPivHouseholderQr().solve(grad);

            int drop = -1;
            double most_negative = -opt.mult_tol * (1.0 + grad.cwiseAbs().maxCoeff());
            if (degenerate_streak > 2 * (m + n)) {
                // Bland-style fallback: first negative index.
                for (size_t k = 0; k < work.size(); ++k)
                    if (lam[static_cast<int>(k)] < most_negative) {
                        drop = static_cast<int>(k);
                        break;
                    }
            } else {
                for (size_t k = 0; k < work.size(); ++k)
                    if (lam[static_cast<int>(k)] < most_negative) {
                        most_negative = lam[static_cast<int>(k)];
                        drop = static_cast<int>(k);
                    }
            }
            if (drop < 0) {
                res.lambda.setZero();
                for (size_t k = 0; k < work.size(); ++k)
                    res.lambda[work[k]] = std::max(0.0, lam[static_cast<int>(k)]);
                res.status = QpStatus::Optimal;
                break;
            }
            in_work[work[drop]] = 0;
            work.erase(work.begin() + drop);
            continue;
        }

        // Ratio test against rows outside the working set.
        double alpha = flat_direction ? std::numeric_limits<double>::infinity() : 1.0;
        int blocking = -1;
        for (int r = 0; r < m; ++r) {
            if (in_work[r]) continue;
            const double dir = A.row(r).dot(p);
            if (dir >= -1e-13 * (1.0 + p.cwiseAbs().maxCoeff())) continue;
            const double slack = A.row(r).dot(y) - b[r];
            const double a = std::max(0.0, slack) / (-dir);
            if (a < alpha - 1e-15) {
                alpha = a;
                blocking = r;
            } else if (blocking >= 0 && a < alpha + 1e-15 && r < blocking) {
                blocking = r;  // deterministic tie-break
            }
        }

        if (!std::isfinite(alpha)) {
            res.status = QpStatus::Unbounded;
            return res;
        }
        degenerate_streak = (alpha <= 1e-14) ? degenerate_streak + 1 : 0;

        y += alpha * p;
        if (blocking >= 0 && (flat_direction || alpha < 1.0 - 1e-15)) {
            work.push_back(blocking);
            in_work[blocking] = 1;
        }
    }

    res.y = y;
    res.objective = 0.5 * y.dot(H * y) + q.dot(y);
    return res;
}

} // namespace dhwflex::qp
