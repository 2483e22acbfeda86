#pragma once
// Dense trust-region Gauss-Newton with dogleg steps for nonlinear least
// squares, cost f(x) = ||r(x)||^2. Deterministic, single-threaded, and with
// explicit stopping semantics: converged means ||grad f|| <= gtol; accepted
// steps decrease the cost monotonically; an optimal initial point returns
// after zero iterations.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace mtd {

struct tr_options {
    int max_iter = 5000;
    double gtol = 1e-10;
    double radius0 = 1.0;
    double max_radius = 1e6;
    double min_radius = 1e-14;
    std::vector<double>* cost_trace = nullptr;  // accepted costs, when wanted
};

struct tr_result {
    Eigen::VectorXd x;
    double cost = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string note;
};

// fn(x, r, J) fills the residual vector and Jacobian at x.
template <class Fn>
tr_result trust_region_least_squares(Fn&& fn, Eigen::VectorXd x, const tr_options& opt) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int n = static_cast<int>(x.size());
    tr_result out;
    VectorXd r;
    MatrixXd J;
    fn(x, r, J);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) {
        out.x = x;
        out.cost = cost;
        out.note = "non-finite cost at the initial point";
        return out;
    }
    VectorXd g = 2.0 * (J.transpose() * r);
    if (opt.cost_trace) opt.cost_trace->push_back(cost);
    double radius = opt.radius0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (g.norm() <= opt.gtol) {
            out.converged = true;
            break;
        }
        MatrixXd h = J.transpose() * J;  // model Hessian / 2
        VectorXd gh = 0.5 * g;           // J^T r
        // Gauss-Newton point, with an escalating ridge if J is rank-deficient.
        VectorXd p_gn;
        bool gn_ok = false;
        {
            Eigen::LDLT<MatrixXd> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                p_gn = ldlt.solve(-gh);
                gn_ok = p_gn.allFinite() &&
                        (h * p_gn + gh).norm() <= 1e-8 * gh.norm() + 1e-300;
            }
        }
        if (!gn_ok) {
            double tau = 1e-12 * (h.trace() / n + 1.0);
            for (int tries = 0; tries < 12 && !gn_ok; ++tries, tau *= 100.0) {
                Eigen::LDLT<MatrixXd> ldlt(
                    h + tau * MatrixXd::Identity(n, n));
                if (ldlt.info() != Eigen::Success) continue;
                p_gn = ldlt.solve(-gh);
                gn_ok = p_gn.allFinite();
            }
            if (!gn_ok) {
                out.note = "normal equations unsolvable";
                break;
            }
        }
        // Dogleg step within the radius.
        VectorXd p;
        double gn_norm = p_gn.norm();
        if (gn_norm <= radius) {
            p = p_gn;
        } else {
            double g2 = g.squaredNorm();
            double ghg = g.dot(h * g);
            double t_cauchy = ghg > 0.0 ? g2 / (2.0 * ghg) : radius / std::sqrt(g2);
            VectorXd p_u = -t_cauchy * g;
            double u_norm = p_u.norm();
            if (u_norm >= radius) {
                p = -(radius / std::sqrt(g2)) * g;
            } else {
                VectorXd d = p_gn - p_u;
                double a = d.squaredNorm();
                double b = 2.0 * p_u.dot(d);
                double c = p_u.squaredNorm() - radius * radius;
                double s = (-b + std::sqrt(std::max(0.0, b * b - 4.0 * a * c))) / (2.0 * a);
                p = p_u + s * d;
            }
        }
        double pred = -(g.dot(p) + p.dot(h * p));  // predicted decrease
        VectorXd x_try = x + p;
        VectorXd r_try;
        MatrixXd j_try;
        fn(x_try, r_try, j_try);
        double cost_try = r_try.squaredNorm();
        double rho = (std::isfinite(cost_try) && pred > 0.0)
                         ? (cost - cost_try) / pred
                         : -1.0;
        if (rho > 1e-4 && cost_try < cost) {
            x = x_try;
            r.swap(r_try);
            J.swap(j_try);
            cost = cost_try;
            g = 2.0 * (J.transpose() * r);
            if (opt.cost_trace) opt.cost_trace->push_back(cost);
        }
        if (rho < 0.25)
            radius *= 0.25;
        else if (rho > 0.75 && p.norm() >= 0.99 * radius)
            radius = std::min(2.0 * radius, opt.max_radius);
        if (radius < opt.min_radius) {
            out.note = "trust region collapsed";
            break;
        }
        if (cost == 0.0) {
            out.converged = true;
            ++it;
            break;
        }
    }
    if (it >= opt.max_iter && !out.converged) out.note = "iteration limit reached";
    out.x = std::move(x);
    out.cost = cost;
    out.grad_norm = g.norm();
    out.iterations = it;
    return out;
}

}  // namespace mtd
