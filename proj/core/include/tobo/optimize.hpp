#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tobo/kernels.hpp"

namespace tobo {

struct LbfgsOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-5;
    /// Stop when the relative decrease of the objective falls below this.
    double relative_tolerance = 1e-10;
    int history = 10;
    int max_line_search = 40;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;
    /// Objective value after every accepted iteration, starting with the initial point.
    std::vector<double> trace;
};

/// Returns f(x) and, when grad != nullptr, writes the gradient. Infeasible
/// points may return +inf.
using GradientObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// Applied to every accepted iterate; must not change the objective value.
using Projection = std::function<void(Eigen::VectorXd&)>;

/// Limited-memory BFGS minimization with Armijo backtracking. Every accepted
/// step strictly decreases the objective.
LbfgsResult minimize_lbfgs(const GradientObjective& f, Eigen::VectorXd x0, const LbfgsOptions& opts = {},
                           const Projection& project = {});

struct BoxSearchOptions {
    int max_iterations = 30;
    double fd_step = 1e-5;
    double step_tolerance = 1e-8;
    int history = 5;
};

struct BoxSearchResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int evaluations = 0;
};

/// Central-difference gradient, one-sided at the box faces.
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double fx, const InputDomain& box, double h,
                                           int* evaluations = nullptr);

/// Local maximization inside a box: projected quasi-Newton ascent on
/// finite-difference gradients.
BoxSearchResult maximize_in_box(const std::function<double(const Eigen::VectorXd&)>& f, const InputDomain& box,
                                const Eigen::VectorXd& x0, const BoxSearchOptions& opts = {});

}  // namespace tobo
