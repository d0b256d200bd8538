#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace mmreg::detail {

struct LmProblem
{
    int residualCount = 0;
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)> residuals;
    // Fills J (residualCount x params). Central differences when empty.
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& r, Eigen::MatrixXd& J)> jacobian;
};

struct LmOptions
{
    int maxIterations = 100;
    double relativeTolerance = 1e-12;
    double initialLambda = 1e-3;
    double maxLambda = 1e16;
};

struct LmResult
{
    Eigen::VectorXd x;
    double initialCost = 0.0;
    double cost = 0.0;
    int iterations = 0;
    std::vector<double> costHistory;
};

LmResult levenbergMarquardt(const LmProblem& problem, Eigen::VectorXd x, const LmOptions& options);

double finiteDifferenceStep(double x);

} // namespace mmreg::detail
