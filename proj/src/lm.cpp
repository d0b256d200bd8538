#include "lm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "mmreg/errors.hpp"

namespace mmreg::detail {

namespace {

std::vector<double> toStd(const Eigen::VectorXd& x)
{
    return std::vector<double>(x.data(), x.data() + x.size());
}

void numericJacobian(const LmProblem& problem, const Eigen::VectorXd& x, Eigen::MatrixXd& J)
{
    Eigen::VectorXd xp = x;
    Eigen::VectorXd rp(problem.residualCount), rm(problem.residualCount);
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double h = finiteDifferenceStep(x[i]);
        xp[i] = x[i] + h;
        problem.residuals(xp, rp);
        xp[i] = x[i] - h;
        problem.residuals(xp, rm);
        xp[i] = x[i];
        J.col(i) = (rp - rm) / (2.0 * h);
    }
}

} // namespace

double finiteDifferenceStep(double x)
{
    return 1e-6 * std::max(1.0, std::abs(x));
}

LmResult levenbergMarquardt(const LmProblem& problem, Eigen::VectorXd x, const LmOptions& options)
{
    const Eigen::Index n = x.size();
    Eigen::VectorXd r(problem.residualCount);
    problem.residuals(x, r);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost))
        throw OptimizationError("non-finite initial cost", toStd(x));

    LmResult result;
    result.initialCost = cost;
    result.costHistory.push_back(cost);

    Eigen::MatrixXd J(problem.residualCount, n);
    Eigen::VectorXd rTrial(problem.residualCount);
    double lambda = options.initialLambda;
    bool accepted = false;

    for (int iter = 0; iter < options.maxIterations && cost > 0.0; ++iter)
    {
        if (problem.jacobian)
            problem.jacobian(x, r, J);
        else
            numericJacobian(problem, x, J);

        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        Eigen::VectorXd diag = JtJ.diagonal();
        for (Eigen::Index i = 0; i < n; ++i)
            if (diag[i] <= 0.0)
                diag[i] = 1e-12;

        bool stepTaken = false;
        double newCost = cost;
        while (lambda <= options.maxLambda)
        {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            const Eigen::VectorXd dx = A.ldlt().solve(-g);
            const Eigen::VectorXd xTrial = x + dx;
            problem.residuals(xTrial, rTrial);
            const double trialCost = rTrial.squaredNorm();
            if (std::isfinite(trialCost) && trialCost < cost)
            {
                x = xTrial;
                r = rTrial;
                newCost = trialCost;
                lambda = std::max(lambda / 10.0, 1e-15);
                stepTaken = true;
                break;
            }
            lambda *= 10.0;
        }

        if (!stepTaken)
        {
            // Stuck. Fine at a stationary point, a failure otherwise.
            double scaled = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                scaled = std::max(scaled, std::abs(g[i]) / std::sqrt(diag[i] * cost));
            if (!accepted && scaled > 1e-6)
                throw OptimizationError("damping reached its limit without reducing the cost", toStd(x));
            break;
        }

        accepted = true;
        result.iterations = iter + 1;
        const double decrease = (cost - newCost) / cost;
        cost = newCost;
        result.costHistory.push_back(cost);
        if (decrease < options.relativeTolerance)
            break;
    }

    result.x = std::move(x);
    result.cost = cost;
    return result;
}

} // namespace mmreg::detail
