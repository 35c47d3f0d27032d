#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace copmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// All library failures carry a short machine-parsable code plus a human
// message; the CLI prints them as "error: <code>: <detail>".
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline void require(bool cond, const char* code, const std::string& detail) {
    if (!cond) throw error(code, detail);
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

}  // namespace copmix
