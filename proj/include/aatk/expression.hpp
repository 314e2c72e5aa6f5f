#pragma once

#include <memory>
#include <string>

#include "aatk/types.hpp"

namespace aatk::expr {

struct Node;

/// A compiled arithmetic expression over phase-space variables q1..qn, p1..pn.
///
/// Grammar: + - * / ^, sin, cos, exp, sqrt, parentheses, decimal literals.
/// Gradients come from forward-mode differentiation of the expression tree,
/// so they match the evaluated arithmetic exactly.
class Expression {
public:
    Expression() = default;

    /// Parse `text` for a system with n degrees of freedom (2n variables).
    /// Throws InvalidInputError with a column position on malformed input
    /// or out-of-range variables.
    static Expression parse(const std::string& text, int n_dof);

    double eval(const Vec& z) const;
    Vec gradient(const Vec& z) const;

    int n_dof() const { return n_; }
    const std::string& text() const { return text_; }
    bool valid() const { return root_ != nullptr; }

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
    int n_ = 0;
};

}  // namespace aatk::expr
