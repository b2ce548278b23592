#pragma once

#include <cmath>

namespace ksmf {

/// Planar point / vector.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
    friend Vec2 operator*(Vec2 a, double c) { return {c * a.x, c * a.y}; }
    friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    Vec2& operator+=(Vec2 b) { x += b.x; y += b.y; return *this; }
    Vec2& operator-=(Vec2 b) { x -= b.x; y -= b.y; return *this; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    /// max(|x|, |y|); the sup norm used for all coupling distances.
    double norm_inf() const { return std::max(std::abs(x), std::abs(y)); }
    double dot(Vec2 b) const { return x * b.x + y * b.y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr double two_pi = 6.283185307179586476925286766559;

} // namespace ksmf
