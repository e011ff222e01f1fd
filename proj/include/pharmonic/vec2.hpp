#pragma once

#include <cmath>

namespace pharmonic {

/// Plain 2-vector; doubles as a complex number for S^1-valued fields.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x, y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x, y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s, y *= s; return *this; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// Im(conj(a) * b).
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Complex product a * b.
constexpr Vec2 cmul(Vec2 a, Vec2 b) { return {a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x}; }
constexpr Vec2 conj(Vec2 a) { return {a.x, -a.y}; }
inline Vec2 polar(double angle) { return {std::cos(angle), std::sin(angle)}; }
/// Rotation of a by angle t.
inline Vec2 rotate(Vec2 a, double t) { return cmul(polar(t), a); }

}  // namespace pharmonic
