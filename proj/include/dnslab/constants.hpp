#pragma once

namespace dnslab {

// CODATA 2018 values.
inline constexpr double kHbar = 1.054571817e-34;             // J s
inline constexpr double kElementaryCharge = 1.602176634e-19; // C
inline constexpr double kAtomicMassUnit = 1.66053906660e-27; // kg
inline constexpr double kCa40MassKg = 39.9625909 * kAtomicMassUnit;
inline constexpr double kPi = 3.14159265358979323846;

} // namespace dnslab
