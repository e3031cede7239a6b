#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rxncond {

// Scalar precision of tensor buffers. F32 is the training default,
// F64 is used for gradient checking.
enum class Dtype : uint8_t { F32 = 0, F64 = 1 };

inline const char* dtype_name(Dtype dt) { return dt == Dtype::F32 ? "f32" : "f64"; }

inline size_t dtype_size(Dtype dt) { return dt == Dtype::F32 ? 4 : 8; }

// Process-wide default for newly created tensors. Set once at startup
// (RXNCOND_PRECISION env var or --precision flag), read everywhere.
Dtype default_dtype();
void set_default_dtype(Dtype dt);

// Parses "f32" / "f64".
Dtype parse_dtype(const std::string& s);

// Reads RXNCOND_PRECISION if present and applies it. Returns the active dtype.
Dtype apply_precision_env();

// When enabled, differentiable ops verify their outputs are finite and
// throw on NaN/Inf. On by default in debug builds, switchable at runtime.
bool finite_checks_enabled();
void set_finite_checks(bool on);

}  // namespace rxncond
