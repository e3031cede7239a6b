#include "rxncond/dtype.hpp"

#include <cstdlib>

namespace rxncond {

namespace {
Dtype g_default_dtype = Dtype::F32;
#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif
}  // namespace

Dtype default_dtype() { return g_default_dtype; }
void set_default_dtype(Dtype dt) { g_default_dtype = dt; }

Dtype parse_dtype(const std::string& s) {
    if (s == "f32") return Dtype::F32;
    if (s == "f64") return Dtype::F64;
    throw std::invalid_argument("unknown precision '" + s + "' (expected f32 or f64)");
}

Dtype apply_precision_env() {
    if (const char* env = std::getenv("RXNCOND_PRECISION")) {
        set_default_dtype(parse_dtype(env));
    }
    return g_default_dtype;
}

bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool on) { g_finite_checks = on; }

}  // namespace rxncond
