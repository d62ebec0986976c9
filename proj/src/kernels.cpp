#include "mvt/kernels.hpp"

#include <cstdlib>

#include "mvt/errors.hpp"

namespace mvt::kern {

const Kernels* avx2_kernels_impl();  // defined in kernels_avx2.cpp

bool avx2_supported() {
#if defined(__x86_64__)
    return avx2_kernels_impl() != nullptr && __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Kernels* avx2_kernels() { return avx2_supported() ? avx2_kernels_impl() : nullptr; }

namespace {

const Kernels* pick(const std::string& which) {
    if (which == "scalar") return &scalar_kernels();
    if (which == "avx2") {
        const Kernels* k = avx2_kernels();
        if (!k) throw ConfigError("kernels: avx2 requested but not supported on this machine");
        return k;
    }
    if (which == "auto" || which.empty()) {
        const Kernels* k = avx2_kernels();
        return k ? k : &scalar_kernels();
    }
    throw ConfigError("kernels: unknown variant '" + which + "' (expected auto|scalar|avx2)");
}

const Kernels*& selection() {
    static const Kernels* sel = [] {
        const char* env = std::getenv("MVT_KERNELS");
        return pick(env ? env : "auto");
    }();
    return sel;
}

}  // namespace

const Kernels& active() { return *selection(); }

void select(const std::string& which) { selection() = pick(which); }

}  // namespace mvt::kern
