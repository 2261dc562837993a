#include "xgoal/parallel.hpp"

#include <cstdlib>
#include <string>

namespace xgoal {

std::size_t threads_from_env() {
    const char* s = std::getenv("XGOAL_THREADS");
    if (!s || !*s) return 1;
    try {
        const long v = std::stol(s);
        return v > 0 ? static_cast<std::size_t>(v) : 1;
    } catch (...) {
        return 1;
    }
}

}  // namespace xgoal
