#pragma once

#include <stdexcept>
#include <string>

namespace trisplat {

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace trisplat

// Contract check; throws std::runtime_error so callers and tests can catch it.
#define TS_CHECK(cond, msg)                  \
  do {                                       \
    if (!(cond)) ::trisplat::fail((msg));    \
  } while (0)
