#ifndef WDA_LOG_HPP_
#define WDA_LOG_HPP_

#include <cstdarg>
#include <cstdio>

namespace wda::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

inline Level& threshold() {
  static Level lv = Level::kInfo;
  return lv;
}

inline void vput(Level lv, const char* fmt, va_list ap) {
  if (lv < threshold()) return;
  static const char* tag[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[wda:%s] ", tag[static_cast<int>(lv)]);
  std::vfprintf(stderr, fmt, ap);
  std::fputc('\n', stderr);
}

#define WDA_LOG_FN(name, level)                         \
  inline void name(const char* fmt, ...) {              \
    va_list ap;                                         \
    va_start(ap, fmt);                                  \
    ::wda::log::vput(::wda::log::Level::level, fmt, ap);\
    va_end(ap);                                         \
  }

WDA_LOG_FN(debug, kDebug)
WDA_LOG_FN(info, kInfo)
WDA_LOG_FN(warn, kWarn)
WDA_LOG_FN(error, kError)

#undef WDA_LOG_FN

}  // namespace wda::log

#endif  // WDA_LOG_HPP_
