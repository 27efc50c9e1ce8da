#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gridwh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFault = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `gridwh` binary. `args` excludes the program name.
///
/// Commands: registry-serve, dbs-serve, publish, find, query, probe, demo.
/// With --json every command prints exactly one JSON object
/// {"ok": bool, "fault"?: {...}, "data": ...} on `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes the deterministic `events` fixture (id,run,e,tag,good) used by the
/// demo when no --fixture is given.
void write_events_fixture(const std::filesystem::path& path, std::size_t rows = 100);

}  // namespace gridwh::cli
